#pragma once

// Core domain types for constrained auto-bidding: impressions, campaigns,
// dual variables, linear bid parameters, and the closed-form decision math
// shared by the allocator, solvers and controllers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace bicb {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Floor applied to the dual denominator p + q_u - q_l when converting duals
/// into executable bid parameters. Keeps alpha finite in the p -> 0 limit.
inline constexpr double kDualFloor = 1e-9;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when p + q_u - q_l is outside the region where bidding is
/// equivalent to an auction (the bid formula denominator is nonpositive).
class DegenerateDualsError : public Error {
 public:
  using Error::Error;
};

/// Raised when a bracketing search cannot enclose its target.
class BracketError : public Error {
 public:
  using Error::Error;
};

class SizeLimitError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One biddable opportunity. Winning it costs pctr*wp in expectation and
/// yields pctr clicks and pctr*obj value.
struct Impression {
  int step = 0;      // 0-based time bucket
  double pctr = 0;   // click-through rate if won, in [0,1]
  double wp = 0;     // winning price: cost per click if won, > 0
  double obj = 0;    // value per click (e.g. conversion rate), >= 0

  double expected_cost() const { return pctr * wp; }
  double expected_clicks() const { return pctr; }
  double expected_value() const { return pctr * obj; }
};

/// Campaign constraints and schedule. A missing CPC upper bound is encoded
/// as +inf and a missing lower bound as 0, which expresses the
/// budget-only setting with the same code path.
struct Campaign {
  std::string id;
  double budget = 0;
  double cpc_upper = kInf;
  double cpc_lower = 0;
  int start_step = 0;
  int end_step = 47;
  std::optional<double> manual_bid;

  bool has_cpc_upper() const { return std::isfinite(cpc_upper); }
  bool has_cpc_lower() const { return cpc_lower > 0; }
  int num_steps() const { return end_step - start_step + 1; }

  /// Scale constant of the bid formula. The objective carries a factor of
  /// the CPC upper bound; when that bound is absent any positive constant
  /// gives the same decisions (the duals rescale), so 1 is used.
  double bid_scale() const { return has_cpc_upper() ? cpc_upper : 1.0; }
};

inline void validate_campaign(const Campaign& c) {
  if (!(c.budget > 0)) throw ConfigError("campaign " + c.id + ": budget must be > 0");
  if (c.has_cpc_upper() && c.has_cpc_lower() && !(c.cpc_upper > c.cpc_lower))
    throw ConfigError("campaign " + c.id + ": cpc_upper must exceed cpc_lower");
  if (c.cpc_lower < 0) throw ConfigError("campaign " + c.id + ": cpc_lower must be >= 0");
  if (c.start_step > c.end_step)
    throw ConfigError("campaign " + c.id + ": start_step must be <= end_step");
  if (c.manual_bid && !(*c.manual_bid > 0 && std::isfinite(*c.manual_bid)))
    throw ConfigError("campaign " + c.id + ": manual_bid must be positive and finite");
}

/// Lagrange multipliers of the budget (p), CPC-upper (q_u) and CPC-lower
/// (q_l) constraints. They fully determine bidding behavior.
struct DualVars {
  double p = 0;
  double q_u = 0;
  double q_l = 0;

  /// Denominator of the bid formula. Positive inside the region where the
  /// optimal allocation is implementable by an auction.
  double denominator() const { return p + q_u - q_l; }
};

/// Linear bid rule bid = alpha*obj + beta; the only thing the impression-level
/// decision layer needs to know about a policy.
struct BidParams {
  double alpha = 0;
  double beta = 0;

  double bid(double obj) const { return alpha * obj + beta; }
};

/// Cumulative delivery state of one campaign. cost/clicks/value are
/// expected-value accounted (pctr-weighted), so replays are deterministic.
struct AccumStats {
  double cost = 0;
  double clicks = 0;
  double value = 0;
  std::uint64_t wins = 0;
  std::uint64_t seen = 0;

  void add_win(const Impression& imp) {
    cost += imp.expected_cost();
    clicks += imp.expected_clicks();
    value += imp.expected_value();
    ++wins;
  }

  AccumStats& operator+=(const AccumStats& o) {
    cost += o.cost;
    clicks += o.clicks;
    value += o.value;
    wins += o.wins;
    seen += o.seen;
    return *this;
  }
};

/// Predicted or realized (cost, clicks) pair for some traffic range.
struct CostClicks {
  double cost = 0;
  double clicks = 0;
};

// ---------------------------------------------------------------------------
// Decision math
// ---------------------------------------------------------------------------

/// Realized cost-per-click. A campaign with zero clicks reports 0 and is
/// treated as satisfying both CPC constraints.
inline double effective_cpc(const AccumStats& s) {
  return s.clicks > 0 ? s.cost / s.clicks : 0.0;
}

namespace detail {
inline void require_auction_region(const DualVars& d) {
  if (!(d.denominator() > 0))
    throw DegenerateDualsError("p + q_u - q_l must be positive (got " +
                               std::to_string(d.denominator()) + ")");
}
}  // namespace detail

/// Optimal bid for value-per-click `obj` under duals `d`:
///   bid = (S*obj + S*q_u - C_l*q_l) / (p + q_u - q_l),  S = bid scale.
/// Requires p + q_u - q_l > 0.
inline double bid_price(const DualVars& d, const Campaign& c, double obj) {
  detail::require_auction_region(d);
  const double s = c.bid_scale();
  return (s * obj + s * d.q_u - c.cpc_lower * d.q_l) / d.denominator();
}

/// Splits the bid formula into the linear coefficients used by the
/// execution layer: alpha = S/(p+q_u-q_l), beta = (S*q_u - C_l*q_l)/(p+q_u-q_l).
inline BidParams to_bid_params(const DualVars& d, const Campaign& c) {
  detail::require_auction_region(d);
  const double s = c.bid_scale();
  const double den = d.denominator();
  return BidParams{s / den, (s * d.q_u - c.cpc_lower * d.q_l) / den};
}

/// Like to_bid_params but total: the denominator is floored at `floor`, so the
/// p -> 0 limit (win everything with positive value) yields finite parameters.
inline BidParams effective_bid_params(const DualVars& d, const Campaign& c,
                                      double floor = kDualFloor) {
  const double s = c.bid_scale();
  const double den = std::max(d.denominator(), floor);
  return BidParams{s / den, (s * d.q_u - c.cpc_lower * d.q_l) / den};
}

/// Greedy win rule: take the impression iff its obj strictly exceeds the
/// dual-derived threshold, equivalently iff bid_price > wp.
inline bool win_decision(const DualVars& d, const Campaign& c, const Impression& imp) {
  return bid_price(d, c, imp.obj) > imp.wp;
}

/// CPC-bound tightening margin that keeps a thresholding solution within the
/// original bounds despite up to two boundary impressions differing from the
/// fractional optimum:
///   max( 2*C_u^2/(B - 2*C_u), 2*C_l*max_wp/B ).
/// Defined for finite C_u with B > 2*C_u.
inline double epsilon_c(const Campaign& c, double max_wp) {
  if (!c.has_cpc_upper())
    throw ConfigError("epsilon_c requires a finite cpc_upper");
  if (!(c.budget > 2 * c.cpc_upper))
    throw ConfigError("epsilon_c requires budget > 2*cpc_upper");
  const double upper_term = 2 * c.cpc_upper * c.cpc_upper / (c.budget - 2 * c.cpc_upper);
  const double lower_term = 2 * c.cpc_lower * max_wp / c.budget;
  return std::max(upper_term, lower_term);
}

}  // namespace bicb
