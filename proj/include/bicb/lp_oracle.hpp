#pragma once

// Ground-truth solvers: the exact fractional optimum via the problem's own
// dual structure (threshold ordering, one bisected CPC multiplier, <=2
// fractional completions), a 0-1 brute force for tiny instances, and the
// tightened-bound greedy whose gap to the 0-1 optimum is checked by
// verify_gap.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "bicb/allocator.hpp"
#include "bicb/dual_solver.hpp"

namespace bicb {

/// Response backed by an unconstrained replay of `slice` (impressions at or
/// after `from_step`). The budget is handled through the duals, not a stop.
/// The slice must outlive the returned function.
inline ResponseFn make_replay_response(const TrafficSlice& slice, const Campaign& c) {
  return [&slice, c](const DualVars& duals, int from_step) {
    detail::require_replayable(duals);
    const BidParams params = effective_bid_params(duals, c);
    auto lo = std::lower_bound(slice.impressions.begin(), slice.impressions.end(), from_step,
                               [](const Impression& i, int s) { return i.step < s; });
    const AccumStats acc = replay_params(
        {&*lo, static_cast<std::size_t>(slice.impressions.end() - lo)}, params, c.budget,
        ReplayMode::Unconstrained);
    return CostClicks{acc.cost, acc.clicks};
  };
}

/// Deterministic tie-breaking: obj_i += i * (1e-12 * max obj). Makes the
/// threshold line generic so at most two impressions can sit on it, with a
/// fixed preference for higher indices among near-ties.
inline TrafficSlice perturb_objs(const TrafficSlice& slice) {
  TrafficSlice out = slice;
  double max_obj = 0;
  for (const auto& imp : slice.impressions) max_obj = std::max(max_obj, imp.obj);
  const double eps_base = 1e-12 * max_obj;
  for (std::size_t i = 0; i < out.impressions.size(); ++i)
    out.impressions[i].obj += static_cast<double>(i) * eps_base;
  return out;
}

struct BindingSet {
  bool budget = false;
  bool cpc_upper = false;
  bool cpc_lower = false;
};

struct LpSolution {
  double value = 0;   // sum of x * pctr * obj (original objs, unscaled)
  double cost = 0;
  double clicks = 0;
  DualVars duals;
  std::vector<std::pair<std::size_t, double>> fractional_items;  // (index, fraction)
  BindingSet binding;
  bool infeasible_lower = false;
  bool degraded = false;
};

namespace detail {

constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

/// The per-impression threshold key: the impression is won iff s_i(q) > p.
/// q is signed (q > 0 acts as q_u, q < 0 as q_l); S is the bid scale.
inline double threshold_key(const Impression& imp, const Campaign& c, double q) {
  const double s = c.bid_scale();
  const double q_u = q > 0 ? q : 0.0;
  const double q_l = q < 0 ? -q : 0.0;
  return (s * imp.obj + s * q_u - c.cpc_lower * q_l) / imp.wp - q_u + q_l;
}

/// Fractional budget fill at fixed q: impressions in descending key order,
/// whole while they fit, one fractional straddler where the budget runs out.
/// This is the optimum of the budget-restricted problem at that q.
struct FracFill {
  std::vector<std::size_t> full;
  std::size_t frac_index = kNoIndex;
  double frac = 0;
  double cost = 0, clicks = 0;
  double threshold_p = 0;  // dual of the budget constraint implied by the fill

  bool contains_full(std::size_t i) const {
    return std::find(full.begin(), full.end(), i) != full.end();
  }
};

inline FracFill frac_fill(const TrafficSlice& slice, const Campaign& c, double q) {
  const std::size_t n = slice.size();
  std::vector<std::pair<double, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) keyed[i] = {threshold_key(slice.impressions[i], c, q), i};
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  FracFill fill;
  for (const auto& [key, idx] : keyed) {
    if (!(key > 0)) break;  // items at or below a zero bid never win
    const Impression& imp = slice.impressions[idx];
    const double ci = imp.expected_cost();
    if (fill.cost + ci <= c.budget) {
      fill.full.push_back(idx);
      fill.cost += ci;
      fill.clicks += imp.expected_clicks();
      continue;
    }
    if (ci > 0) {
      // An exact budget hit makes the next item a zero-fraction straddler,
      // which still carries the budget dual.
      fill.frac_index = idx;
      fill.frac = (c.budget - fill.cost) / ci;
      fill.cost += fill.frac * ci;
      fill.clicks += fill.frac * imp.expected_clicks();
      fill.threshold_p = std::max(0.0, key);
    }
    return fill;
  }
  // Everything with a positive key fit: the budget is slack and p = 0.
  fill.threshold_p = 0;
  return fill;
}

struct VertexSolve {
  double q = 0;  // signed CPC multiplier at the satisfying side
  FracFill fill_sat;
  FracFill fill_vio;
  bool cpc_branch = false;   // a CPC bound had to be activated
  bool upper_branch = false;
  bool degraded = false;
  bool infeasible_lower = false;
};

/// Finds the dual vertex of the fractional problem: checks the pure budget
/// fill first; if a CPC bound is violated, bisects the signed multiplier q on
/// the sign of g(q) = cost - bound * clicks of the fill, which crosses zero
/// at an ordering swap of the threshold keys. The two bracket-end fills
/// differ exactly in the <=2 impressions sitting on the vertex line.
inline VertexSolve vertex_solve(const TrafficSlice& slice, const Campaign& c,
                                const SolverConfig& cfg) {
  VertexSolve v;
  v.fill_sat = frac_fill(slice, c, 0.0);
  const double gu0 = c.has_cpc_upper() ? v.fill_sat.cost - c.cpc_upper * v.fill_sat.clicks : 0.0;
  const double gl0 = v.fill_sat.cost - c.cpc_lower * v.fill_sat.clicks;
  const bool upper_violated = c.has_cpc_upper() && gu0 > 0;
  const bool lower_violated = c.has_cpc_lower() && v.fill_sat.clicks > 0 && gl0 < 0;
  if (!upper_violated && !lower_violated) {
    v.fill_vio = v.fill_sat;
    return v;
  }
  v.cpc_branch = true;
  v.upper_branch = upper_violated;
  const double bound = upper_violated ? c.cpc_upper : c.cpc_lower;
  auto g = [&](const FracFill& f) { return f.cost - bound * f.clicks; };
  // Violating sign: g > 0 for the upper bound, g < 0 for the lower bound.
  // Fills whose implied denominator leaves the auction-equivalent region
  // never count as violating, so the lower-branch search stays on the
  // interior side of its crossing.
  auto violating = [&](const FracFill& f, double q) {
    if (upper_violated) return g(f) > 0;
    return g(f) < 0 && f.threshold_p + q > cfg.dual_floor;
  };

  double q_vio = 0.0;
  v.fill_vio = v.fill_sat;
  double q_sat = upper_violated ? cfg.big_m : -cfg.big_m;
  v.fill_sat = frac_fill(slice, c, q_sat);
  if (violating(v.fill_sat, q_sat)) {
    v.degraded = true;
    v.infeasible_lower = !upper_violated;
    v.q = q_sat;
    return v;
  }
  for (int i = 0; i < cfg.max_outer - 2; ++i) {
    const double qm = 0.5 * (q_vio + q_sat);
    FracFill fm = frac_fill(slice, c, qm);
    if (violating(fm, qm)) {
      q_vio = qm;
      v.fill_vio = std::move(fm);
    } else {
      q_sat = qm;
      v.fill_sat = std::move(fm);
    }
  }
  v.q = q_sat;
  if (!upper_violated) {
    // Lower bound met only by a near-empty fill, still violating, or with
    // the implied bid denominator outside the auction-equivalent region.
    const double q_l = -v.q;
    if (v.fill_sat.clicks <= 0 || g(v.fill_sat) < 0 ||
        v.fill_sat.threshold_p - q_l <= cfg.dual_floor)
      v.infeasible_lower = true;
  }
  return v;
}

// Maximizes sum f_j*v_j over f in [0,1]^n (n <= 2) subject to up to two
// equality constraints sum a_kj*f_j = r_k. Enumerates corner/equation
// candidate points and keeps the best feasible one.
struct TinyLp {
  int n = 0;
  int m = 0;
  double a[2][2] = {{0, 0}, {0, 0}};
  double r[2] = {0, 0};
  double v[2] = {0, 0};

  bool satisfied(const std::array<double, 2>& f, double tol) const {
    for (int k = 0; k < m; ++k) {
      double lhs = 0;
      for (int j = 0; j < n; ++j) lhs += a[k][j] * f[j];
      if (std::abs(lhs - r[k]) > tol) return false;
    }
    return true;
  }

  bool solve(std::array<double, 2>& best, double tol) const {
    std::vector<std::array<double, 2>> cands;
    const double corners[2] = {0.0, 1.0};
    for (double f0 : corners)
      for (double f1 : corners) cands.push_back({f0, f1});
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < n; ++j) {
        if (a[k][j] == 0) continue;
        const int o = 1 - j;
        for (double fo : corners) {
          std::array<double, 2> f{0, 0};
          f[static_cast<std::size_t>(o)] = fo;
          f[static_cast<std::size_t>(j)] = (r[k] - (n > 1 ? a[k][o] * fo : 0.0)) / a[k][j];
          cands.push_back(f);
        }
      }
    }
    if (m == 2 && n == 2) {
      const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
      if (std::abs(det) > 1e-14) {
        cands.push_back({(r[0] * a[1][1] - a[0][1] * r[1]) / det,
                         (a[0][0] * r[1] - r[0] * a[1][0]) / det});
      }
    }
    bool found = false;
    double best_val = 0;
    for (auto f : cands) {
      bool in_box = true;
      for (int j = 0; j < n; ++j) {
        // Snap fp noise onto the box so integral optima stay integral.
        if (std::abs(f[j]) < 1e-12) f[j] = 0;
        if (std::abs(f[j] - 1) < 1e-12) f[j] = 1;
        if (f[j] < 0 || f[j] > 1) in_box = false;
      }
      if (!in_box || !satisfied(f, tol)) continue;
      double val = 0;
      for (int j = 0; j < n; ++j) val += v[j] * f[j];
      if (!found || val > best_val) {
        best = f;
        best_val = val;
        found = true;
      }
    }
    return found;
  }
};

}  // namespace detail

/// Exact optimum of the fractional allocation problem. Decisions use the
/// tie-broken objs; reported value/cost/clicks use the original ones.
inline LpSolution lp_optimal(const TrafficSlice& slice, const Campaign& c,
                             const SolverConfig& cfg = {}) {
  LpSolution sol;
  if (slice.empty()) return sol;

  const TrafficSlice perturbed = perturb_objs(slice);
  const detail::VertexSolve v = detail::vertex_solve(perturbed, c, cfg);
  sol.infeasible_lower = v.infeasible_lower;
  sol.degraded = v.degraded;

  const double q_u = v.q > 0 ? v.q : 0.0;
  const double q_l = v.q < 0 ? -v.q : 0.0;
  sol.duals = DualVars{v.fill_sat.threshold_p, q_u, q_l};
  sol.binding.cpc_upper = q_u > 0;
  sol.binding.cpc_lower = q_l > 0;

  const std::size_t n = slice.size();
  std::vector<double> x(n, 0.0);

  if (!v.cpc_branch || v.degraded) {
    // Pure budget fill (or best effort when no bracket exists).
    for (std::size_t idx : v.fill_sat.full) x[idx] = 1.0;
    if (v.fill_sat.frac_index != detail::kNoIndex) x[v.fill_sat.frac_index] = v.fill_sat.frac;
    sol.binding.budget = v.fill_sat.frac_index != detail::kNoIndex || sol.duals.p > 0;
  } else {
    // Base: impressions fully taken on both sides of the vertex bracket.
    // Boundary: everything else touched by either fill; those sit on the
    // vertex line and carry the fractional mass.
    std::vector<std::size_t> boundary;
    AccumStats base;
    std::vector<std::uint8_t> in_sat(n, 0), in_vio(n, 0);
    for (std::size_t idx : v.fill_sat.full) in_sat[idx] = 1;
    for (std::size_t idx : v.fill_vio.full) in_vio[idx] = 1;
    auto consider = [&](std::size_t idx) {
      if (std::find(boundary.begin(), boundary.end(), idx) == boundary.end())
        boundary.push_back(idx);
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (in_sat[i] && in_vio[i]) {
        x[i] = 1.0;
        base.add_win(slice.impressions[i]);
      } else if (in_sat[i] != in_vio[i]) {
        consider(i);
      }
    }
    if (v.fill_sat.frac_index != detail::kNoIndex && x[v.fill_sat.frac_index] == 0.0)
      consider(v.fill_sat.frac_index);
    if (v.fill_vio.frac_index != detail::kNoIndex && x[v.fill_vio.frac_index] == 0.0)
      consider(v.fill_vio.frac_index);

    const double bound = v.upper_branch ? c.cpc_upper : c.cpc_lower;
    const bool budget_binding =
        v.fill_sat.frac_index != detail::kNoIndex || v.fill_vio.frac_index != detail::kNoIndex ||
        v.fill_sat.threshold_p > 0;
    sol.binding.budget = budget_binding;

    // Keep the two boundary impressions closest to the vertex line.
    if (boundary.size() > 2) {
      std::sort(boundary.begin(), boundary.end(), [&](std::size_t a, std::size_t b) {
        const double da =
            std::abs(detail::threshold_key(perturbed.impressions[a], c, v.q) - sol.duals.p);
        const double db =
            std::abs(detail::threshold_key(perturbed.impressions[b], c, v.q) - sol.duals.p);
        return da != db ? da < db : a < b;
      });
      boundary.resize(2);
    }

    detail::TinyLp lp;
    lp.n = static_cast<int>(boundary.size());
    lp.m = 0;
    if (budget_binding) {
      for (int j = 0; j < lp.n; ++j)
        lp.a[lp.m][j] = slice.impressions[boundary[static_cast<std::size_t>(j)]].expected_cost();
      lp.r[lp.m] = c.budget - base.cost;
      ++lp.m;
    }
    {
      for (int j = 0; j < lp.n; ++j) {
        const Impression& imp = slice.impressions[boundary[static_cast<std::size_t>(j)]];
        lp.a[lp.m][j] = imp.expected_cost() - bound * imp.expected_clicks();
      }
      lp.r[lp.m] = bound * base.clicks - base.cost;
      ++lp.m;
    }
    for (int j = 0; j < lp.n; ++j)
      lp.v[j] = slice.impressions[boundary[static_cast<std::size_t>(j)]].expected_value();

    std::array<double, 2> f{0, 0};
    const double tol = 1e-9 * std::max(1.0, c.budget);
    if (lp.n > 0 && lp.solve(f, tol)) {
      for (int j = 0; j < lp.n; ++j) x[boundary[static_cast<std::size_t>(j)]] = f[j];
    } else {
      // No completion satisfies the equalities: fall back to the feasible
      // satisfying-side fill and mark the solution degraded.
      std::fill(x.begin(), x.end(), 0.0);
      for (std::size_t idx : v.fill_sat.full) x[idx] = 1.0;
      if (v.fill_sat.frac_index != detail::kNoIndex) x[v.fill_sat.frac_index] = v.fill_sat.frac;
      sol.degraded = true;
    }
  }

  // Single ascending pass so integral solutions sum bit-identically to an
  // enumeration over the same support.
  auto assemble = [&] {
    sol.value = sol.cost = sol.clicks = 0;
    sol.fractional_items.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] == 0) continue;
      const Impression& imp = slice.impressions[i];
      sol.value += x[i] * imp.expected_value();
      sol.cost += x[i] * imp.expected_cost();
      sol.clicks += x[i] * imp.expected_clicks();
      if (x[i] < 1.0) sol.fractional_items.emplace_back(i, x[i]);
    }
  };
  assemble();

  // The equality completion can overshoot a bound by rounding noise; shave a
  // fractional item minimally so the reported point is exactly feasible.
  for (int round = 0; round < 4 && !sol.fractional_items.empty(); ++round) {
    const double over_budget = sol.cost - c.budget;
    const double over_upper =
        c.has_cpc_upper() && sol.clicks > 0 ? sol.cost - c.cpc_upper * sol.clicks : 0.0;
    const double under_lower =
        c.has_cpc_lower() && sol.clicks > 0 ? c.cpc_lower * sol.clicks - sol.cost : 0.0;
    if (over_budget <= 0 && over_upper <= 0 && under_lower <= 0) break;
    bool adjusted = false;
    for (const auto& [idx, f] : sol.fractional_items) {
      const Impression& imp = slice.impressions[idx];
      const double cj = imp.expected_cost();
      const double kj = imp.expected_clicks();
      double delta = 0;
      if (over_budget > 0 && cj > 0) delta = std::max(delta, over_budget / cj);
      if (over_upper > 0 && cj - c.cpc_upper * kj > 0)
        delta = std::max(delta, over_upper / (cj - c.cpc_upper * kj));
      if (under_lower > 0 && c.cpc_lower * kj - cj > 0)
        delta = std::max(delta, under_lower / (c.cpc_lower * kj - cj));
      if (delta > 0) {
        x[idx] = std::max(0.0, x[idx] - delta * (1 + 1e-9) - 1e-15);
        adjusted = true;
        break;
      }
    }
    if (!adjusted) break;
    assemble();
  }
  return sol;
}

/// Exact 0-1 optimum by enumeration. Zero selection is always feasible; a
/// zero-click subset satisfies both CPC bounds by convention.
inline double brute_force_01(const TrafficSlice& slice, const Campaign& c) {
  const std::size_t n = slice.size();
  if (n > 22) throw SizeLimitError("brute_force_01 limited to 22 impressions");
  double best = 0.0;
  const std::uint32_t limit = static_cast<std::uint32_t>(1u << n);
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    double cost = 0, clicks = 0, value = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      const Impression& imp = slice.impressions[i];
      cost += imp.expected_cost();
      clicks += imp.expected_clicks();
      value += imp.expected_value();
    }
    if (cost > c.budget) continue;
    if (clicks > 0) {
      const double cpc = cost / clicks;
      if (c.has_cpc_upper() && cpc > c.cpc_upper) continue;
      if (c.has_cpc_lower() && cpc < c.cpc_lower) continue;
    }
    best = std::max(best, value);
  }
  return best;
}

struct GreedyResult {
  double value = 0;
  AccumStats stats;
  DualVars duals;
  double eps_c = 0;  // tightening applied to the CPC bounds, 0 when none
  bool infeasible_lower = false;
  bool degraded = false;
};

/// Thresholding solution: solve the dual vertex, then take every impression
/// strictly above the resulting line (dropping the <=2 impressions the
/// fractional optimum holds on the line).
///
/// With `tighten_bounds` false the vertex is solved at the campaign's own
/// bounds: the value is within 2*max obj of the campaign's 0-1 optimum and,
/// when the budget binds, the realized CPC stays within epsilon_c of the
/// bounds. With `tighten_bounds` true the vertex is solved at bounds
/// tightened by epsilon_c, trading value for a realized CPC inside the
/// original window; this is the execution-safe variant.
inline GreedyResult greedy_01(const TrafficSlice& slice, const Campaign& c,
                              const SolverConfig& cfg = {}, bool tighten_bounds = false) {
  GreedyResult g;
  if (slice.empty()) return g;

  Campaign lp_campaign = c;
  if (c.has_cpc_upper()) {
    double max_wp = 0;
    for (const auto& imp : slice.impressions) max_wp = std::max(max_wp, imp.wp);
    g.eps_c = epsilon_c(c, max_wp);
    if (tighten_bounds) {
      lp_campaign.cpc_upper = c.cpc_upper - g.eps_c;
      if (c.has_cpc_lower()) lp_campaign.cpc_lower = c.cpc_lower + g.eps_c;
      if (!(lp_campaign.cpc_upper > lp_campaign.cpc_lower))
        throw ConfigError("epsilon_c tightening collapsed the CPC window");
    }
  } else if (c.has_cpc_lower()) {
    throw ConfigError("greedy CPC accounting needs a finite cpc_upper when cpc_lower is active");
  }

  const TrafficSlice perturbed = perturb_objs(slice);
  const detail::VertexSolve v = detail::vertex_solve(perturbed, lp_campaign, cfg);
  g.infeasible_lower = v.infeasible_lower;
  g.degraded = v.degraded;
  g.duals = DualVars{v.fill_sat.threshold_p, v.q > 0 ? v.q : 0.0, v.q < 0 ? -v.q : 0.0};

  for (std::size_t i = 0; i < slice.size(); ++i) {
    g.stats.seen++;
    if (detail::threshold_key(perturbed.impressions[i], lp_campaign, v.q) > g.duals.p)
      g.stats.add_win(slice.impressions[i]);
  }
  g.value = g.stats.value;
  return g;
}

/// Checks the thresholding solution against the 0-1 optimum: value within
/// 2*max obj, and realized CPC inside the epsilon_c-relaxed bounds.
inline bool verify_gap(const GreedyResult& greedy, double lp01_value, const TrafficSlice& slice,
                       const Campaign& c) {
  double max_obj = 0;
  for (const auto& imp : slice.impressions) max_obj = std::max(max_obj, imp.obj);
  const double fp_guard = 1e-9 * std::max(1.0, std::abs(lp01_value));
  if (greedy.value < lp01_value - 2 * max_obj - fp_guard) return false;
  if (greedy.stats.clicks <= 0) return true;
  const double cpc = effective_cpc(greedy.stats);
  if (c.has_cpc_upper() && cpc > c.cpc_upper + greedy.eps_c + fp_guard) return false;
  if (c.has_cpc_lower() && cpc < c.cpc_lower - greedy.eps_c - fp_guard) return false;
  return true;
}

}  // namespace bicb
