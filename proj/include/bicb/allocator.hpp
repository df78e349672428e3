#pragma once

// Deterministic replay of a traffic slice under a fixed policy. Produces the
// discrete cost/click response functions that the dual solver searches over.

#include <algorithm>
#include <span>
#include <vector>

#include "bicb/core.hpp"

namespace bicb {

/// An ordered list of impressions covering an inclusive step range.
/// Impressions must be sorted by step (stable within a step).
struct TrafficSlice {
  std::vector<Impression> impressions;
  int start_step = 0;
  int end_step = 47;

  bool empty() const { return impressions.empty(); }
  std::size_t size() const { return impressions.size(); }

  /// Contiguous view of the impressions in one step bucket.
  std::span<const Impression> bucket(int step) const {
    auto lo = std::lower_bound(impressions.begin(), impressions.end(), step,
                               [](const Impression& i, int s) { return i.step < s; });
    auto hi = std::upper_bound(impressions.begin(), impressions.end(), step,
                               [](int s, const Impression& i) { return s < i.step; });
    return {&*lo, static_cast<std::size_t>(hi - lo)};
  }
};

inline void validate_slice(const TrafficSlice& s) {
  int prev = s.start_step;
  for (const auto& imp : s.impressions) {
    if (imp.step < prev) throw ConfigError("slice impressions not sorted by step");
    if (imp.step < s.start_step || imp.step > s.end_step)
      throw ConfigError("impression step outside slice range");
    if (!(imp.pctr >= 0 && imp.pctr <= 1)) throw ConfigError("pctr outside [0,1]");
    if (!(imp.wp > 0)) throw ConfigError("wp must be > 0");
    if (!(imp.obj >= 0)) throw ConfigError("obj must be >= 0");
    prev = imp.step;
  }
}

enum class ReplayMode {
  Unconstrained,   // ignore the budget; constraints live in the duals
  HardBudgetStop,  // skip any impression the remaining budget cannot cover
};

/// Replays `imps` under a linear bid rule. `budget` only matters in
/// HardBudgetStop mode; an unaffordable impression is skipped but scanning
/// continues, since later cheaper impressions may still fit.
inline AccumStats replay_params(std::span<const Impression> imps, const BidParams& params,
                                double budget, ReplayMode mode,
                                const AccumStats& carry = {}) {
  AccumStats acc;
  double spent = carry.cost;
  for (const auto& imp : imps) {
    ++acc.seen;
    if (!(params.bid(imp.obj) > imp.wp)) continue;
    if (mode == ReplayMode::HardBudgetStop && spent + imp.expected_cost() > budget) continue;
    acc.add_win(imp);
    spent += imp.expected_cost();
  }
  return acc;
}

namespace detail {
inline void require_replayable(const DualVars& d) {
  if (d.denominator() < 0)
    throw DegenerateDualsError("p + q_u - q_l must be nonnegative for replay (got " +
                               std::to_string(d.denominator()) + ")");
}
}  // namespace detail

/// Replays a whole slice under fixed duals. The win rule is the dual
/// threshold; the denominator may be exactly 0 (the win-everything limit)
/// but a negative denominator is rejected.
inline AccumStats replay(const TrafficSlice& slice, const DualVars& duals,
                         const Campaign& c, ReplayMode mode) {
  detail::require_replayable(duals);
  const BidParams params = effective_bid_params(duals, c);
  return replay_params(slice.impressions, params, c.budget, mode);
}

/// Per-step deltas of an unconstrained replay; one entry per step of the
/// slice range, summing to replay(slice, ..., Unconstrained).
inline std::vector<AccumStats> replay_per_step(const TrafficSlice& slice,
                                               const DualVars& duals, const Campaign& c) {
  detail::require_replayable(duals);
  const BidParams params = effective_bid_params(duals, c);
  std::vector<AccumStats> out(static_cast<std::size_t>(slice.end_step - slice.start_step + 1));
  for (int t = slice.start_step; t <= slice.end_step; ++t)
    out[static_cast<std::size_t>(t - slice.start_step)] =
        replay_params(slice.bucket(t), params, c.budget, ReplayMode::Unconstrained);
  return out;
}

/// Indices of the impressions a fixed-duals unconstrained replay would win.
inline std::vector<std::uint8_t> won_set(const TrafficSlice& slice, const DualVars& duals,
                                         const Campaign& c) {
  detail::require_replayable(duals);
  const BidParams params = effective_bid_params(duals, c);
  std::vector<std::uint8_t> won(slice.size(), 0);
  for (std::size_t i = 0; i < slice.size(); ++i)
    won[i] = params.bid(slice.impressions[i].obj) > slice.impressions[i].wp ? 1 : 0;
  return won;
}

/// Concatenates slices that cover adjacent step ranges.
inline TrafficSlice concat(const TrafficSlice& a, const TrafficSlice& b) {
  TrafficSlice out;
  out.start_step = std::min(a.start_step, b.start_step);
  out.end_step = std::max(a.end_step, b.end_step);
  out.impressions.reserve(a.size() + b.size());
  out.impressions.insert(out.impressions.end(), a.impressions.begin(), a.impressions.end());
  out.impressions.insert(out.impressions.end(), b.impressions.begin(), b.impressions.end());
  std::stable_sort(out.impressions.begin(), out.impressions.end(),
                   [](const Impression& x, const Impression& y) { return x.step < y.step; });
  return out;
}

}  // namespace bicb
