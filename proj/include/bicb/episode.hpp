#pragma once

// Episode execution: one campaign, one controller, one pass over a traffic
// slice. The controller ticks at every step boundary with the stats accrued
// so far, then the step's impressions are replayed under the emitted
// parameters with a hard budget stop.

#include <optional>
#include <string>
#include <vector>

#include "bicb/allocator.hpp"
#include "bicb/controllers.hpp"

namespace bicb {

struct TickLog {
  int step = 0;
  std::optional<DualVars> duals;
  BidParams params;
  AccumStats delta;  // delivery of this step alone
};

struct EpisodeResult {
  std::string method;
  Campaign campaign;
  std::vector<TickLog> ticks;
  AccumStats final_stats;
  bool degraded = false;
  bool infeasible_lower = false;
};

inline EpisodeResult run_episode(const Campaign& c, Controller& controller,
                                 const TrafficSlice& slice) {
  if (c.start_step < slice.start_step || c.end_step > slice.end_step)
    throw ConfigError("campaign schedule outside the slice step range");
  EpisodeResult res;
  res.campaign = c;
  AccumStats acc;
  for (int step = c.start_step; step <= c.end_step; ++step) {
    const BidParams params = controller.on_tick(c, step, acc);
    if (!std::isfinite(params.alpha) || !std::isfinite(params.beta))
      throw Error("controller emitted non-finite bid parameters");
    const AccumStats delta =
        replay_params(slice.bucket(step), params, c.budget, ReplayMode::HardBudgetStop, acc);
    res.ticks.push_back(TickLog{step, controller.last_duals(), params, delta});
    acc += delta;
  }
  res.final_stats = acc;
  res.degraded = controller.degraded();
  res.infeasible_lower = controller.infeasible_lower();
  return res;
}

}  // namespace bicb
