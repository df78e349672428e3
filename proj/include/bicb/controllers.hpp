#pragma once

// Per-campaign online policies. Each controller maps the delivery state at a
// control tick to the linear bid parameters used for the next step.

#include <deque>
#include <memory>
#include <optional>

#include "bicb/dual_solver.hpp"
#include "bicb/lp_oracle.hpp"
#include "bicb/predictor.hpp"

namespace bicb {

class Controller {
 public:
  virtual ~Controller() = default;

  /// Called once at the start of each step with the stats accrued so far.
  virtual BidParams on_tick(const Campaign& c, int step, const AccumStats& acc) = 0;

  /// Duals behind the last emitted params, when the policy has any.
  virtual std::optional<DualVars> last_duals() const { return std::nullopt; }

  virtual bool degraded() const { return false; }
  virtual bool infeasible_lower() const { return false; }
};

// ---------------------------------------------------------------------------
// Dual-resolving controller
// ---------------------------------------------------------------------------

/// Re-solves the duals at every tick against the predicted remaining horizon,
/// warm-started from the previous tick. On solver degradation or an
/// unreachable lower bound, the last good parameters are frozen.
class BicbController final : public Controller {
 public:
  BicbController(std::shared_ptr<const PredictorModel> model, SolverConfig cfg = {})
      : model_(std::move(model)), cfg_(cfg) {}

  BidParams on_tick(const Campaign& c, int step, const AccumStats& acc) override {
    const ResponseFn resp = make_predicted_response(model_, c, acc);
    const SolveResult sr = solve(resp, c, prev_duals_, cfg_, step);
    degraded_ |= sr.degraded;
    infeasible_ |= sr.infeasible_lower;
    if ((sr.degraded || sr.infeasible_lower) && prev_params_) return *prev_params_;
    prev_duals_ = sr.duals;
    prev_params_ = effective_bid_params(sr.duals, c, cfg_.dual_floor);
    return *prev_params_;
  }

  std::optional<DualVars> last_duals() const override { return prev_duals_; }
  bool degraded() const override { return degraded_; }
  bool infeasible_lower() const override { return infeasible_; }

 private:
  std::shared_ptr<const PredictorModel> model_;
  SolverConfig cfg_;
  std::optional<DualVars> prev_duals_;
  std::optional<BidParams> prev_params_;
  bool degraded_ = false;
  bool infeasible_ = false;
};

// ---------------------------------------------------------------------------
// Local PID controller
// ---------------------------------------------------------------------------

struct PidConfig {
  double kp = 0.6;
  double ki = 0.05;
  double kd = 0.0;
  int window = 3;            // steps of delivery history for the CPC loop
  double alpha_init = 1.0;
  double alpha_min = 1e-6;
  double alpha_max = 1e6;
  double update_clamp = 0.5;   // cap on the per-tick multiplicative change
  double integral_clamp = 10;  // anti-windup bound on the accumulated error
  std::vector<double> reference;  // per-step spend fractions; empty = uniform
};

/// Pacing + CPC feedback acting multiplicatively on alpha, beta fixed at 0.
/// The pacing error compares cumulative spend against a reference schedule;
/// the CPC error activates only while the windowed CPC violates a bound.
class PidController final : public Controller {
 public:
  explicit PidController(PidConfig cfg = {}) : cfg_(cfg), alpha_(cfg.alpha_init) {
    if (cfg_.window < 1) throw ConfigError("pid window must be >= 1");
  }

  BidParams on_tick(const Campaign& c, int step, const AccumStats& acc) override {
    // Delivery of the most recent step, for the windowed CPC.
    AccumStats delta = acc;
    delta.cost -= prev_acc_.cost;
    delta.clicks -= prev_acc_.clicks;
    prev_acc_ = acc;
    if (step > c.start_step) {
      window_.push_back(CostClicks{delta.cost, delta.clicks});
      while (window_.size() > static_cast<std::size_t>(cfg_.window)) window_.pop_front();
    }

    const double ref = reference_spend(c, step);
    double err = (ref - acc.cost) / c.budget;

    double wcost = 0, wclicks = 0;
    for (const auto& d : window_) {
      wcost += d.cost;
      wclicks += d.clicks;
    }
    if (wclicks > 0) {
      const double wcpc = wcost / wclicks;
      if (c.has_cpc_upper() && wcpc > c.cpc_upper) err += (c.cpc_upper - wcpc) / c.cpc_upper;
      if (c.has_cpc_lower() && wcpc < c.cpc_lower) err += (c.cpc_lower - wcpc) / c.cpc_lower;
    }

    integral_ = std::clamp(integral_ + err, -cfg_.integral_clamp, cfg_.integral_clamp);
    const double update = cfg_.kp * err + cfg_.ki * integral_ + cfg_.kd * (err - prev_err_);
    prev_err_ = err;
    alpha_ *= 1.0 + std::clamp(update, -cfg_.update_clamp, cfg_.update_clamp);
    alpha_ = std::clamp(alpha_, cfg_.alpha_min, cfg_.alpha_max);
    return BidParams{alpha_, 0.0};
  }

 private:
  double reference_spend(const Campaign& c, int step) const {
    const int elapsed = step - c.start_step;  // steps fully delivered before this tick
    if (cfg_.reference.empty())
      return c.budget * static_cast<double>(elapsed) / c.num_steps();
    double frac = 0;
    for (int t = 0; t < elapsed && t < static_cast<int>(cfg_.reference.size()); ++t)
      frac += cfg_.reference[static_cast<std::size_t>(t)];
    return c.budget * frac;
  }

  PidConfig cfg_;
  double alpha_;
  double integral_ = 0;
  double prev_err_ = 0;
  AccumStats prev_acc_;
  std::deque<CostClicks> window_;
};

// ---------------------------------------------------------------------------
// Static policies
// ---------------------------------------------------------------------------

/// Duals solved once on historical traffic, emitted unchanged every tick.
class OnlineLpController final : public Controller {
 public:
  OnlineLpController(const TrafficSlice& history, const Campaign& c, SolverConfig cfg = {}) {
    if (history.empty()) throw ConfigError("online LP controller needs nonempty history");
    const LpSolution ref = lp_optimal(history, c, cfg);
    duals_ = ref.duals;
    params_ = effective_bid_params(duals_, c, cfg.dual_floor);
    infeasible_ = ref.infeasible_lower;
  }

  BidParams on_tick(const Campaign&, int, const AccumStats&) override { return params_; }
  std::optional<DualVars> last_duals() const override { return duals_; }
  bool infeasible_lower() const override { return infeasible_; }

 private:
  DualVars duals_;
  BidParams params_;
  bool infeasible_ = false;
};

/// Fixed advertiser bid: alpha = 0, beta = bid.
class ManualController final : public Controller {
 public:
  explicit ManualController(double bid) : params_{0.0, bid} {
    if (!(bid > 0) || !std::isfinite(bid))
      throw ConfigError("manual bid must be positive and finite");
  }

  BidParams on_tick(const Campaign&, int, const AccumStats&) override { return params_; }

 private:
  BidParams params_;
};

// Factory helpers.

inline std::unique_ptr<Controller> bicb_controller(std::shared_ptr<const PredictorModel> model,
                                                   SolverConfig cfg = {}) {
  return std::make_unique<BicbController>(std::move(model), cfg);
}

inline std::unique_ptr<Controller> pid_controller(PidConfig cfg = {}) {
  return std::make_unique<PidController>(cfg);
}

inline std::unique_ptr<Controller> online_lp_controller(const TrafficSlice& history,
                                                        const Campaign& c, SolverConfig cfg = {}) {
  return std::make_unique<OnlineLpController>(history, c, cfg);
}

inline std::unique_ptr<Controller> manual_controller(double bid) {
  return std::make_unique<ManualController>(bid);
}

}  // namespace bicb
