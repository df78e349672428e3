#pragma once

// Remaining-horizon cost/click estimation as a function of the duals. The
// oracle variant replays the true future traffic (perfect prediction); the
// default trained model is an empirical-replay estimator that applies the
// decision rule to stored historical traffic per bucket. Both are
// nonincreasing in p by construction.

#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "bicb/allocator.hpp"
#include "bicb/csv.hpp"
#include "bicb/dual_solver.hpp"

namespace bicb {

/// Minimal campaign descriptor available to prediction models. The exact
/// feature set is an extension point; built-in models replay history and do
/// not condition on it.
struct CampaignFeatures {
  std::string category;
  int budget_band = 0;        // order of magnitude of the budget
  double elapsed_fraction = 0;
};

inline CampaignFeatures features_of(const Campaign& c, int step) {
  CampaignFeatures f;
  f.category = c.id;
  f.budget_band = c.budget > 0 ? static_cast<int>(std::floor(std::log10(c.budget))) : 0;
  f.elapsed_fraction =
      std::clamp(static_cast<double>(step - c.start_step) / c.num_steps(), 0.0, 1.0);
  return f;
}

class PredictorModel {
 public:
  virtual ~PredictorModel() = default;

  /// Expected (cost, clicks) of bidding bucket `step` with `duals`.
  virtual CostClicks predict_bucket(const Campaign& c, int step, const DualVars& duals) const = 0;

  virtual std::string describe() const = 0;
};

/// Perfect prediction: replays the true future bucket under the duals.
class OraclePredictor final : public PredictorModel {
 public:
  explicit OraclePredictor(std::shared_ptr<const TrafficSlice> future)
      : future_(std::move(future)) {}

  CostClicks predict_bucket(const Campaign& c, int step, const DualVars& duals) const override {
    detail::require_replayable(duals);
    const BidParams params = effective_bid_params(duals, c);
    const AccumStats acc =
        replay_params(future_->bucket(step), params, c.budget, ReplayMode::Unconstrained);
    return CostClicks{acc.cost, acc.clicks};
  }

  std::string describe() const override { return "oracle"; }

 private:
  std::shared_ptr<const TrafficSlice> future_;
};

/// Empirical-replay estimator: the prediction for a bucket is the calibrated
/// mean of replaying that bucket of each historical period under the duals.
class EmpiricalPredictor final : public PredictorModel {
 public:
  EmpiricalPredictor(std::vector<std::shared_ptr<const TrafficSlice>> history, double calibration)
      : history_(std::move(history)), calibration_(calibration) {
    if (history_.empty()) throw ConfigError("empirical predictor needs at least one period");
  }

  CostClicks predict_bucket(const Campaign& c, int step, const DualVars& duals) const override {
    detail::require_replayable(duals);
    const BidParams params = effective_bid_params(duals, c);
    CostClicks sum;
    for (const auto& period : history_) {
      const AccumStats acc =
          replay_params(period->bucket(step), params, c.budget, ReplayMode::Unconstrained);
      sum.cost += acc.cost;
      sum.clicks += acc.clicks;
    }
    const double scale = calibration_ / static_cast<double>(history_.size());
    return CostClicks{sum.cost * scale, sum.clicks * scale};
  }

  double calibration() const { return calibration_; }

  std::string describe() const override {
    return "empirical(" + std::to_string(history_.size()) + " periods, calibration " +
           csv::fmt(calibration_) + ")";
  }

 private:
  std::vector<std::shared_ptr<const TrafficSlice>> history_;
  double calibration_ = 1.0;
};

inline std::shared_ptr<const PredictorModel> oracle_predictor(TrafficSlice future) {
  return std::make_shared<OraclePredictor>(std::make_shared<const TrafficSlice>(std::move(future)));
}

inline std::shared_ptr<const PredictorModel> oracle_predictor(
    std::shared_ptr<const TrafficSlice> future) {
  return std::make_shared<OraclePredictor>(std::move(future));
}

inline std::shared_ptr<const PredictorModel> train_empirical(
    std::vector<std::shared_ptr<const TrafficSlice>> history, double calibration = 1.0) {
  return std::make_shared<EmpiricalPredictor>(std::move(history), calibration);
}

inline std::shared_ptr<const PredictorModel> train_empirical(std::vector<TrafficSlice> history,
                                                             double calibration = 1.0) {
  std::vector<std::shared_ptr<const TrafficSlice>> shared;
  shared.reserve(history.size());
  for (auto& h : history) shared.push_back(std::make_shared<const TrafficSlice>(std::move(h)));
  return train_empirical(std::move(shared), calibration);
}

/// Whole-horizon totals from `t0` on: accrued state plus the predicted
/// future buckets.
inline CostClicks predict_remaining(const PredictorModel& model, const Campaign& c, int t0,
                                    const DualVars& duals, const AccumStats& acc) {
  CostClicks total{acc.cost, acc.clicks};
  for (int t = std::max(t0, c.start_step); t <= c.end_step; ++t) {
    const CostClicks b = model.predict_bucket(c, t, duals);
    total.cost += b.cost;
    total.clicks += b.clicks;
  }
  return total;
}

/// Response function for the dual solver backed by a prediction model.
inline ResponseFn make_predicted_response(std::shared_ptr<const PredictorModel> model,
                                          const Campaign& c, AccumStats acc) {
  return [model = std::move(model), c, acc](const DualVars& duals, int from_step) {
    return predict_remaining(*model, c, from_step, duals, acc);
  };
}

// ---------------------------------------------------------------------------
// Control logs
// ---------------------------------------------------------------------------

/// One row of the control loop's delivery log: the duals in effect during a
/// bucket and what that bucket actually produced.
struct ControlLogRecord {
  std::string campaign_id;
  int step = 0;
  DualVars duals;
  double cost = 0;
  double clicks = 0;
};

inline constexpr const char* kControlLogHeader = "campaign_id,step,p,q_u,q_l,cost,clicks";

inline void write_control_log(std::ostream& out, const std::vector<ControlLogRecord>& records) {
  out << kControlLogHeader << "\n";
  for (const auto& r : records) {
    out << r.campaign_id << ',' << r.step << ',' << csv::fmt(r.duals.p) << ','
        << csv::fmt(r.duals.q_u) << ',' << csv::fmt(r.duals.q_l) << ',' << csv::fmt(r.cost) << ','
        << csv::fmt(r.clicks) << "\n";
  }
}

inline std::vector<ControlLogRecord> read_control_log(const std::string& path) {
  auto in = csv::open_input(path);
  csv::expect_header(in, kControlLogHeader, path);
  std::vector<ControlLogRecord> out;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (fields.size() != 7) throw ParseError(ctx + ": expected 7 fields");
    ControlLogRecord r;
    r.campaign_id = std::string(fields[0]);
    r.step = csv::parse_int(fields[1], ctx);
    r.duals.p = csv::parse_double(fields[2], ctx);
    r.duals.q_u = csv::parse_double(fields[3], ctx);
    r.duals.q_l = csv::parse_double(fields[4], ctx);
    r.cost = csv::parse_double(fields[5], ctx);
    r.clicks = csv::parse_double(fields[6], ctx);
    if (r.cost < 0 || r.clicks < 0) throw ParseError(ctx + ": negative realized values");
    out.push_back(std::move(r));
  }
  return out;
}

/// Validated, per-campaign grouped training data.
struct TrainingDataset {
  std::map<std::string, std::vector<ControlLogRecord>> by_campaign;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, v] : by_campaign) n += v.size();
    return n;
  }
};

/// Groups and validates raw log records. Exact duplicate rows are dropped;
/// two different records for the same (campaign, step) are an error.
inline TrainingDataset ingest_logs(const std::vector<ControlLogRecord>& records) {
  TrainingDataset ds;
  for (const auto& r : records) {
    auto& rows = ds.by_campaign[r.campaign_id];
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const ControlLogRecord& e) { return e.step == r.step; });
    if (it != rows.end()) {
      const bool identical = it->duals.p == r.duals.p && it->duals.q_u == r.duals.q_u &&
                             it->duals.q_l == r.duals.q_l && it->cost == r.cost &&
                             it->clicks == r.clicks;
      if (identical) continue;
      throw ConfigError("conflicting log records for campaign " + r.campaign_id + " step " +
                        std::to_string(r.step));
    }
    rows.push_back(r);
  }
  for (auto& [_, rows] : ds.by_campaign)
    std::sort(rows.begin(), rows.end(),
              [](const ControlLogRecord& a, const ControlLogRecord& b) { return a.step < b.step; });
  return ds;
}

/// Volume-drift calibration from logs: ratio of realized to predicted cost
/// at the logged duals, aggregated over the dataset. Returns 1 when the
/// model predicts no spend at all.
inline double estimate_calibration(const TrainingDataset& ds, const PredictorModel& model,
                                   const std::map<std::string, Campaign>& campaigns) {
  double realized = 0, predicted = 0;
  for (const auto& [id, rows] : ds.by_campaign) {
    const auto it = campaigns.find(id);
    if (it == campaigns.end()) throw ConfigError("no campaign definition for log id " + id);
    for (const auto& r : rows) {
      realized += r.cost;
      predicted += model.predict_bucket(it->second, r.step, r.duals).cost;
    }
  }
  return predicted > 0 ? realized / predicted : 1.0;
}

}  // namespace bicb
