#pragma once

// Evaluation metrics: budget achievement rate, distance to the fractional
// optimum, constraint violation ratio, and the penalty-adjusted G score.

#include <cmath>
#include <string>
#include <vector>

#include "bicb/episode.hpp"
#include "bicb/lp_oracle.hpp"

namespace bicb {

struct CampaignMetrics {
  std::string id;
  double revenue = 0;
  double cost = 0;
  double budget = 0;
  double cpc = 0;
  double r_star = 0;
  bool violated_upper = false;
  bool violated_lower = false;
  double penalty = 0;
};

struct MetricsReport {
  double revenue = 0;
  double cost = 0;
  double br = 0;            // total cost / total budget
  double r_over_rstar = 0;  // total revenue / total optimal revenue
  double ocr = 0;           // fraction of campaigns violating a CPC bound
  double g = 0;             // min(R/R*, 1) - sum of violation penalties
  std::vector<CampaignMetrics> per_campaign;
};

/// Aggregates per-campaign episode outcomes against their fractional-optimum
/// references. A campaign with zero clicks satisfies both CPC bounds.
/// Violation penalties are lambda^exr - 1 with exr = max(0, CPC/C_u - 1) for
/// the upper bound and max(0, C_l/CPC - 1) for the lower bound.
inline MetricsReport compute_metrics(const std::vector<EpisodeResult>& results,
                                     const std::vector<LpSolution>& lp_refs,
                                     double lambda = 100.0) {
  if (results.size() != lp_refs.size())
    throw ConfigError("compute_metrics: results and references must align");
  MetricsReport rep;
  double total_budget = 0, total_rstar = 0, total_penalty = 0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const EpisodeResult& r = results[i];
    CampaignMetrics m;
    m.id = r.campaign.id;
    m.revenue = r.final_stats.value;
    m.cost = r.final_stats.cost;
    m.budget = r.campaign.budget;
    m.cpc = effective_cpc(r.final_stats);
    m.r_star = lp_refs[i].value;
    if (r.final_stats.clicks > 0) {
      if (r.campaign.has_cpc_upper() && m.cpc > r.campaign.cpc_upper) {
        m.violated_upper = true;
        m.penalty += std::pow(lambda, m.cpc / r.campaign.cpc_upper - 1.0) - 1.0;
      }
      if (r.campaign.has_cpc_lower() && m.cpc < r.campaign.cpc_lower) {
        m.violated_lower = true;
        m.penalty += std::pow(lambda, r.campaign.cpc_lower / m.cpc - 1.0) - 1.0;
      }
    }
    if (m.violated_upper || m.violated_lower) ++violations;
    rep.revenue += m.revenue;
    rep.cost += m.cost;
    total_budget += m.budget;
    total_rstar += m.r_star;
    total_penalty += m.penalty;
    rep.per_campaign.push_back(std::move(m));
  }
  rep.br = total_budget > 0 ? rep.cost / total_budget : 0.0;
  rep.r_over_rstar = total_rstar > 0 ? rep.revenue / total_rstar : 1.0;
  rep.ocr = results.empty() ? 0.0
                            : static_cast<double>(violations) / static_cast<double>(results.size());
  rep.g = std::min(rep.r_over_rstar, 1.0) - total_penalty;
  return rep;
}

}  // namespace bicb
