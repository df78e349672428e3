#pragma once

// Synthetic impression streams with a controllable positive correlation
// between price and value, built so that the high-value traffic prefix that
// exhausts the budget carries a CPC above any reasonable lower bound.

#include <cstdint>
#include <random>

#include "bicb/allocator.hpp"

namespace bicb {

namespace rng {

/// splitmix64; used to derive independent stream seeds.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;  // [0, 1)
}

/// Box-Muller; consumes exactly two draws per call, keeping generation
/// independent of library distribution internals.
inline double normal(std::mt19937_64& g) {
  const double u1 = std::max(uniform(g), 0x1.0p-53);
  const double u2 = uniform(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace rng

struct SynthConfig {
  std::size_t n_impressions = 10000;
  int n_steps = 48;
  std::uint64_t seed = 0;

  // Latent quality u ~ U(0,1) drives both price and value.
  double price_base = 0.2;
  double price_slope = 2.0;
  double price_noise = 0.25;
  double wp_floor = 0.05;
  double value_slope = 0.9;
  double value_noise = 0.1;
  double obj_cap = 1.0;
  double pctr_min = 0.05;

  std::vector<double> volume_profile;  // relative per-step volume; empty = uniform
};

/// Deterministic for a fixed config. Impressions are emitted sorted by step.
inline TrafficSlice synth_generate(const SynthConfig& cfg) {
  TrafficSlice slice;
  slice.start_step = 0;
  slice.end_step = cfg.n_steps - 1;
  slice.impressions.reserve(cfg.n_impressions);

  // Per-step counts by largest remainder, so totals match exactly.
  std::vector<double> weights = cfg.volume_profile;
  weights.resize(static_cast<std::size_t>(cfg.n_steps),
                 cfg.volume_profile.empty() ? 1.0 : 0.0);
  double wsum = 0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0)) throw ConfigError("volume profile must have positive total weight");
  std::vector<std::size_t> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    const double exact = static_cast<double>(cfg.n_impressions) * weights[t] / wsum;
    counts[t] = static_cast<std::size_t>(exact);
    assigned += counts[t];
    remainders.emplace_back(exact - static_cast<double>(counts[t]), t);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < cfg.n_impressions; ++i, ++assigned)
    ++counts[remainders[i % remainders.size()].second];

  std::mt19937_64 gen(rng::mix(cfg.seed));
  for (std::size_t t = 0; t < counts.size(); ++t) {
    for (std::size_t i = 0; i < counts[t]; ++i) {
      const double u = rng::uniform(gen);
      const double nw = rng::normal(gen);
      const double nv = rng::normal(gen);
      const double up = rng::uniform(gen);
      Impression imp;
      imp.step = static_cast<int>(t);
      imp.wp = std::max(cfg.wp_floor, cfg.price_base + cfg.price_slope * u + cfg.price_noise * nw);
      imp.obj = std::clamp(cfg.value_slope * u + cfg.value_noise * nv, 0.0, cfg.obj_cap);
      imp.pctr = cfg.pctr_min + (1.0 - cfg.pctr_min) * up * up;
      slice.impressions.push_back(imp);
    }
  }
  return slice;
}

namespace detail {

/// CPC of the budget-limited prefix when impressions are taken best-first by
/// `better`. Used to place campaign CPC bounds at achievable landmarks.
template <typename Better>
inline double prefix_cpc(const TrafficSlice& slice, double budget, Better&& better) {
  std::vector<std::size_t> order(slice.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), better);
  double cost = 0, clicks = 0;
  for (std::size_t idx : order) {
    const Impression& imp = slice.impressions[idx];
    if (cost + imp.expected_cost() > budget) break;
    cost += imp.expected_cost();
    clicks += imp.expected_clicks();
  }
  return clicks > 0 ? cost / clicks : 0.0;
}

}  // namespace detail

/// Checks that the highest-value traffic prefix whose cost reaches the budget
/// has a CPC above the campaign's lower bound (ties broken toward higher
/// index, matching the solver's tie-breaking). When total traffic cost is
/// below the budget the whole slice is the prefix.
inline bool assumption1_check(const TrafficSlice& slice, const Campaign& c) {
  double total_cost = 0, total_clicks = 0;
  for (const auto& imp : slice.impressions) {
    total_cost += imp.expected_cost();
    total_clicks += imp.expected_clicks();
  }
  if (total_cost <= c.budget)
    return total_clicks > 0 && total_cost / total_clicks > c.cpc_lower;

  std::vector<std::size_t> order(slice.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double oa = slice.impressions[a].obj, ob = slice.impressions[b].obj;
    return oa != ob ? oa > ob : a > b;
  });
  double cost = 0, clicks = 0;
  for (std::size_t idx : order) {
    const Impression& imp = slice.impressions[idx];
    if (cost + imp.expected_cost() > c.budget) break;
    cost += imp.expected_cost();
    clicks += imp.expected_clicks();
  }
  return clicks > 0 && cost / clicks > c.cpc_lower;
}

}  // namespace bicb
