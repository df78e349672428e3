#pragma once

// Coordinate bisection for the optimal dual variables (p, q_u, q_l) of a
// budget + CPC-bounded allocation, against an abstract cost/click response.
//
// The response is a nonincreasing step (or smooth) function of p at fixed q.
// The solver first finds P(q): the smallest p with cost <= budget. If the
// resulting CPC violates a bound, it bisects a single signed variable q
// (q > 0 acts as q_u, q < 0 as q_l) on the sign of
//   g_u(q) = cost(P(q),q) - C_u*clicks(P(q),q)   (upper branch), or
//   g_l(q) = cost(P(q),q) - C_l*clicks(P(q),q)   (lower branch),
// which is nonincreasing in q. Returned points always sit on the
// constraint-satisfying side of the final bracket.

#include <functional>
#include <optional>

#include "bicb/core.hpp"

namespace bicb {

struct SolverConfig {
  double big_m = 1e6;        // initial bracket width for p and |q|
  double eps_residual = 0;   // absolute cost tolerance; <= 0 means 1e-6 * budget
  double dual_floor = 1e-9;  // keeps p + q_u - q_l at least this positive
  int max_outer = 64;        // q-level iterations (response probes per level)
  int max_inner = 64;        // response evaluations per q-level probe
};

/// Whole-horizon (cost, clicks) that bidding with `duals` from step
/// `from_step` onward would produce, including anything already accrued.
using ResponseFn = std::function<CostClicks(const DualVars& duals, int from_step)>;

struct SolveResult {
  DualVars duals;          // constraint-satisfying side of the final bracket
  DualVars bracket_duals;  // violating side; decision flips between the two
                           // sides are the boundary impressions
  CostClicks at_solution;  // response at `duals`
  bool degraded = false;         // bracket failure or caps exhausted
  bool infeasible_lower = false; // CPC lower bound unreachable in the
                                 // auction-equivalent region
  int evals = 0;           // response evaluations performed
  double l_p = 0;          // (B - COST)^2 at the solution
  double l_qu = 0;         // (C_u*CLK - COST)^2, 0 when no upper bound
  double l_ql = 0;         // (C_l*CLK - COST)^2, 0 when no lower bound
};

struct Residuals {
  double l_p = 0;
  double l_qu = 0;
  double l_ql = 0;
};

/// Squared residuals of the three complementary-slackness targets at `duals`.
/// Absent bounds contribute 0.
inline Residuals residuals(const ResponseFn& resp, const Campaign& c, const DualVars& duals,
                           int from_step) {
  const CostClicks cc = resp(duals, from_step);
  Residuals r;
  r.l_p = (c.budget - cc.cost) * (c.budget - cc.cost);
  if (c.has_cpc_upper()) {
    const double g = c.cpc_upper * cc.clicks - cc.cost;
    r.l_qu = g * g;
  }
  if (c.has_cpc_lower()) {
    const double g = c.cpc_lower * cc.clicks - cc.cost;
    r.l_ql = g * g;
  }
  return r;
}

namespace detail {

inline DualVars make_duals(double p, double q) {
  return DualVars{p, q > 0 ? q : 0.0, q < 0 ? -q : 0.0};
}

struct BudgetBisect {
  double p_lo = 0;      // over-budget side (equal to p_hi when no crossing)
  double p_hi = 0;      // under-budget side; the value reported as P(q)
  CostClicks at_hi;     // response at (p_hi, q)
  bool clamped = false; // p pinned to the region floor with budget slack
};

/// Finds P(q): 0 (or the region floor for q < 0) if the budget is slack
/// there, else the under-budget side of the cost-B crossing in [floor, M].
/// Uses at most cfg.max_inner response evaluations.
template <typename Eval>
BudgetBisect budget_bisect(Eval&& eval, const Campaign& c, double q, const SolverConfig& cfg) {
  BudgetBisect r;
  const double p_floor = q < 0 ? -q + cfg.dual_floor : 0.0;
  const double eps = cfg.eps_residual > 0 ? cfg.eps_residual : 1e-6 * c.budget;

  CostClicks cc = eval(make_duals(p_floor, q));
  if (cc.cost <= c.budget) {
    r.p_lo = r.p_hi = p_floor;
    r.at_hi = cc;
    r.clamped = q < 0 && cc.cost < c.budget - eps;
    return r;
  }

  double hi = p_floor + cfg.big_m;
  CostClicks cc_hi = eval(make_duals(hi, q));
  if (cc_hi.cost > c.budget)
    throw BracketError("budget bisection: cost still above budget at p = big_m");

  double lo = p_floor;
  for (int i = 0; i < cfg.max_inner - 2; ++i) {
    const double mid = 0.5 * (lo + hi);
    const CostClicks cm = eval(make_duals(mid, q));
    if (cm.cost > c.budget) {
      lo = mid;
    } else {
      hi = mid;
      cc_hi = cm;
    }
  }
  r.p_lo = lo;
  r.p_hi = hi;
  r.at_hi = cc_hi;
  return r;
}

}  // namespace detail

/// P(q): smallest p (floored to the valid region) with cost(p, q) <= budget.
/// `q` is signed: q_u = max(q, 0), q_l = max(-q, 0).
inline double solve_p_given_q(const ResponseFn& resp, const Campaign& c, double q,
                              const SolverConfig& cfg = {}, int from_step = 0) {
  auto eval = [&](const DualVars& d) { return resp(d, from_step); };
  return detail::budget_bisect(eval, c, q, cfg).p_hi;
}

/// Solves the complementary-slackness system for (p, q_u, q_l). A warm start
/// is kept verbatim when it is feasible and produces the same response as a
/// fresh solve, so a converged controller emits stable duals.
inline SolveResult solve(const ResponseFn& resp, const Campaign& c,
                         std::optional<DualVars> warm_start = std::nullopt,
                         const SolverConfig& cfg = {}, int from_step = -1) {
  const int t0 = from_step < 0 ? c.start_step : from_step;
  SolveResult res;
  auto eval = [&](const DualVars& d) {
    ++res.evals;
    return resp(d, t0);
  };
  const double eps = cfg.eps_residual > 0 ? cfg.eps_residual : 1e-6 * c.budget;

  std::optional<CostClicks> warm_cc;
  if (warm_start) warm_cc = eval(*warm_start);

  // Budget level at q = 0, then the CPC check.
  detail::BudgetBisect pr0 = detail::budget_bisect(eval, c, 0.0, cfg);
  const double gu0 = c.has_cpc_upper() ? pr0.at_hi.cost - c.cpc_upper * pr0.at_hi.clicks : 0.0;
  const double gl0 = pr0.at_hi.cost - c.cpc_lower * pr0.at_hi.clicks;
  const bool upper_violated = c.has_cpc_upper() && gu0 > 0;
  const bool lower_violated = c.has_cpc_lower() && pr0.at_hi.clicks > 0 && gl0 < 0;

  if (!upper_violated && !lower_violated) {
    res.duals = detail::make_duals(pr0.p_hi, 0.0);
    res.bracket_duals = detail::make_duals(pr0.p_lo, 0.0);
    res.at_solution = pr0.at_hi;
  } else if (upper_violated) {
    // g_u > 0 at q = 0; find the sign change in [0, big_m].
    auto g_u = [&](const detail::BudgetBisect& pr) {
      return pr.at_hi.cost - c.cpc_upper * pr.at_hi.clicks;
    };
    double q_vio = 0.0;
    detail::BudgetBisect pr_vio = pr0;
    double q_sat = cfg.big_m;
    detail::BudgetBisect pr_sat = detail::budget_bisect(eval, c, q_sat, cfg);
    if (g_u(pr_sat) > 0) {
      res.degraded = true;  // big_m too small to bracket the crossing
      res.duals = detail::make_duals(pr_sat.p_hi, q_sat);
      res.bracket_duals = detail::make_duals(pr_vio.p_lo, q_vio);
      res.at_solution = pr_sat.at_hi;
    } else {
      for (int i = 0; i < cfg.max_outer - 2; ++i) {
        const double qm = 0.5 * (q_vio + q_sat);
        detail::BudgetBisect prm = detail::budget_bisect(eval, c, qm, cfg);
        if (g_u(prm) > 0) {
          q_vio = qm;
          pr_vio = prm;
        } else {
          q_sat = qm;
          pr_sat = prm;
        }
      }
      res.duals = detail::make_duals(pr_sat.p_hi, q_sat);
      res.bracket_duals = detail::make_duals(pr_vio.p_lo, q_vio);
      res.at_solution = pr_sat.at_hi;
    }
  } else {
    // CPC below the lower bound at q = 0; g_l rises as q decreases while p
    // stays off the region floor. Points where the budget went slack at the
    // floor lie outside the auction-equivalent region and never count as
    // violating, so the search is pushed back toward the interior crossing.
    auto g_l = [&](const detail::BudgetBisect& pr) {
      return pr.at_hi.cost - c.cpc_lower * pr.at_hi.clicks;
    };
    auto violating = [&](const detail::BudgetBisect& pr) {
      return g_l(pr) < 0 && !pr.clamped;
    };
    double q_vio = 0.0;
    detail::BudgetBisect pr_vio = pr0;
    double q_sat = -cfg.big_m;
    detail::BudgetBisect pr_sat = detail::budget_bisect(eval, c, q_sat, cfg);
    if (violating(pr_sat)) {
      res.degraded = true;
      res.infeasible_lower = true;
      res.duals = detail::make_duals(pr_sat.p_hi, q_sat);
      res.bracket_duals = detail::make_duals(pr_vio.p_lo, q_vio);
      res.at_solution = pr_sat.at_hi;
    } else {
      for (int i = 0; i < cfg.max_outer - 2; ++i) {
        const double qm = 0.5 * (q_vio + q_sat);
        detail::BudgetBisect prm = detail::budget_bisect(eval, c, qm, cfg);
        if (violating(prm)) {
          q_vio = qm;
          pr_vio = prm;
        } else {
          q_sat = qm;
          pr_sat = prm;
        }
      }
      res.duals = detail::make_duals(pr_sat.p_hi, q_sat);
      res.bracket_duals = detail::make_duals(pr_vio.p_lo, q_vio);
      res.at_solution = pr_sat.at_hi;
      // The satisfying side degenerating to an empty allocation, still
      // violating the bound, or pinned at the region floor with budget
      // slack means the bound is only reachable outside the
      // auction-equivalent region.
      if (res.at_solution.clicks <= 0 || pr_sat.clamped || g_l(pr_sat) < 0)
        res.infeasible_lower = true;
    }
  }

  // A feasible warm start that reproduces the fresh solution's response is
  // kept verbatim (plateau moves would otherwise jitter the duals).
  if (warm_start && !res.degraded && !res.infeasible_lower) {
    const CostClicks w = *warm_cc;
    const double tol = 1e-12 * std::max({1.0, res.at_solution.cost, res.at_solution.clicks});
    const bool feasible =
        w.cost <= c.budget + eps &&
        (!c.has_cpc_upper() || w.cost - c.cpc_upper * w.clicks <= eps) &&
        (!c.has_cpc_lower() || w.clicks <= 0 || c.cpc_lower * w.clicks - w.cost <= eps) &&
        warm_start->denominator() >= 0;
    const bool same_response = std::abs(w.cost - res.at_solution.cost) <= tol &&
                               std::abs(w.clicks - res.at_solution.clicks) <= tol;
    if (feasible && same_response) {
      res.duals = *warm_start;
      res.at_solution = w;
    }
  }

  res.l_p = (c.budget - res.at_solution.cost) * (c.budget - res.at_solution.cost);
  if (c.has_cpc_upper()) {
    const double g = c.cpc_upper * res.at_solution.clicks - res.at_solution.cost;
    res.l_qu = g * g;
  }
  if (c.has_cpc_lower()) {
    const double g = c.cpc_lower * res.at_solution.clicks - res.at_solution.cost;
    res.l_ql = g * g;
  }
  return res;
}

}  // namespace bicb
