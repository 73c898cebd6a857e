#pragma once

#include <cmath>
#include <stdexcept>

#include "reserveopt/chain.hpp"
#include "reserveopt/quadrature.hpp"
#include "reserveopt/types.hpp"

namespace reserveopt {

// F_t(u) = E[S_u | X_t = x] for the exponential OU spot.
inline double forward_price(double t, double x, double u, const MarketModel& mkt) {
  if (u < t) throw std::domain_error("forward_price: maturity before valuation time");
  const double decay = std::exp(-mkt.kappa * (u - t));
  return std::exp(mkt.theta + decay * x +
                  mkt.sigma * mkt.sigma / (4.0 * mkt.kappa) * (1.0 - decay * decay));
}

// Time to extract the recoverable fraction gamma*v at rate alpha e^{-beta s}.
inline double depletion_time(double v, const ExtractionPlan& plan) {
  if (v < 0.0) throw std::domain_error("depletion_time: negative volume");
  if (v == 0.0) return 0.0;
  if (!(plan.alpha > 0.0))
    throw std::domain_error("depletion_time: zero extraction rate with positive volume");
  if (plan.beta == 0.0) return plan.gamma * v / plan.alpha;
  const double arg = 1.0 - plan.beta * plan.gamma * v / plan.alpha;
  if (arg <= 0.0)
    throw std::domain_error(
        "depletion_time: infeasible volume, extraction decays to zero before depletion");
  return -std::log(arg) / plan.beta;
}

inline double investment_cost(int regime, const CostModel& costs, const TechnicalModel& tech) {
  if (regime < 0 || regime >= tech.size())
    throw std::out_of_range("investment_cost: regime index out of range");
  return costs.c0 + costs.c1 * tech.volumes[regime];
}

/// Law of the eventual reserve state given the state at t: exp(H_t A) with
// H_t = (a/b) e^{-bt}. For b = 0 (no learning) H_t diverges and the limit is
// rank-one with rows equal to the invariant law of A; a = 0 freezes the chain.
inline Eigen::MatrixXd limit_transition(double t, const TechnicalModel& tech,
                                        const ChainPropagator& prop) {
  if (t < 0.0) throw std::domain_error("limit_transition: negative time");
  if (tech.learn_a == 0.0) return Eigen::MatrixXd::Identity(tech.size(), tech.size());
  if (tech.learn_b == 0.0) return prop.limit();
  return prop.exp(tech.learn_a / tech.learn_b * std::exp(-tech.learn_b * t));
}

inline Eigen::MatrixXd limit_transition(double t, const TechnicalModel& tech) {
  return limit_transition(t, tech, ChainPropagator(tech.generator));
}

// Discounted cash flow of extracting a known volume v, seen from the decision
// time (x is the log-price deviation there):
//   int_{eps}^{eps+Delta(v)} e^{-rho s} (F(s) - c) g(s) ds,  g(s) = alpha e^{-beta(s-eps)}.
inline double extraction_value(double x, double v, const MarketModel& mkt,
                               const ExtractionPlan& plan, const GaussLegendre& quad) {
  if (plan.alpha == 0.0 || v <= 0.0) return 0.0;
  const double delta = depletion_time(v, plan);
  return quad.integrate(
      [&](double s) {
        const double g = plan.alpha * std::exp(-plan.beta * (s - plan.epsilon));
        return std::exp(-mkt.rho * s) * (forward_price(0.0, x, s, mkt) - plan.c) * g;
      },
      plan.epsilon, plan.epsilon + delta);
}

// Expected discounted reserve value p^{(j)}(t, x): extraction cash flows mixed
// over the eventual-volume law from regime j at time t.
inline double reserve_value(double t, double x, int regime, const MarketModel& mkt,
                            const ExtractionPlan& plan, const TechnicalModel& tech,
                            const GridSpec& grid) {
  if (regime < 0 || regime >= tech.size())
    throw std::out_of_range("reserve_value: regime index out of range");
  if (plan.alpha == 0.0) return 0.0;
  plan.check_feasible(tech.volumes[tech.size() - 1]);
  const GaussLegendre quad(grid.quadrature_points);
  const ChainPropagator prop(tech.generator);
  const Eigen::MatrixXd w = limit_transition(t, tech, prop);
  double acc = 0.0;
  for (int j = 0; j < tech.size(); ++j)
    acc += w(regime, j) * extraction_value(x, tech.volumes[j], mkt, plan, quad);
  return acc;
}

}  // namespace reserveopt
