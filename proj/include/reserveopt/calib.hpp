#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "reserveopt/chain.hpp"
#include "reserveopt/model.hpp"
#include "reserveopt/types.hpp"

namespace reserveopt {

// Equally spaced volume states over mu +/- n_sigmas * sigma0, mid-state = mu exactly.
inline Eigen::VectorXd build_state_grid(const PriorSpec& prior) {
  prior.validate();
  const int half = (prior.m - 1) / 2;
  const double step = prior.n_sigmas * std::sqrt(prior.sigma0_sq) / half;
  Eigen::VectorXd v(prior.m);
  for (int k = 0; k < prior.m; ++k) v[k] = prior.mu + (k - half) * step;
  if (!(v[0] > 0.0)) throw std::domain_error("build_state_grid: lowest volume not positive");
  return v;
}

// Normal prior mass per state from CDF differences at midpoints; the outer
// midpoints are linearly extrapolated, then the vector is renormalized
// (the three edge/interior formulas do not sum to one exactly).
inline Eigen::VectorXd discretized_prior(const PriorSpec& prior, const Eigen::VectorXd& volumes) {
  const int m = static_cast<int>(volumes.size());
  if (m < 2) throw std::invalid_argument("discretized_prior: need at least two states");
  const double s0 = std::sqrt(prior.sigma0_sq);
  auto cdf = [&](double v) { return 0.5 * std::erfc(-(v - prior.mu) / (s0 * std::sqrt(2.0))); };
  Eigen::VectorXd p(m);
  for (int k = 0; k < m; ++k) {
    const double lo = (k == 0) ? volumes[0] - 0.5 * (volumes[1] - volumes[0])
                               : 0.5 * (volumes[k - 1] + volumes[k]);
    const double hi = (k == m - 1) ? volumes[m - 1] + 0.5 * (volumes[m - 1] - volumes[m - 2])
                                   : 0.5 * (volumes[k] + volumes[k + 1]);
    p[k] = cdf(hi) - cdf(lo);
  }
  return p / p.sum();
}

// Tridiagonal generator with rate lambda_{min(k, m-1-k)+1} on row k (0-based):
// edge rows (-l1, l1), interior rows (l, -2l, l), mirrored across the mid-state.
inline Eigen::MatrixXd build_generator(const LambdaVector& lam, int m) {
  if (m < 1 || m % 2 == 0) throw std::invalid_argument("build_generator: m must be odd");
  const int half = (m - 1) / 2;
  if (lam.lambdas.size() != half + 1)
    throw std::invalid_argument("build_generator: need L+1 rates for m = 2L+1 states");
  lam.validate();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const double rate = lam.lambdas[std::min(i, m - 1 - i)];
    double out = 0.0;
    if (i > 0) {
      A(i, i - 1) = rate;
      out += rate;
    }
    if (i + 1 < m) {
      A(i, i + 1) = rate;
      out += rate;
    }
    A(i, i) = -out;
  }
  return A;
}

// Rates whose generator has invariant law pi_target. Detailed balance of the
// birth-death structure gives lambda_k = pi_mid / pi_k in closed form; the
// overall scale (absorbed by learn_a) is fixed by lambda_{L+1} = 1. The
// eigenproblem residual on P = e^A is still audited.
inline LambdaVector calibrate_lambda(const Eigen::VectorXd& pi_target) {
  const int m = static_cast<int>(pi_target.size());
  if (m < 1 || m % 2 == 0)
    throw std::invalid_argument("calibrate_lambda: need an odd number of states");
  const int half = (m - 1) / 2;
  for (int k = 0; k < m; ++k) {
    if (!(pi_target[k] > 0.0))
      throw std::invalid_argument("calibrate_lambda: target law must be strictly positive");
    if (std::abs(pi_target[k] - pi_target[m - 1 - k]) > 1e-12)
      throw std::invalid_argument("calibrate_lambda: target law must be symmetric");
  }
  LambdaVector lam;
  lam.lambdas.resize(half + 1);
  for (int k = 0; k <= half; ++k) lam.lambdas[k] = pi_target[half] / pi_target[k];

  const Eigen::MatrixXd A = build_generator(lam, m);
  const ChainPropagator prop(A);
  const Eigen::MatrixXd P = prop.exp(1.0);
  const double resid = ((pi_target.transpose() * P).transpose() - pi_target).cwiseAbs().maxCoeff();
  if (resid > 1e-10)
    throw std::runtime_error("calibrate_lambda: invariant-law residual " + std::to_string(resid) +
                             " exceeds 1e-10");
  return lam;
}

// Mean and variance of the eventual volume under the limit-transition row.
inline std::pair<double, double> conditional_moments(double t, const TechnicalModel& tech,
                                                     int from_state) {
  if (from_state < 0 || from_state >= tech.size())
    throw std::out_of_range("conditional_moments: state index out of range");
  const ChainPropagator prop(tech.generator);
  const Eigen::VectorXd row = limit_transition(t, tech, prop).row(from_state);
  const double mean = row.dot(tech.volumes);
  double var = 0.0;
  for (int k = 0; k < tech.size(); ++k) {
    const double d = tech.volumes[k] - mean;
    var += row[k] * d * d;
  }
  return {mean, var};
}

struct LearningParams {
  double a;
  double b;
};

namespace detail {

inline double mid_row_variance(double c, const ChainPropagator& prop,
                               const Eigen::VectorXd& volumes) {
  const int mid = static_cast<int>(volumes.size()) / 2;
  const Eigen::VectorXd row = prop.exp(c).row(mid);
  const double mean = row.dot(volumes);
  double var = 0.0;
  for (int k = 0; k < volumes.size(); ++k) {
    const double d = volumes[k] - mean;
    var += row[k] * d * d;
  }
  return var;
}

inline double law_variance(const Eigen::VectorXd& law, const Eigen::VectorXd& volumes) {
  const double mean = law.dot(volumes);
  double var = 0.0;
  for (int k = 0; k < volumes.size(); ++k) {
    const double d = volumes[k] - mean;
    var += law[k] * d * d;
  }
  return var;
}

}  // namespace detail

// Solve for (a, b) matching the mid-state conditional variance to sigma0_sq at
// t = 0 and sigmaTp_sq at t_prime. Both constraints see (a, b) only through
// H0 = a/b and H1 = (a/b) e^{-b t_prime}; each is a monotone 1-D root problem
// in c -> variance under exp(cA), solved by bisection.
inline LearningParams calibrate_learning(const PriorSpec& prior, const Eigen::MatrixXd& A,
                                         const Eigen::VectorXd& volumes) {
  if (!(prior.sigmaTp_sq < prior.sigma0_sq))
    throw std::domain_error(
        "calibrate_learning: horizon variance must be strictly below the prior variance");
  const ChainPropagator prop(A);
  const double var_cap = detail::law_variance(prop.invariant(), volumes);

  auto solve_c = [&](double target) {
    if (!(target > 0.0) || target >= var_cap)
      throw std::domain_error(
          "calibrate_learning: variance target not attainable on this state grid (cap " +
          std::to_string(var_cap) + ")");
    double lo = 0.0, hi = 1.0;
    while (detail::mid_row_variance(hi, prop, volumes) < target) {
      hi *= 2.0;
      if (hi > 1e8) throw std::runtime_error("calibrate_learning: bracket search failed");
    }
    while (hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      (detail::mid_row_variance(mid, prop, volumes) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  const double h0 = solve_c(prior.sigma0_sq);
  const double h1 = solve_c(prior.sigmaTp_sq);
  if (!(h1 < h0))
    throw std::runtime_error("calibrate_learning: target variances produced unordered roots");
  const double b = std::log(h0 / h1) / prior.t_prime;
  return {b * h0, b};
}

// Full calibration bundle, plus round-trip residuals for the audit report.
struct Calibration {
  TechnicalModel tech;
  Eigen::VectorXd pi_target;
  LambdaVector lambdas;
  double invariant_residual;  // || pi e^A - pi ||_inf
  double var_t0;              // achieved conditional variance at t = 0
  double var_horizon;         // achieved conditional variance at t_prime
};

inline Calibration calibrate_technical(const PriorSpec& prior, bool no_learning) {
  Calibration cal;
  cal.tech.volumes = build_state_grid(prior);
  cal.pi_target = discretized_prior(prior, cal.tech.volumes);
  cal.lambdas = calibrate_lambda(cal.pi_target);
  cal.tech.generator = build_generator(cal.lambdas, prior.m);
  if (no_learning) {
    cal.tech.learn_a = 1.0;
    cal.tech.learn_b = 0.0;
  } else {
    const LearningParams lp = calibrate_learning(prior, cal.tech.generator, cal.tech.volumes);
    cal.tech.learn_a = lp.a;
    cal.tech.learn_b = lp.b;
  }
  cal.tech.validate();

  const ChainPropagator prop(cal.tech.generator);
  const Eigen::MatrixXd P = prop.exp(1.0);
  cal.invariant_residual =
      ((cal.pi_target.transpose() * P).transpose() - cal.pi_target).cwiseAbs().maxCoeff();
  cal.var_t0 = conditional_moments(0.0, cal.tech, cal.tech.mid()).second;
  cal.var_horizon = conditional_moments(prior.t_prime, cal.tech, cal.tech.mid()).second;
  return cal;
}

}  // namespace reserveopt
