#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "reserveopt/calib.hpp"
#include "reserveopt/fst.hpp"
#include "reserveopt/interp.hpp"
#include "reserveopt/model.hpp"
#include "reserveopt/types.hpp"

namespace reserveopt {

struct SimConfig {
  long long n_paths;
  double dt_sim;
  std::uint64_t seed;

  void validate() const {
    if (n_paths < 1) throw std::invalid_argument("SimConfig: need at least one path");
    if (!(dt_sim > 0.0)) throw std::invalid_argument("SimConfig: dt_sim must be > 0");
  }
};

// Deterministic variate source: raw mt19937_64 bits mapped by hand so streams
// are bit-reproducible across standard libraries, not just across runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }  // [0, 1)

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(1.0 - uniform()); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

namespace detail {

inline McEstimate reduce(double sum, double sum_sq, long long n) {
  McEstimate est;
  est.mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - est.mean * est.mean);
  est.std_error = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  return est;
}

inline int sample_category(const Eigen::VectorXd& cumulative, double u) {
  const int m = static_cast<int>(cumulative.size());
  int lo = 0, hi = m - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (u < cumulative[mid])
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

}  // namespace detail

// Exact-transition OU sampling on the dt_sim clock; row p, column i holds
// X at time i * dt_sim.
inline Eigen::MatrixXd simulate_ou(double x0, double horizon, const MarketModel& mkt,
                                   const SimConfig& sim) {
  sim.validate();
  if (!(horizon > 0.0)) throw std::domain_error("simulate_ou: horizon must be > 0");
  const int n_steps = static_cast<int>(std::ceil(horizon / sim.dt_sim - 1e-12));
  Eigen::MatrixXd paths(sim.n_paths, n_steps + 1);
  Rng rng(sim.seed);
  const double decay = std::exp(-mkt.kappa * sim.dt_sim);
  const double stdev =
      mkt.sigma * std::sqrt((1.0 - decay * decay) / (2.0 * mkt.kappa));
  for (long long p = 0; p < sim.n_paths; ++p) {
    double x = x0;
    paths(p, 0) = x;
    for (int i = 1; i <= n_steps; ++i) {
      x = decay * x + stdev * rng.normal();
      paths(p, i) = x;
    }
  }
  return paths;
}

struct ChainEvent {
  double time;
  int state;
};

// Event-driven path of the inhomogeneous chain via the time change
// c(t) = int_0^t h_u du: run the homogeneous chain with generator A on the
// transformed clock and map jump clocks back to physical time.
inline std::vector<ChainEvent> simulate_chain_path(int z0, double horizon,
                                                   const TechnicalModel& tech, Rng& rng) {
  if (z0 < 0 || z0 >= tech.size()) throw std::out_of_range("simulate_chain_path: state index");
  std::vector<ChainEvent> path{{0.0, z0}};
  if (tech.learn_a == 0.0) return path;
  const double budget = tech.learn_b == 0.0
                            ? tech.learn_a * horizon
                            : tech.learn_a / tech.learn_b *
                                  (1.0 - std::exp(-tech.learn_b * horizon));
  auto to_physical = [&](double s) {
    return tech.learn_b == 0.0
               ? s / tech.learn_a
               : -std::log(1.0 - tech.learn_b * s / tech.learn_a) / tech.learn_b;
  };
  int z = z0;
  double clock = 0.0;
  while (true) {
    const double rate = -tech.generator(z, z);
    if (!(rate > 0.0)) break;
    clock += rng.exponential() / rate;
    if (clock >= budget) break;
    const double up = z + 1 < tech.size() ? tech.generator(z, z + 1) : 0.0;
    z = (rng.uniform() * rate < up) ? z + 1 : z - 1;
    path.push_back({to_physical(clock), z});
  }
  return path;
}

inline int chain_state_at(const std::vector<ChainEvent>& path, double t) {
  int state = path.front().state;
  for (const auto& e : path) {
    if (e.time > t) break;
    state = e.state;
  }
  return state;
}

inline std::vector<std::vector<ChainEvent>> simulate_chain(int z0, double horizon,
                                                           const TechnicalModel& tech,
                                                           const SimConfig& sim) {
  sim.validate();
  Rng rng(sim.seed);
  std::vector<std::vector<ChainEvent>> paths;
  paths.reserve(sim.n_paths);
  for (long long p = 0; p < sim.n_paths; ++p)
    paths.push_back(simulate_chain_path(z0, horizon, tech, rng));
  return paths;
}

// MC estimate of the reserve value P_t: only the eventual volume is random
// (the inner spot expectation is the forward, done by quadrature), so each
// draw picks a volume from the limit-transition row.
inline McEstimate simulate_dcf(double t, double x, int regime, const MarketModel& mkt,
                               const ExtractionPlan& plan, const TechnicalModel& tech,
                               const GridSpec& grid, const SimConfig& sim) {
  sim.validate();
  if (regime < 0 || regime >= tech.size()) throw std::out_of_range("simulate_dcf: regime index");
  plan.check_feasible(tech.volumes[tech.size() - 1]);
  const ChainPropagator prop(tech.generator);
  const GaussLegendre quad(grid.quadrature_points);
  const Eigen::VectorXd row = limit_transition(t, tech, prop).row(regime);
  Eigen::VectorXd cumulative(tech.size());
  Eigen::VectorXd value(tech.size());
  double acc = 0.0;
  for (int j = 0; j < tech.size(); ++j) {
    acc += row[j];
    cumulative[j] = acc;
    value[j] = extraction_value(x, tech.volumes[j], mkt, plan, quad);
  }
  cumulative[tech.size() - 1] = 1.0;

  Rng rng(sim.seed);
  double sum = 0.0, sum_sq = 0.0;
  for (long long p = 0; p < sim.n_paths; ++p) {
    const double v = value[detail::sample_category(cumulative, rng.uniform())];
    sum += v;
    sum_sq += v * v;
  }
  return detail::reduce(sum, sum_sq, sim.n_paths);
}

// European MC oracle: per starting regime, E[e^{-rho T}(P_T - I)_+] with the
// terminal regime drawn from the exact marginal exp(c(T) A) and X_T from the
// exact OU transition; the payoff comes from a fine tabulation of the
// extraction integrals in x (the table spans +-x_table so the terminal law's
// tails stay on it).
inline std::vector<McEstimate> european_mc(const MarketModel& mkt, const ExtractionPlan& plan,
                                           const CostModel& costs, const TechnicalModel& tech,
                                           const GridSpec& grid, const SimConfig& sim,
                                           double x_table = 6.0, int table_points = 4097) {
  sim.validate();
  plan.check_feasible(tech.volumes[tech.size() - 1]);
  const int m = tech.size();
  const double T = grid.exercise_dates.back();
  const ChainPropagator prop(tech.generator);
  const GaussLegendre quad(grid.quadrature_points);

  // marginal law of Z_T per starting regime
  const double cT = tech.learn_a == 0.0 ? 0.0
                    : tech.learn_b == 0.0
                        ? tech.learn_a * T
                        : tech.learn_a / tech.learn_b * (1.0 - std::exp(-tech.learn_b * T));
  const Eigen::MatrixXd marginal =
      tech.learn_a == 0.0 ? Eigen::MatrixXd::Identity(m, m).eval() : prop.exp(cT);
  Eigen::MatrixXd marginal_cum = marginal;
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
      acc += marginal(j, k);
      marginal_cum(j, k) = acc;
    }
    marginal_cum(j, m - 1) = 1.0;
  }
  const Eigen::MatrixXd wT = limit_transition(T, tech, prop);

  // extraction integrals tabulated on a wide uniform x grid
  const double h = 2.0 * x_table / (table_points - 1);
  Eigen::MatrixXd table(m, table_points);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < table_points; ++i)
      table(j, i) = extraction_value(-x_table + i * h, tech.volumes[j], mkt, plan, quad);

  Eigen::VectorXd inv_cost(m);
  for (int k = 0; k < m; ++k) inv_cost[k] = investment_cost(k, costs, tech);

  const double decay = std::exp(-mkt.kappa * T);
  const double stdev = mkt.sigma * std::sqrt((1.0 - decay * decay) / (2.0 * mkt.kappa));
  const double deflator = std::exp(-mkt.rho * T);

  Rng rng(sim.seed);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sum_sq = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd phi_at_x(m), payoff(m);
  for (long long p = 0; p < sim.n_paths; ++p) {
    const double xT = std::clamp(stdev * rng.normal(), -x_table, x_table);
    const double pos = (xT + x_table) / h;
    const int i0 = std::min(static_cast<int>(pos), table_points - 2);
    const double w = pos - i0;
    for (int k = 0; k < m; ++k) phi_at_x[k] = (1.0 - w) * table(k, i0) + w * table(k, i0 + 1);
    const Eigen::VectorXd p_terminal = wT * phi_at_x;
    for (int k = 0; k < m; ++k)
      payoff[k] = deflator * std::max(p_terminal[k] - inv_cost[k], 0.0);
    for (int j = 0; j < m; ++j) {
      const double v = payoff[detail::sample_category(marginal_cum.row(j), rng.uniform())];
      sum[j] += v;
      sum_sq[j] += v * v;
    }
  }
  std::vector<McEstimate> out(m);
  for (int j = 0; j < m; ++j) out[j] = detail::reduce(sum[j], sum_sq[j], sim.n_paths);
  return out;
}

namespace detail {

// Crank-Nicolson sub-stepping of (d/dt + L) v = 0 for the OU operator
// L = -kappa x d/dx + sigma^2/2 d^2/dx^2 on a uniform grid, with zero-curvature
// (linear) end conditions. One regime per call; the regime mixing commutes with
// L exactly, so the caller applies the coupler between intervals.
class CnStepper {
 public:
  CnStepper(const Eigen::VectorXd& x, double dx, const MarketModel& mkt) : x_(x), dx_(dx) {
    const int n = static_cast<int>(x.size());
    lower_.resize(n);
    diag_.resize(n);
    upper_.resize(n);
    const double diff = 0.5 * mkt.sigma * mkt.sigma / (dx * dx);
    for (int i = 0; i < n; ++i) {
      const double adv = -mkt.kappa * x[i] / (2.0 * dx);
      if (i == 0) {
        // ghost from v'' = 0: one-sided first derivative
        lower_[i] = 0.0;
        upper_[i] = -mkt.kappa * x[i] / dx;
        diag_[i] = mkt.kappa * x[i] / dx;
      } else if (i == n - 1) {
        lower_[i] = mkt.kappa * x[i] / dx;
        upper_[i] = 0.0;
        diag_[i] = -mkt.kappa * x[i] / dx;
      } else {
        lower_[i] = diff - adv;
        diag_[i] = -2.0 * diff;
        upper_[i] = diff + adv;
      }
    }
  }

  // advance the backward equation over an interval of length dt in n_sub steps
  void advance(Eigen::VectorXd& v, double dt, int n_sub) const {
    const int n = static_cast<int>(v.size());
    const double s = 0.5 * dt / n_sub;
    Eigen::VectorXd rhs(n), c_prime(n), d_prime(n);
    for (int step = 0; step < n_sub; ++step) {
      // rhs = (I + s L) v
      for (int i = 0; i < n; ++i) {
        double acc = (1.0 + s * diag_[i]) * v[i];
        if (i > 0) acc += s * lower_[i] * v[i - 1];
        if (i + 1 < n) acc += s * upper_[i] * v[i + 1];
        rhs[i] = acc;
      }
      // Thomas solve of (I - s L) v = rhs
      double denom = 1.0 - s * diag_[0];
      c_prime[0] = -s * upper_[0] / denom;
      d_prime[0] = rhs[0] / denom;
      for (int i = 1; i < n; ++i) {
        const double a = -s * lower_[i];
        denom = (1.0 - s * diag_[i]) - a * c_prime[i - 1];
        c_prime[i] = -s * upper_[i] / denom;
        d_prime[i] = (rhs[i] - a * d_prime[i - 1]) / denom;
      }
      v[n - 1] = d_prime[n - 1];
      for (int i = n - 2; i >= 0; --i) v[i] = d_prime[i] - c_prime[i] * v[i + 1];
    }
  }

 private:
  Eigen::VectorXd x_;
  double dx_;
  std::vector<double> lower_, diag_, upper_;
};

}  // namespace detail

// Single-regime CN propagation over [t0, t1] on the FST grid: the dense
// finite-difference oracle for propagate_interval.
inline Eigen::VectorXd cn_propagate(const Eigen::VectorXd& values, double t0, double t1,
                                    const MarketModel& mkt, const Eigen::VectorXd& x,
                                    int substeps) {
  if (!(t1 > t0)) throw std::domain_error("cn_propagate: need t1 > t0");
  const double dx = x[1] - x[0];
  detail::CnStepper stepper(x, dx, mkt);
  Eigen::VectorXd v = values;
  stepper.advance(v, t1 - t0, substeps);
  return v;
}

struct LatticeResult {
  Eigen::VectorXd values;  // deflated t_0 value per regime at x = 0
  bool stability_warning = false;
};

// Dense dynamic-programming oracle for the Bermudan problem: CN in x per
// regime, exact coupler mixing between dates (L and the generator term act on
// different indices, so the splitting is exact), exercise max at each date.
inline LatticeResult lattice_bermudan(const MarketModel& mkt, const ExtractionPlan& plan,
                                      const CostModel& costs, const TechnicalModel& tech,
                                      const GridSpec& grid, int n_space, int substeps,
                                      const std::vector<std::uint8_t>& exercise_mask = {}) {
  mkt.validate();
  plan.validate();
  costs.validate();
  tech.validate();
  grid.validate();
  plan.check_feasible(tech.volumes[tech.size() - 1]);
  if (n_space < 3 || n_space % 2 == 0)
    throw std::invalid_argument("lattice_bermudan: n_space must be odd and >= 3");
  const int n_dates = static_cast<int>(grid.exercise_dates.size());
  if (!exercise_mask.empty() && exercise_mask.size() != static_cast<size_t>(n_dates))
    throw std::invalid_argument("lattice_bermudan: exercise mask length mismatch");

  const int m = tech.size();
  const double xw = grid.x_half_width;
  const double dx = 2.0 * xw / (n_space - 1);
  Eigen::VectorXd x(n_space);
  for (int i = 0; i < n_space; ++i) x[i] = -xw + i * dx;

  LatticeResult result;
  // positivity (M-matrix) condition of the advection-diffusion stencil
  if (mkt.sigma > 0.0 && mkt.kappa * xw * dx > mkt.sigma * mkt.sigma)
    result.stability_warning = true;

  const ChainPropagator prop(tech.generator);
  const GaussLegendre quad(grid.quadrature_points);
  Eigen::MatrixXd phi(m, n_space);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n_space; ++i)
      phi(j, i) = extraction_value(x[i], tech.volumes[j], mkt, plan, quad);
  Eigen::VectorXd inv_cost(m);
  for (int k = 0; k < m; ++k) inv_cost[k] = investment_cost(k, costs, tech);

  auto payoff_at = [&](double t) {
    Eigen::MatrixXd pay = limit_transition(t, tech, prop) * phi;
    pay.colwise() -= inv_cost;
    return (std::exp(-mkt.rho * t) * pay).cwiseMax(0.0).eval();
  };

  detail::CnStepper stepper(x, dx, mkt);
  const int last = n_dates - 1;
  Eigen::MatrixXd v = payoff_at(grid.exercise_dates[last]);
  for (int k = last - 1; k >= 0; --k) {
    const double t0 = grid.exercise_dates[k], t1 = grid.exercise_dates[k + 1];
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd row = v.row(j);
      stepper.advance(row, t1 - t0, substeps);
      v.row(j) = row;
    }
    if (tech.learn_a > 0.0) v = (regime_coupler(t0, t1, tech, prop) * v).eval();
    if (exercise_mask.empty() || exercise_mask[k]) v = v.cwiseMax(payoff_at(t0));
  }
  result.values = v.col((n_space - 1) / 2);
  return result;
}

}  // namespace reserveopt
