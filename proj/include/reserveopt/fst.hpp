#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "reserveopt/chain.hpp"
#include "reserveopt/interp.hpp"
#include "reserveopt/model.hpp"
#include "reserveopt/types.hpp"

namespace reserveopt {

// Regime-major value tables: row j holds regime j's values on the x grid, so
// each row is contiguous for resampling and transforms.
using ValueTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Characteristic exponent of the frozen-coefficient OU pricing operator.
inline double psi(double omega, const MarketModel& mkt) {
  return mkt.kappa - 0.5 * mkt.sigma * mkt.sigma * omega * omega;
}

// Closed form of exp{ int_0^dt psi(omega e^{kappa s}) ds }.
inline double step_factor(double omega, double dt, const MarketModel& mkt) {
  if (dt < 0.0) throw std::domain_error("step_factor: negative interval");
  const double w2 = omega * omega;
  return std::exp(mkt.kappa * dt - mkt.sigma * mkt.sigma * w2 / (4.0 * mkt.kappa) *
                                       (std::exp(2.0 * mkt.kappa * dt) - 1.0));
}

// exp{ int_{t0}^{t1} h_s ds * A } with h_s = a e^{-b s}.
inline Eigen::MatrixXd regime_coupler(double t0, double t1, const TechnicalModel& tech,
                                      const ChainPropagator& prop) {
  if (!(t1 > t0)) throw std::domain_error("regime_coupler: need t1 > t0");
  if (tech.learn_a == 0.0) return Eigen::MatrixXd::Identity(tech.size(), tech.size());
  const double c = tech.learn_b == 0.0
                       ? tech.learn_a * (t1 - t0)
                       : tech.learn_a / tech.learn_b *
                             (std::exp(-tech.learn_b * t0) - std::exp(-tech.learn_b * t1));
  return prop.exp(c);
}

inline Eigen::MatrixXd regime_coupler(double t0, double t1, const TechnicalModel& tech) {
  return regime_coupler(t0, t1, tech, ChainPropagator(tech.generator));
}

// Per-volume extraction integrals on the x grid (time-independent, so the
// exercise payoff at any date is limit_transition(t) * this table minus costs).
inline ValueTable extraction_table(const Eigen::VectorXd& x, const MarketModel& mkt,
                                   const ExtractionPlan& plan, const TechnicalModel& tech,
                                   const GaussLegendre& quad) {
  ValueTable phi(tech.size(), x.size());
  for (int j = 0; j < tech.size(); ++j)
    for (int i = 0; i < x.size(); ++i)
      phi(j, i) = extraction_value(x[i], tech.volumes[j], mkt, plan, quad);
  return phi;
}

// Deflated immediate-exercise payoff e^{-rho t} (p^{(j)}(t, x) - I^{(j)})_+.
inline ValueTable exercise_payoff(double t, const MarketModel& mkt, const CostModel& costs,
                                  const TechnicalModel& tech, const ChainPropagator& prop,
                                  const ValueTable& phi) {
  ValueTable pay = limit_transition(t, tech, prop) * phi;
  for (int j = 0; j < tech.size(); ++j)
    pay.row(j).array() -= investment_cost(j, costs, tech);
  return (std::exp(-mkt.rho * t) * pay).cwiseMax(0.0);
}

inline ValueTable apply_exercise(const ValueTable& continuation, const ValueTable& deflated_payoff) {
  if (continuation.rows() != deflated_payoff.rows() ||
      continuation.cols() != deflated_payoff.cols())
    throw std::invalid_argument("apply_exercise: shape mismatch");
  return continuation.cwiseMax(deflated_payoff);
}

// Convenience overload computing the payoff from the model handles.
inline ValueTable apply_exercise(const ValueTable& continuation, double t, const MarketModel& mkt,
                                 const ExtractionPlan& plan, const CostModel& costs,
                                 const TechnicalModel& tech, const GridSpec& grid) {
  const ChainPropagator prop(tech.generator);
  const GaussLegendre quad(grid.quadrature_points);
  const ValueTable phi = extraction_table(grid.x_grid(), mkt, plan, tech, quad);
  return apply_exercise(continuation, exercise_payoff(t, mkt, costs, tech, prop, phi));
}

namespace detail {

// Fraction of |values| mass sitting in the outer 5% of nodes on each side.
inline double edge_mass_fraction(const ValueTable& values) {
  const int nx = static_cast<int>(values.cols());
  const int edge = std::max(1, nx / 40);  // 2.5% per side
  double total = 0.0, outer = 0.0;
  for (int j = 0; j < values.rows(); ++j)
    for (int i = 0; i < nx; ++i) {
      const double a = std::abs(values(j, i));
      total += a;
      if (i < edge || i >= nx - edge) outer += a;
    }
  return total > 0.0 ? outer / total : 0.0;
}

}  // namespace detail

// One backward step in Fourier space: resample onto the contracted frame
// x e^{-kappa dt}, transform, multiply by the Gaussian interval factor, mix
// regimes through the coupler, transform back. The multiplier carries the
// frame-change Jacobian e^{-kappa dt} so that constants are preserved
// (step_factor alone is the raw exponent integral, e^{kappa dt} at omega = 0).
inline ValueTable propagate_interval(const ValueTable& values, double t0, double t1,
                                     const MarketModel& mkt, const TechnicalModel& tech,
                                     const GridSpec& grid, const ChainPropagator& prop,
                                     bool* grid_warning = nullptr,
                                     bool negate_exponent = false) {
  const int m = tech.size();
  const int nx = grid.n_points;
  if (values.rows() != m || values.cols() != nx)
    throw std::invalid_argument("propagate_interval: value table shape mismatch");
  const double dt = t1 - t0;
  if (!(dt > 0.0)) throw std::domain_error("propagate_interval: need t1 > t0");

  if (grid_warning && detail::edge_mass_fraction(values) > 1e-3) *grid_warning = true;

  const double dx = grid.dx();
  const double x0 = -grid.x_half_width;
  const double shrink = std::exp(-mkt.kappa * dt);

  std::vector<double> queries(nx);
  for (int i = 0; i < nx; ++i) queries[i] = (x0 + i * dx) * shrink;

  const int nf = nx / 2 + 1;
  Eigen::VectorXd mult(nf);
  for (int k = 0; k < nf; ++k) {
    const double omega = 2.0 * std::numbers::pi * k / (nx * dx);
    double sf = step_factor(omega, dt, mkt);
    if (negate_exponent) sf = 1.0 / sf;  // negative-control hook for the validation suite
    mult[k] = sf * shrink;
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> row(nx), slopes(nx);
  std::vector<std::complex<double>> spec(nf);
  Eigen::MatrixXd re(m, nf), im(m, nf);
  for (int j = 0; j < m; ++j) {
    pchip_resample(values.row(j).data(), nx, x0, dx, queries.data(), nx, row.data(),
                   slopes.data());
    fft.fwd(spec, row);
    for (int k = 0; k < nf; ++k) {
      re(j, k) = spec[k].real() * mult[k];
      im(j, k) = spec[k].imag() * mult[k];
    }
  }

  const Eigen::MatrixXd coupler = regime_coupler(t0, t1, tech, prop);
  re = (coupler * re).eval();
  im = (coupler * im).eval();

  ValueTable out(m, nx);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < nf; ++k) spec[k] = {re(j, k), im(j, k)};
    fft.inv(row, spec);
    for (int i = 0; i < nx; ++i) out(j, i) = row[i];
  }
  return out;
}

inline ValueTable propagate_interval(const ValueTable& values, double t0, double t1,
                                     const MarketModel& mkt, const TechnicalModel& tech,
                                     const GridSpec& grid) {
  return propagate_interval(values, t0, t1, mkt, tech, grid, ChainPropagator(tech.generator));
}

struct SolveOptions {
  // Per exercise date (same length as grid.exercise_dates); empty = every date.
  // The terminal date is always an expiry regardless of its flag.
  std::vector<std::uint8_t> exercise_mask;
  bool debug_negate_exponent = false;
};

// Deflated option values per (date, regime, x node), continuation values for
// boundary extraction, and the reporting deflator.
struct ValueSurface {
  std::vector<double> times;
  Eigen::VectorXd x_grid;
  std::vector<ValueTable> values;        // value after the exercise decision
  std::vector<ValueTable> continuation;  // zero table at the terminal date
  double rho = 0.0;
  bool grid_warning = false;

  double undeflated(int date, int regime, int node) const {
    return std::exp(rho * times[date]) * values[date](regime, node);
  }
};

// Backward induction over all exercise dates (Bermudan by default; restrict
// dates through SolveOptions for European or subset runs).
inline ValueSurface solve(const MarketModel& mkt, const ExtractionPlan& plan,
                          const CostModel& costs, const TechnicalModel& tech,
                          const GridSpec& grid, const SolveOptions& opt = {}) {
  mkt.validate();
  plan.validate();
  costs.validate();
  tech.validate();
  grid.validate();
  plan.check_feasible(tech.volumes[tech.size() - 1]);
  const int n_dates = static_cast<int>(grid.exercise_dates.size());
  if (!opt.exercise_mask.empty() &&
      opt.exercise_mask.size() != static_cast<size_t>(n_dates))
    throw std::invalid_argument("solve: exercise mask length mismatch");

  const ChainPropagator prop(tech.generator);
  const GaussLegendre quad(grid.quadrature_points);
  ValueSurface surf;
  surf.times = grid.exercise_dates;
  surf.x_grid = grid.x_grid();
  surf.rho = mkt.rho;
  surf.values.resize(n_dates);
  surf.continuation.resize(n_dates);

  const ValueTable phi = extraction_table(surf.x_grid, mkt, plan, tech, quad);
  const int last = n_dates - 1;
  surf.continuation[last] = ValueTable::Zero(tech.size(), grid.n_points);
  surf.values[last] = exercise_payoff(grid.exercise_dates[last], mkt, costs, tech, prop, phi);

  ValueTable current = surf.values[last];
  for (int k = last - 1; k >= 0; --k) {
    ValueTable cont =
        propagate_interval(current, grid.exercise_dates[k], grid.exercise_dates[k + 1], mkt,
                           tech, grid, prop, &surf.grid_warning, opt.debug_negate_exponent);
    const bool exercisable = opt.exercise_mask.empty() || opt.exercise_mask[k];
    if (exercisable) {
      current = apply_exercise(
          cont, exercise_payoff(grid.exercise_dates[k], mkt, costs, tech, prop, phi));
    } else {
      current = cont;
    }
    surf.continuation[k] = std::move(cont);
    surf.values[k] = current;
  }
  return surf;
}

struct BoundaryPoint {
  bool present = false;
  double spot = 0.0;
};

// entries[date][regime]; times mirror the surface's exercise dates.
struct ExerciseBoundary {
  std::vector<double> times;
  std::vector<std::vector<BoundaryPoint>> entries;
};

// Smallest grid spot at which exercising beats continuing (within an absolute
// tolerance of 1e-9 on the deflated values), refined by linear interpolation
// of the exercise-minus-continuation gap between the bracketing nodes.
inline ExerciseBoundary extract_boundary(const ValueSurface& surf, const MarketModel& mkt,
                                         const ExtractionPlan& plan, const CostModel& costs,
                                         const TechnicalModel& tech, const GridSpec& grid) {
  constexpr double tol = 1e-9;
  const ChainPropagator prop(tech.generator);
  const GaussLegendre quad(grid.quadrature_points);
  const ValueTable phi = extraction_table(surf.x_grid, mkt, plan, tech, quad);
  const int nx = static_cast<int>(surf.x_grid.size());

  ExerciseBoundary bound;
  bound.times = surf.times;
  bound.entries.resize(surf.times.size());
  for (size_t d = 0; d < surf.times.size(); ++d) {
    const ValueTable pay = exercise_payoff(surf.times[d], mkt, costs, tech, prop, phi);
    const ValueTable& cont = surf.continuation[d];
    bound.entries[d].resize(tech.size());
    for (int j = 0; j < tech.size(); ++j) {
      for (int i = 0; i < nx; ++i) {
        const double gap = pay(j, i) - cont(j, i);
        if (pay(j, i) > 0.0 && gap >= -tol) {
          double xc = surf.x_grid[i];
          if (i > 0 && pay(j, i - 1) > 0.0) {
            const double prev = pay(j, i - 1) - cont(j, i - 1);
            if (gap > prev) xc = surf.x_grid[i] - grid.dx() * gap / (gap - prev);
          }
          bound.entries[d][j] = {true, std::exp(mkt.theta + xc)};
          break;
        }
      }
    }
  }
  return bound;
}

}  // namespace reserveopt
