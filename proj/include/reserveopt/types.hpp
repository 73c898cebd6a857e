#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace reserveopt {

// Exponential OU spot dynamics S = exp(theta + X), dX = -kappa X dt + sigma dW,
// discounted at rate rho.
struct MarketModel {
  double kappa;  // mean-reversion rate (1/y)
  double theta;  // long-run log price level
  double sigma;  // log volatility (1/sqrt(y))
  double rho;    // discount rate (1/y)

  void validate() const {
    if (!(kappa > 0.0)) throw std::invalid_argument("MarketModel: kappa must be > 0");
    if (!(sigma >= 0.0)) throw std::invalid_argument("MarketModel: sigma must be >= 0");
    if (!(rho > 0.0)) throw std::invalid_argument("MarketModel: rho must be > 0");
    if (!std::isfinite(theta)) throw std::invalid_argument("MarketModel: theta must be finite");
  }
};

// Extraction starts epsilon years after investment at rate g(s) = alpha e^{-beta (s-epsilon)}
// until the recoverable fraction gamma of the reserve is depleted; c is the running cost
// per unit extracted.
struct ExtractionPlan {
  double alpha;
  double beta;
  double gamma;
  double epsilon;
  double c;

  void validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("ExtractionPlan: alpha must be >= 0");
    if (!(beta >= 0.0)) throw std::invalid_argument("ExtractionPlan: beta must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("ExtractionPlan: gamma must lie in (0,1)");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("ExtractionPlan: epsilon must be >= 0");
    if (!(c >= 0.0)) throw std::invalid_argument("ExtractionPlan: running cost must be >= 0");
  }

  // Every volume on the grid must deplete in finite time; alpha == 0 is only
  // admissible when nothing is ever extracted.
  void check_feasible(double v_max) const {
    if (!(v_max > 0.0)) return;
    if (!(alpha > 0.0))
      throw std::domain_error("ExtractionPlan: zero extraction rate with positive volumes");
    if (beta * gamma * v_max / alpha >= 1.0)
      throw std::domain_error("ExtractionPlan: infeasible volume " + std::to_string(v_max) +
                              ", extraction rate decays to zero before depletion");
  }
};

// Investment cost I^{(k)} = c0 + c1 v^{(k)}.
struct CostModel {
  double c0;
  double c1;

  void validate() const {
    if (!(c0 >= 0.0)) throw std::invalid_argument("CostModel: c0 must be >= 0");
    if (!(c1 >= 0.0)) throw std::invalid_argument("CostModel: c1 must be >= 0");
  }
};

// Reserve-volume chain: states carry volumes, transitions are driven by the
// time-inhomogeneous generator h_t A with h_t = a e^{-b t}.
struct TechnicalModel {
  Eigen::VectorXd volumes;    // strictly increasing, symmetric about the mid-state
  Eigen::MatrixXd generator;  // base generator A: tridiagonal, zero row sums
  double learn_a = 1.0;
  double learn_b = 0.0;

  int size() const { return static_cast<int>(volumes.size()); }
  int mid() const { return size() / 2; }

  void validate() const {
    const int m = size();
    if (m < 1 || m % 2 == 0)
      throw std::invalid_argument("TechnicalModel: need an odd number of states");
    if (generator.rows() != m || generator.cols() != m)
      throw std::invalid_argument("TechnicalModel: generator dimension mismatch");
    if (!(learn_a >= 0.0) || !(learn_b >= 0.0))
      throw std::invalid_argument("TechnicalModel: learning parameters must be nonnegative");

    for (int k = 0; k + 1 < m; ++k)
      if (!(volumes[k] < volumes[k + 1]))
        throw std::invalid_argument("TechnicalModel: volumes must be strictly increasing");
    const double span = volumes[m - 1] - volumes[0];
    const double mu = volumes[mid()];
    for (int i = 1; i <= mid(); ++i)
      if (std::abs((volumes[mid() + i] - mu) - (mu - volumes[mid() - i])) > 1e-8 * std::max(span, 1.0))
        throw std::invalid_argument("TechnicalModel: volumes not symmetric about the mid-state");

    const double scale = std::max(generator.cwiseAbs().maxCoeff(), 1.0);
    for (int i = 0; i < m; ++i) {
      if (std::abs(generator.row(i).sum()) > 1e-9 * scale)
        throw std::invalid_argument("TechnicalModel: generator row sums must vanish");
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        if (generator(i, j) < 0.0)
          throw std::invalid_argument("TechnicalModel: negative off-diagonal rate");
        if (std::abs(i - j) > 1 && generator(i, j) != 0.0)
          throw std::invalid_argument("TechnicalModel: generator must be tridiagonal");
      }
    }
  }
};

// Discretization shared by the solver: spatial grid for the log-price deviation
// x_i = -x_half_width + i * dx (dx = 2 x_half_width / n_points, so x = 0 is a node),
// plus the admissible exercise dates t_0 = 0 < t_1 < ... < t_N.
struct GridSpec {
  double x_half_width;
  int n_points;
  std::vector<double> exercise_dates;
  int quadrature_points = 64;

  double dx() const { return 2.0 * x_half_width / n_points; }

  Eigen::VectorXd x_grid() const {
    Eigen::VectorXd x(n_points);
    const double h = dx();
    for (int i = 0; i < n_points; ++i) x[i] = -x_half_width + i * h;
    return x;
  }

  void validate() const {
    if (!(x_half_width > 0.0)) throw std::invalid_argument("GridSpec: x_half_width must be > 0");
    if (n_points < 2 || (n_points & (n_points - 1)) != 0)
      throw std::invalid_argument("GridSpec: n_points must be a power of two");
    if (exercise_dates.empty())
      throw std::invalid_argument("GridSpec: empty exercise-date set");
    if (exercise_dates.front() != 0.0)
      throw std::invalid_argument("GridSpec: exercise dates must start at 0");
    for (size_t i = 0; i + 1 < exercise_dates.size(); ++i)
      if (!(exercise_dates[i] < exercise_dates[i + 1]))
        throw std::invalid_argument("GridSpec: exercise dates must be strictly increasing");
    if (quadrature_points < 2)
      throw std::invalid_argument("GridSpec: need at least two quadrature nodes");
  }
};

// Normal prior on the reserve volume, discretized onto m states spanning
// mu +/- n_sigmas * sigma0, with a variance target at the learning horizon t_prime.
struct PriorSpec {
  double mu;
  double sigma0_sq;
  double sigmaTp_sq;
  double t_prime;
  int m;
  double n_sigmas = 3.0;

  void validate() const {
    if (!(sigma0_sq > 0.0)) throw std::invalid_argument("PriorSpec: sigma0_sq must be > 0");
    if (!(sigmaTp_sq > 0.0 && sigmaTp_sq <= sigma0_sq))
      throw std::invalid_argument("PriorSpec: need 0 < sigmaTp_sq <= sigma0_sq");
    if (!(t_prime > 0.0)) throw std::invalid_argument("PriorSpec: t_prime must be > 0");
    if (m < 3 || m % 2 == 0) throw std::invalid_argument("PriorSpec: m must be odd and >= 3");
    if (!(n_sigmas > 0.0)) throw std::invalid_argument("PriorSpec: n_sigmas must be > 0");
    if (!(mu - n_sigmas * std::sqrt(sigma0_sq) > 0.0))
      throw std::invalid_argument("PriorSpec: grid would reach nonpositive volumes");
  }
};

// Rates lambda_1..lambda_{L+1} of the symmetric tridiagonal generator.
struct LambdaVector {
  Eigen::VectorXd lambdas;

  void validate() const {
    for (int i = 0; i < lambdas.size(); ++i)
      if (!(lambdas[i] > 0.0)) throw std::invalid_argument("LambdaVector: rates must be > 0");
  }
};

}  // namespace reserveopt
