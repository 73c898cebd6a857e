#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace reserveopt {

// Gauss-Legendre rule on [-1,1]; nodes/weights from the Golub-Welsch eigenproblem
// of the Jacobi matrix.
class GaussLegendre {
 public:
  explicit GaussLegendre(int n) {
    if (n < 1) throw std::invalid_argument("GaussLegendre: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const double b = k / std::sqrt(4.0 * k * k - 1.0);
      jacobi(k, k - 1) = b;
      jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes_ = es.eigenvalues();
    weights_.resize(n);
    for (int k = 0; k < n; ++k) {
      const double v0 = es.eigenvectors()(0, k);
      weights_[k] = 2.0 * v0 * v0;
    }
  }

  template <class F>
  double integrate(F&& f, double lo, double hi) const {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    double acc = 0.0;
    for (int k = 0; k < nodes_.size(); ++k) acc += weights_[k] * f(mid + half * nodes_[k]);
    return acc * half;
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
};

}  // namespace reserveopt
