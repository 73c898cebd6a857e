#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace reserveopt {

// Spectral transient solver for a reversible birth-death generator A.
// The invariant law pi follows from detailed balance on the tridiagonal
// structure; D = diag(sqrt(pi)) symmetrizes A, so e^{cA} comes from one
// self-adjoint eigendecomposition and is exact for any c >= 0.
class ChainPropagator {
 public:
  explicit ChainPropagator(const Eigen::MatrixXd& A) {
    const int m = static_cast<int>(A.rows());
    if (A.cols() != m || m < 1)
      throw std::invalid_argument("ChainPropagator: generator must be square and nonempty");
    pi_.resize(m);
    pi_[0] = 1.0;
    for (int i = 0; i + 1 < m; ++i) {
      if (!(A(i, i + 1) > 0.0) || !(A(i + 1, i) > 0.0))
        throw std::invalid_argument(
            "ChainPropagator: generator must be an irreducible birth-death matrix");
      pi_[i + 1] = pi_[i] * A(i, i + 1) / A(i + 1, i);
    }
    pi_ /= pi_.sum();
    sqrt_pi_ = pi_.cwiseSqrt();

    Eigen::MatrixXd S(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) S(i, j) = sqrt_pi_[i] * A(i, j) / sqrt_pi_[j];
    S = 0.5 * (S + S.transpose()).eval();  // kill round-off asymmetry
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("ChainPropagator: eigendecomposition failed");
    evals_ = es.eigenvalues();
    evecs_ = es.eigenvectors();
  }

  int size() const { return static_cast<int>(pi_.size()); }
  const Eigen::VectorXd& invariant() const { return pi_; }

  // e^{cA}; rows clipped at zero and renormalized against round-off.
  Eigen::MatrixXd exp(double c) const {
    if (!(c >= 0.0)) throw std::domain_error("ChainPropagator: need c >= 0");
    const int m = size();
    Eigen::VectorXd ew(m);
    for (int k = 0; k < m; ++k) ew[k] = std::exp(c * evals_[k]);
    Eigen::MatrixXd M = evecs_ * ew.asDiagonal() * evecs_.transpose();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) M(i, j) *= sqrt_pi_[j] / sqrt_pi_[i];
      M.row(i) = M.row(i).cwiseMax(0.0);
      M.row(i) /= M.row(i).sum();
    }
    return M;
  }

  // c -> infinity limit: every row is the invariant law.
  Eigen::MatrixXd limit() const {
    Eigen::MatrixXd M(size(), size());
    M.rowwise() = pi_.transpose();
    return M;
  }

 private:
  Eigen::VectorXd pi_;
  Eigen::VectorXd sqrt_pi_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXd evecs_;
};

}  // namespace reserveopt
