#include "sfcb/nnls.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sfcb {
namespace {

// Lower-triangular Cholesky factor of A_P^T A_P for the ordered passive set P.
class GrowingCholesky {
 public:
  GrowingCholesky(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) : a_(a), b_(b) {}

  int size() const { return static_cast<int>(cols_.size()); }
  const std::vector<int>& cols() const { return cols_; }

  /// Appends column j; returns false (and leaves the factor unchanged) if it
  /// is numerically dependent on the current set.
  bool append(int j) {
    const int k = size();
    const Eigen::VectorXd aj = a_.col(j);
    Eigen::VectorXd c(k);
    for (int i = 0; i < k; ++i) c[i] = a_.col(cols_[i]).dot(aj);
    Eigen::VectorXd l = c;
    if (k > 0) l = l_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(c);
    const double d2 = aj.squaredNorm() - l.squaredNorm();
    if (!(d2 > 1e-20 * aj.squaredNorm())) return false;
    grow(k + 1);
    l_.row(k).head(k) = l.transpose();
    l_(k, k) = std::sqrt(d2);
    cols_.push_back(j);
    atb_.conservativeResize(k + 1);
    atb_[k] = aj.dot(b_);
    return true;
  }

  void rebuild(std::vector<int> cols) {
    cols_.clear();
    atb_.resize(0);
    for (int j : cols) append(j);
  }

  Eigen::VectorXd solve() const {
    const int k = size();
    const auto l = l_.topLeftCorner(k, k).triangularView<Eigen::Lower>();
    Eigen::VectorXd y = l.solve(atb_);
    return l.transpose().solve(y);
  }

 private:
  void grow(int k) {
    if (l_.rows() >= k) return;
    const int cap = std::max<int>(k, 2 * static_cast<int>(l_.rows()));
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(cap, cap);
    next.topLeftCorner(l_.rows(), l_.cols()) = l_;
    l_.swap(next);
  }

  const Eigen::MatrixXd& a_;
  const Eigen::VectorXd& b_;
  Eigen::MatrixXd l_;
  Eigen::VectorXd atb_;
  std::vector<int> cols_;
};

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  if (a.rows() != b.size()) throw std::invalid_argument("nnls: dimension mismatch");
  const int n = static_cast<int>(a.cols());
  if (max_iterations <= 0) max_iterations = 3 * n + 100;
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().maxCoeff() *
                     static_cast<double>(std::max(a.rows(), a.cols()));

  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  std::vector<char> passive(n, 0), excluded(n, 0);
  GrowingCholesky chol(a, b);

  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    const Eigen::VectorXd w = a.transpose() * (b - a * res.x);
    int t = -1;
    double best = tol;
    for (int j = 0; j < n; ++j) {
      if (!passive[j] && !excluded[j] && w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) {
      res.converged = true;
      break;
    }
    if (!chol.append(t)) {
      excluded[t] = 1;
      continue;
    }
    passive[t] = 1;
    std::fill(excluded.begin(), excluded.end(), 0);

    for (;;) {
      const Eigen::VectorXd s = chol.solve();
      const auto& cols = chol.cols();
      double alpha = 1.0;
      int blocking = -1;
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (s[i] <= 0.0) {
          const double xi = res.x[cols[i]];
          const double step = xi / (xi - s[i]);
          if (blocking < 0 || step < alpha) {
            alpha = step;
            blocking = cols[i];
          }
        }
      }
      if (blocking < 0) {
        for (std::size_t i = 0; i < cols.size(); ++i) res.x[cols[i]] = s[i];
        break;
      }
      std::vector<int> keep;
      for (std::size_t i = 0; i < cols.size(); ++i) {
        const int j = cols[i];
        res.x[j] += alpha * (s[i] - res.x[j]);
        if (j == blocking || res.x[j] <= tol) {
          res.x[j] = 0.0;
          passive[j] = 0;
        } else {
          keep.push_back(j);
        }
      }
      chol.rebuild(keep);
      for (int j : keep) passive[j] = 0;
      for (int j : chol.cols()) passive[j] = 1;
      for (int j : keep) {
        if (!passive[j]) res.x[j] = 0.0;
      }
      if (chol.size() == 0) break;
    }
  }
  res.residual = (a * res.x - b).norm();
  return res;
}

}  // namespace sfcb
