#pragma once

#include <cmath>
#include <limits>

#include "attnflow/common.hpp"

namespace attnflow {

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Index argmax_lowest(const Eigen::DenseBase<Derived>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

template <typename Derived>
void require_no_nan(const Eigen::DenseBase<Derived>& v) {
  for (Index i = 0; i < v.size(); ++i)
    if (std::isnan(v(i))) throw InvalidInputError("NaN entry in softmax input");
}

/// log(sum(exp(v))). Entries equal to -inf are allowed as long as one is finite.
template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - mx);
  return mx + std::log(s);
}

template <typename Derived>
Vector log_softmax(const Eigen::DenseBase<Derived>& v) {
  require_no_nan(v);
  const double lse = logsumexp(v);
  return (v.derived().array() - lse).matrix();
}

/// Column-wise log-softmax of a logits matrix.
inline Matrix column_log_softmax(const Matrix& logits) {
  require_no_nan(logits.reshaped());
  Matrix out(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) out.col(j) = logits.col(j).array() - logsumexp(logits.col(j));
  return out;
}

/// Max-subtracted softmax; shift invariant and overflow free.
template <typename Derived>
Vector softmax(const Eigen::DenseBase<Derived>& v) {
  require_no_nan(v);
  const double mx = v.maxCoeff();
  Vector e = (v.derived().array() - mx).exp().matrix();
  return e / e.sum();
}

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace attnflow
