#pragma once

// Linear focus-classify attention model: focus f(x) = u.x scores each segment,
// classifier g(x) = W x maps a segment to C logits. No bias terms.

#include <istream>
#include <ostream>
#include <string>

#include "attnflow/common.hpp"
#include "attnflow/io.hpp"
#include "attnflow/numeric.hpp"

namespace attnflow {

struct FcamParams {
  Vector u;  ///< d
  Matrix W;  ///< C x d, row k is w_k

  static FcamParams zeros(std::size_t d, std::size_t C) {
    return {Vector::Zero(static_cast<Index>(d)), Matrix::Zero(static_cast<Index>(C), static_cast<Index>(d))};
  }
  Index d() const { return u.size(); }
  Index C() const { return W.rows(); }
  bool finite() const { return u.allFinite() && W.allFinite(); }
};

inline void check_dims(const FcamParams& p, const Matrix& X) {
  require_dims(p.W.cols() == p.u.size(), "W columns must equal length of u");
  require_dims(X.rows() == p.u.size(), "segment dimension does not match parameters");
  require_dims(X.cols() >= 1, "instance has no segments");
}

/// u . x_j for every segment.
inline Vector focus_scores(const FcamParams& p, const Matrix& X) {
  check_dims(p, X);
  return X.transpose() * p.u;
}

inline Vector attention_weights(const FcamParams& p, const Matrix& X) {
  return softmax(focus_scores(p, X));
}

/// Class-probability vector under the inference procedure of `paradigm`.
/// HA classifies the argmax-focus segment (lowest index on ties).
inline Vector class_scores(const FcamParams& p, const Matrix& X, Paradigm paradigm) {
  const Vector f = focus_scores(p, X);
  switch (paradigm) {
    case Paradigm::SA: {
      const Vector a = softmax(f);
      return softmax(p.W * (X * a));
    }
    case Paradigm::LV: {
      const Vector a = softmax(f);
      const Matrix logits = p.W * X;
      Vector s = Vector::Zero(p.C());
      for (Index j = 0; j < X.cols(); ++j) s += a(j) * softmax(logits.col(j));
      return s;
    }
    case Paradigm::HA:
      return softmax(p.W * X.col(argmax_lowest(f)));
  }
  return {};
}

inline Index predict(const FcamParams& p, const Matrix& X, Paradigm paradigm) {
  return argmax_lowest(class_scores(p, X, paradigm));
}

// Serialization -------------------------------------------------------------

/// Header block (d, C plus extras), then one CSV row for u and C rows for W.
inline void write_params(std::ostream& os, const FcamParams& p, const io::HeaderBlock& extra = {}) {
  io::HeaderBlock h;
  h.set("d", std::uint64_t(p.d())).set("C", std::uint64_t(p.C()));
  for (const auto& [k, v] : extra.entries()) h.set(k, v);
  h.write(os);
  auto row = [&os](const auto& v) {
    for (Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << io::fmt17(v(i));
    os << '\n';
  };
  row(p.u);
  for (Index k = 0; k < p.C(); ++k) row(p.W.row(k));
}

inline FcamParams read_params(std::istream& is) {
  std::string line;
  bool has_line = false;
  const auto kv = io::read_header(is, line, has_line);
  const auto d = static_cast<std::size_t>(io::parse_int(io::require_key(kv, "d")));
  const auto C = static_cast<std::size_t>(io::parse_int(io::require_key(kv, "C")));
  FcamParams p = FcamParams::zeros(d, C);
  auto parse_row = [&](auto&& target) {
    if (!has_line) throw FormatError("parameter file truncated");
    auto fields = io::split(line, ',');
    if (fields.size() != d) throw FormatError("parameter row has wrong length");
    for (std::size_t i = 0; i < d; ++i) target(static_cast<Index>(i)) = io::parse_double(fields[i]);
    has_line = static_cast<bool>(std::getline(is, line));
  };
  parse_row(p.u);
  for (Index k = 0; k < p.C(); ++k) {
    auto r = p.W.row(k);
    parse_row(r);
  }
  return p;
}

}  // namespace attnflow
