#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace attnflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Attention paradigm: soft attention, hard attention, or latent-variable
/// marginal likelihood.
enum class Paradigm { SA, HA, LV };

inline constexpr Paradigm kAllParadigms[] = {Paradigm::SA, Paradigm::HA, Paradigm::LV};

// Errors ---------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// Raised when a training loop or integrator produces a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

inline std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::SA: return "sa";
    case Paradigm::HA: return "ha";
    case Paradigm::LV: return "lv";
  }
  return "?";
}

inline Paradigm parse_paradigm(std::string_view s) {
  if (s == "sa" || s == "SA" || s == "soft") return Paradigm::SA;
  if (s == "ha" || s == "HA" || s == "hard") return Paradigm::HA;
  if (s == "lv" || s == "LV" || s == "lvml") return Paradigm::LV;
  throw ConfigError("unknown paradigm '" + std::string(s) + "'");
}

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace attnflow
