#pragma once

// Selective-dependence classification (SDC) data: each instance is a mosaic of
// m segment vectors in R^d, exactly one of which (the foreground) determines
// the class label. Indices (label, fg_index) are zero-based throughout.

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "attnflow/common.hpp"
#include "attnflow/io.hpp"
#include "attnflow/rng.hpp"

namespace attnflow {

enum class SdcMode { OrthoZeroBg, OrthoRademacherBg, GaussianClusters };

inline std::string_view to_string(SdcMode m) {
  switch (m) {
    case SdcMode::OrthoZeroBg: return "ortho-zero";
    case SdcMode::OrthoRademacherBg: return "ortho-rademacher";
    case SdcMode::GaussianClusters: return "gaussian";
  }
  return "?";
}

inline SdcMode parse_sdc_mode(std::string_view s) {
  if (s == "ortho-zero") return SdcMode::OrthoZeroBg;
  if (s == "ortho-rademacher") return SdcMode::OrthoRademacherBg;
  if (s == "gaussian") return SdcMode::GaussianClusters;
  throw ConfigError("unknown data mode '" + std::string(s) + "'");
}

struct SdcConfig {
  std::size_t d = 2;
  std::size_t m = 2;
  std::size_t C = 2;
  SdcMode mode = SdcMode::OrthoZeroBg;
  double fg_scale = 1.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (C < 2) throw ConfigError("C must be at least 2");
    if (m < 2) throw ConfigError("m must be at least 2");
    if (d < C) throw ConfigError("d must be at least C");
    if (mode == SdcMode::OrthoRademacherBg && d < C + 1)
      throw ConfigError("ortho-rademacher mode needs d >= C + 1");
    if (!(fg_scale > 0.0) || !std::isfinite(fg_scale)) throw ConfigError("fg_scale must be positive");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
      throw ConfigError("noise_std must be nonnegative");
  }

  bool operator==(const SdcConfig&) const = default;
};

struct MosaicInstance {
  Matrix segments;  ///< d x m, columns are segments
  Index label = 0;
  Index fg_index = 0;
};

struct SdcDataset {
  SdcConfig config;
  std::vector<MosaicInstance> instances;
  Matrix basis;                       ///< d x C orthonormal foreground directions
  std::optional<Vector> bg_direction;  ///< unit background direction (ortho-rademacher)

  std::size_t size() const { return instances.size(); }
};

/// Random d x C matrix orthonormalised by modified Gram-Schmidt with one
/// re-orthogonalisation pass.
inline Matrix make_orthonormal_basis(std::size_t d, std::size_t C, std::uint64_t seed) {
  if (d < C) throw DimensionError("orthonormal basis needs d >= C");
  Rng rng = make_stream(seed, Stream::Basis);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix q(static_cast<Index>(d), static_cast<Index>(C));
  for (Index j = 0; j < q.cols(); ++j)
    for (Index i = 0; i < q.rows(); ++i) q(i, j) = normal(rng);

  for (Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
    const double n = q.col(j).norm();
    if (!(n > 1e-8)) throw DimensionError("degenerate draw while orthonormalising basis");
    q.col(j) /= n;
  }
  return q;
}

namespace detail {

inline Vector orthogonal_unit_direction(const Matrix& basis, std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::Background);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector b(basis.rows());
  for (Index i = 0; i < b.size(); ++i) b(i) = normal(rng);
  for (int pass = 0; pass < 2; ++pass)
    for (Index k = 0; k < basis.cols(); ++k) b -= basis.col(k).dot(b) * basis.col(k);
  const double n = b.norm();
  if (!(n > 1e-8)) throw DimensionError("degenerate background direction draw");
  return b / n;
}

}  // namespace detail

/// Dataset shell with basis (and background direction) but no instances.
inline SdcDataset make_context(const SdcConfig& config) {
  config.validate();
  SdcDataset ds;
  ds.config = config;
  ds.basis = make_orthonormal_basis(config.d, config.C, config.seed);
  if (config.mode == SdcMode::OrthoRademacherBg)
    ds.bg_direction = detail::orthogonal_unit_direction(ds.basis, config.seed);
  return ds;
}

inline MosaicInstance sample_mosaic(const SdcDataset& ctx, Rng& rng) {
  const auto& cfg = ctx.config;
  const Index d = static_cast<Index>(cfg.d), m = static_cast<Index>(cfg.m);
  std::uniform_int_distribution<Index> pick_label(0, static_cast<Index>(cfg.C) - 1);
  std::uniform_int_distribution<Index> pick_segment(0, m - 1);

  MosaicInstance inst;
  inst.label = pick_label(rng);
  inst.fg_index = pick_segment(rng);
  inst.segments = Matrix::Zero(d, m);

  const Vector mean = cfg.fg_scale * ctx.basis.col(inst.label);
  switch (cfg.mode) {
    case SdcMode::OrthoZeroBg:
      inst.segments.col(inst.fg_index) = mean;
      break;
    case SdcMode::OrthoRademacherBg: {
      std::bernoulli_distribution coin(0.5);
      for (Index j = 0; j < m; ++j) {
        if (j == inst.fg_index)
          inst.segments.col(j) = mean;
        else
          inst.segments.col(j) = coin(rng) ? Vector(*ctx.bg_direction) : Vector(-*ctx.bg_direction);
      }
      break;
    }
    case SdcMode::GaussianClusters: {
      std::normal_distribution<double> normal(0.0, cfg.noise_std);
      for (Index j = 0; j < m; ++j) {
        for (Index i = 0; i < d; ++i) inst.segments(i, j) = cfg.noise_std > 0.0 ? normal(rng) : 0.0;
        if (j == inst.fg_index) inst.segments.col(j) += mean;
      }
      break;
    }
  }
  return inst;
}

/// n instances drawn from sample stream `split` (0 = train, 1 = test, ...).
/// All splits of one config share the same basis.
inline SdcDataset generate_dataset(const SdcConfig& config, std::size_t n, std::uint64_t split = 0) {
  if (n < 1) throw ConfigError("dataset size must be at least 1");
  SdcDataset ds = make_context(config);
  Rng rng = make_stream(config.seed, Stream::Samples, split);
  ds.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.instances.push_back(sample_mosaic(ds, rng));
  return ds;
}

struct WeightedInstance {
  MosaicInstance instance;
  double probability = 0.0;
};

inline constexpr std::size_t kMaxPopulationAtoms = 1'000'000;

/// Every atom of the generative distribution with its exact probability.
inline std::vector<WeightedInstance> enumerate_population(const SdcDataset& ctx) {
  const auto& cfg = ctx.config;
  const Index d = static_cast<Index>(cfg.d), m = static_cast<Index>(cfg.m),
              C = static_cast<Index>(cfg.C);
  std::vector<WeightedInstance> atoms;
  switch (cfg.mode) {
    case SdcMode::GaussianClusters:
      throw UnsupportedModeError("population enumeration needs an orthogonal mode");
    case SdcMode::OrthoZeroBg: {
      const double p = 1.0 / static_cast<double>(C * m);
      atoms.reserve(static_cast<std::size_t>(C * m));
      for (Index y = 0; y < C; ++y)
        for (Index z = 0; z < m; ++z) {
          MosaicInstance inst{Matrix::Zero(d, m), y, z};
          inst.segments.col(z) = cfg.fg_scale * ctx.basis.col(y);
          atoms.push_back({std::move(inst), p});
        }
      break;
    }
    case SdcMode::OrthoRademacherBg: {
      if (m - 1 >= 20) throw SizeError("population too large to enumerate");
      const std::size_t patterns = std::size_t{1} << (m - 1);
      const std::size_t count = patterns * static_cast<std::size_t>(C * m);
      if (count > kMaxPopulationAtoms) throw SizeError("population too large to enumerate");
      const double p = 1.0 / static_cast<double>(count);
      atoms.reserve(count);
      const Vector& b = *ctx.bg_direction;
      for (Index y = 0; y < C; ++y)
        for (Index z = 0; z < m; ++z)
          for (std::size_t bits = 0; bits < patterns; ++bits) {
            MosaicInstance inst{Matrix::Zero(d, m), y, z};
            std::size_t bit = 0;
            for (Index j = 0; j < m; ++j) {
              if (j == z) {
                inst.segments.col(j) = cfg.fg_scale * ctx.basis.col(y);
              } else {
                inst.segments.col(j) = ((bits >> bit) & 1U) ? Vector(b) : Vector(-b);
                ++bit;
              }
            }
            atoms.push_back({std::move(inst), p});
          }
      break;
    }
  }
  return atoms;
}

inline std::vector<WeightedInstance> enumerate_population(const SdcConfig& config) {
  return enumerate_population(make_context(config));
}

// Serialization -------------------------------------------------------------

inline io::HeaderBlock dataset_header(const SdcConfig& c, std::size_t n) {
  io::HeaderBlock h;
  h.set("d", std::uint64_t{c.d})
      .set("m", std::uint64_t{c.m})
      .set("C", std::uint64_t{c.C})
      .set("mode", std::string(to_string(c.mode)))
      .set("fg_scale", c.fg_scale)
      .set("noise_std", c.noise_std)
      .set("seed", c.seed)
      .set("n", std::uint64_t{n});
  return h;
}

/// Header block followed by one CSV row per instance:
/// label,fg_index,<d*m entries column-major>.
inline void write_dataset(std::ostream& os, const SdcDataset& ds, const io::HeaderBlock& extra = {}) {
  io::HeaderBlock h = dataset_header(ds.config, ds.size());
  for (const auto& [k, v] : extra.entries()) h.set(k, v);
  h.write(os);
  for (const auto& inst : ds.instances) {
    os << inst.label << ',' << inst.fg_index;
    const Matrix& X = inst.segments;
    for (Index j = 0; j < X.cols(); ++j)
      for (Index i = 0; i < X.rows(); ++i) os << ',' << io::fmt17(X(i, j));
    os << '\n';
  }
}

inline SdcDataset read_dataset(std::istream& is) {
  std::string line;
  bool has_line = false;
  const auto kv = io::read_header(is, line, has_line);
  SdcConfig cfg;
  cfg.d = static_cast<std::size_t>(io::parse_int(io::require_key(kv, "d")));
  cfg.m = static_cast<std::size_t>(io::parse_int(io::require_key(kv, "m")));
  cfg.C = static_cast<std::size_t>(io::parse_int(io::require_key(kv, "C")));
  cfg.mode = parse_sdc_mode(io::require_key(kv, "mode"));
  cfg.fg_scale = io::parse_double(io::require_key(kv, "fg_scale"));
  cfg.noise_std = io::parse_double(io::require_key(kv, "noise_std"));
  cfg.seed = static_cast<std::uint64_t>(std::stoull(io::require_key(kv, "seed")));
  const auto n = static_cast<std::size_t>(io::parse_int(io::require_key(kv, "n")));

  SdcDataset ds = make_context(cfg);
  ds.instances.reserve(n);
  const Index d = static_cast<Index>(cfg.d), m = static_cast<Index>(cfg.m);
  while (has_line) {
    if (!line.empty()) {
      auto fields = io::split(line, ',');
      if (fields.size() != static_cast<std::size_t>(2 + d * m))
        throw FormatError("dataset row has " + std::to_string(fields.size()) + " fields");
      MosaicInstance inst{Matrix(d, m), io::parse_int(fields[0]), io::parse_int(fields[1])};
      if (inst.label < 0 || inst.label >= static_cast<Index>(cfg.C) || inst.fg_index < 0 ||
          inst.fg_index >= m)
        throw FormatError("dataset row index out of range");
      std::size_t f = 2;
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < d; ++i) inst.segments(i, j) = io::parse_double(fields[f++]);
      ds.instances.push_back(std::move(inst));
    }
    has_line = static_cast<bool>(std::getline(is, line));
    if (has_line && !line.empty() && line.back() == '\r') line.pop_back();
  }
  if (ds.instances.size() != n)
    throw FormatError("dataset header says n=" + std::to_string(n) + " but found " +
                      std::to_string(ds.instances.size()) + " rows");
  return ds;
}

}  // namespace attnflow
