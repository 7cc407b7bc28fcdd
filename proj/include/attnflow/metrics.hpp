#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include "attnflow/fcam.hpp"
#include "attnflow/io.hpp"
#include "attnflow/sdc_data.hpp"

namespace attnflow {

/// One instance's position in the focus-prediction plane.
struct FocusPrediction {
  double focus = 0.0;  ///< a_z, attention on the true foreground
  double score = 0.0;  ///< s_y, model score of the true class
};

/// B x B joint histogram. Row index bins the true-class score and column index
/// bins the foreground attention, both ascending over [0, 1].
struct HeatMap {
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> bins;
  std::size_t B = 5;
  std::size_t total = 0;
  double saif_threshold = 0.8;
  std::vector<FocusPrediction> points;  ///< raw values, used for SAIF
};

/// Bin of v in [0, 1] split into B equal intervals; interior edges go up and
/// 1.0 falls in the last bin.
inline std::size_t bin_index(double v, std::size_t B) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidInputError("heat-map value outside [0, 1]");
  const auto i = static_cast<std::size_t>(std::floor(v * static_cast<double>(B)));
  return std::min(i, B - 1);
}

inline HeatMap heatmap_from_points(std::vector<FocusPrediction> points, std::size_t B, double threshold) {
  if (B < 2) throw InvalidInputError("heat map needs at least 2 bins");
  HeatMap hm;
  hm.B = B;
  hm.saif_threshold = threshold;
  hm.bins.setZero(static_cast<Index>(B), static_cast<Index>(B));
  for (const auto& pt : points)
    ++hm.bins(static_cast<Index>(bin_index(pt.score, B)), static_cast<Index>(bin_index(pt.focus, B)));
  hm.total = points.size();
  hm.points = std::move(points);
  return hm;
}

/// Attention mass on a set of foreground positions (multi-token foregrounds).
inline double aggregate_focus(const Vector& attention, std::span<const Index> foreground) {
  double s = 0.0;
  for (Index j : foreground) {
    require_dims(j >= 0 && j < attention.size(), "foreground index out of range");
    s += attention(j);
  }
  return s;
}

inline FocusPrediction focus_prediction(const FcamParams& p, const MosaicInstance& inst, Paradigm paradigm) {
  require_dims(inst.fg_index >= 0 && inst.fg_index < inst.segments.cols(), "instance lacks a valid fg_index");
  require_dims(inst.label >= 0 && inst.label < p.C(), "label out of range for parameters");
  return {attention_weights(p, inst.segments)(inst.fg_index), class_scores(p, inst.segments, paradigm)(inst.label)};
}

inline HeatMap focus_prediction_heatmap(const FcamParams& p, const SdcDataset& ds, Paradigm paradigm,
                                        std::size_t B = 5, double threshold = 0.8) {
  std::vector<FocusPrediction> pts;
  pts.reserve(ds.size());
  for (const auto& inst : ds.instances) pts.push_back(focus_prediction(p, inst, paradigm));
  return heatmap_from_points(std::move(pts), B, threshold);
}

/// Fraction of instances with both a_z and s_y strictly above the threshold.
inline double saif(const HeatMap& hm, double threshold) {
  if (hm.points.empty()) throw InvalidInputError("heat map is empty");
  std::size_t hits = 0;
  for (const auto& pt : hm.points)
    if (pt.focus > threshold && pt.score > threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(hm.points.size());
}

inline double saif(const HeatMap& hm) { return saif(hm, hm.saif_threshold); }

inline double accuracy(const FcamParams& p, const SdcDataset& ds, Paradigm paradigm) {
  if (ds.instances.empty()) throw InvalidInputError("dataset is empty");
  std::size_t correct = 0;
  for (const auto& inst : ds.instances)
    if (predict(p, inst.segments, paradigm) == inst.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

/// Counts with the highest score bin first, then a normalised copy and a
/// metadata block.
inline void write_heatmap_csv(std::ostream& os, const HeatMap& hm, Paradigm paradigm, double acc,
                              const io::HeaderBlock& header = {}) {
  header.write(os, "# ");
  const Index B = static_cast<Index>(hm.B);
  auto write_grid = [&](auto value) {
    for (Index r = B - 1; r >= 0; --r) {
      for (Index c = 0; c < B; ++c) os << (c ? "," : "") << value(r, c);
      os << '\n';
    }
  };
  os << "counts\n";
  write_grid([&](Index r, Index c) { return std::to_string(hm.bins(r, c)); });
  os << "fractions\n";
  const double n = hm.total ? static_cast<double>(hm.total) : 1.0;
  write_grid([&](Index r, Index c) { return io::fmt17(static_cast<double>(hm.bins(r, c)) / n); });
  os << "metadata\n";
  os << "threshold," << io::fmt17(hm.saif_threshold) << '\n';
  os << "saif," << io::fmt17(hm.total ? saif(hm) : 0.0) << '\n';
  os << "accuracy," << io::fmt17(acc) << '\n';
  os << "paradigm," << to_string(paradigm) << '\n';
  os << "n," << hm.total << '\n';
}

}  // namespace attnflow
