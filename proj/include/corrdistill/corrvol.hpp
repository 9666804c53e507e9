#pragma once

#include "corrdistill/tensor.hpp"

namespace corrdistill {

/// H×W×I×J correspondence tensor, indexed [h][w][i][j].
struct CorrVolume {
  std::size_t h = 0, w = 0, i = 0, j = 0;
  std::vector<double> data;

  CorrVolume() = default;
  CorrVolume(std::size_t h_, std::size_t w_, std::size_t i_, std::size_t j_)
      : h(h_), w(w_), i(i_), j(j_), data(h_ * w_ * i_ * j_, 0.0) {}

  std::size_t sources() const { return h * w; }
  std::size_t targets() const { return i * j; }
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * w + b) * i + c) * j + d];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data[((a * w + b) * i + c) * j + d];
  }
  // Flat (source, target) access with source = h·W + w, target = i·J + j.
  double& at(std::size_t source, std::size_t target) { return data[source * targets() + target]; }
  double at(std::size_t source, std::size_t target) const { return data[source * targets() + target]; }
};

/// Label co-occurrence: value[s][t] = 1 iff both pixels carry the same class;
/// valid[s][t] = 0 when either pixel is ignored.
struct CoOccurrenceVolume {
  std::size_t h = 0, w = 0, i = 0, j = 0;
  std::vector<std::uint8_t> value;
  std::vector<std::uint8_t> valid;

  std::size_t sources() const { return h * w; }
  std::size_t targets() const { return i * j; }
  bool at(std::size_t source, std::size_t target) const { return value[source * targets() + target] != 0; }
  bool is_valid(std::size_t source, std::size_t target) const {
    return valid[source * targets() + target] != 0;
  }
};

CorrVolume feature_correspondence(const FeatureMap& f, const FeatureMap& g);
CorrVolume spatial_center(const CorrVolume& volume);
CoOccurrenceVolume label_cooccurrence(const LabelMap& k, const LabelMap& l);

}  // namespace corrdistill
