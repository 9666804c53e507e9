#include "corrdistill/corrvol.hpp"

namespace corrdistill {

CorrVolume feature_correspondence(const FeatureMap& f, const FeatureMap& g) {
  if (f.channels != g.channels)
    throw Error(ErrorCode::kDimension, "feature_correspondence: channel mismatch");
  const Matrix fn = normalize_columns(f.as_matrix());
  const Matrix gn = normalize_columns(g.as_matrix());
  const Matrix dots = fn.transpose() * gn;
  CorrVolume out(f.height, f.width, g.height, g.width);
  for (std::size_t s = 0; s < out.sources(); ++s)
    for (std::size_t t = 0; t < out.targets(); ++t)
      out.at(s, t) = dots(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
  return out;
}

CorrVolume spatial_center(const CorrVolume& volume) {
  CorrVolume out = volume;
  const std::size_t nt = volume.targets();
  if (nt == 0) return out;
  for (std::size_t s = 0; s < volume.sources(); ++s) {
    double mean = 0.0;
    for (std::size_t t = 0; t < nt; ++t) mean += volume.at(s, t);
    mean /= static_cast<double>(nt);
    for (std::size_t t = 0; t < nt; ++t) out.at(s, t) = volume.at(s, t) - mean;
  }
  return out;
}

CoOccurrenceVolume label_cooccurrence(const LabelMap& k, const LabelMap& l) {
  CoOccurrenceVolume out;
  out.h = k.height;
  out.w = k.width;
  out.i = l.height;
  out.j = l.width;
  out.value.assign(out.sources() * out.targets(), 0);
  out.valid.assign(out.sources() * out.targets(), 0);
  for (std::size_t s = 0; s < out.sources(); ++s) {
    const std::uint8_t a = k.data[s];
    for (std::size_t t = 0; t < out.targets(); ++t) {
      const std::uint8_t b = l.data[t];
      const std::size_t idx = s * out.targets() + t;
      if (a == kIgnoreLabel || b == kIgnoreLabel) continue;
      out.valid[idx] = 1;
      out.value[idx] = a == b ? 1 : 0;
    }
  }
  return out;
}

}  // namespace corrdistill
