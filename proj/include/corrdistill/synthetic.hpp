#pragma once

#include <cstdint>

#include "corrdistill/crf.hpp"
#include "corrdistill/tensorio.hpp"

namespace corrdistill {

struct SyntheticCorpusConfig {
  std::size_t n_images = 50;
  std::size_t grid = 16;
  std::size_t n_classes = 5;
  std::size_t channels = 32;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

// Each image is split by one random horizontal and one random vertical cut
// into four blocks with uniformly drawn classes. A pixel's feature is the
// class basis vector under a fixed random orthogonal map, plus N(0, σ²) noise
// per channel, renormalized. The same seed draws the same partitions and the
// same unit-variance noise for every σ.
Dataset make_synthetic_corpus(const SyntheticCorpusConfig& config);

struct TwoRegionDemo {
  RgbImage image;
  LabelMap truth;
  UnaryField unary;  // two classes
};

// Square image split vertically into two flat colors. Each pixel's unary
// favors its true region except for a `label_noise` fraction of pixels whose
// preference is flipped; the favored label gets probability `confidence`.
TwoRegionDemo make_two_region_demo(std::size_t size, double label_noise, std::uint64_t seed,
                                   double confidence = 0.7);

// Random orthogonal C×C matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(std::size_t n, std::uint64_t seed);

}  // namespace corrdistill
