#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace corrdistill {

// Every failure raised by the library carries one of these codes; the C API
// forwards them unchanged.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kDimension = 2,
  kIo = 3,
  kBadMagic = 4,
  kBadDtype = 5,
  kSizeMismatch = 6,
  kNonFinite = 7,
  kConfiguration = 8,
  kDegenerateTarget = 9,
  kDegenerateInput = 10,
  kResource = 11,
  kContract = 12,
  kParse = 13,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr std::uint8_t kIgnoreLabel = 255;
inline constexpr double kNormEps = 1e-8;

// Column-per-location views are used throughout: a C×H×W map is handled as a
// C×(H·W) matrix with column index h·W + w.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense C×H×W feature tensor, channel-major then row-major, stored as f32.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::size_t locations() const { return height * width; }
  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return data[(c * height + h) * width + w];
  }
  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * height + h) * width + w];
  }

  // C×(H·W) double-precision copy.
  Matrix as_matrix() const;
  static FeatureMap from_matrix(const Matrix& m, std::size_t h, std::size_t w);

  // Throws kDimension / kNonFinite when the invariants are broken.
  void validate() const;

  bool operator==(const FeatureMap&) const = default;
};

/// Per-pixel class indices; kIgnoreLabel marks pixels excluded from metrics.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), data(h * w, fill) {}

  std::uint8_t& at(std::size_t h, std::size_t w) { return data[h * width + w]; }
  std::uint8_t at(std::size_t h, std::size_t w) const { return data[h * width + w]; }

  bool operator==(const LabelMap&) const = default;
};

/// Interleaved RGB image with channels in [0,1].
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;  // (h·W + w)·3 + channel

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w) : height(h), width(w), data(h * w * 3, 0.0f) {}

  float& at(std::size_t h, std::size_t w, std::size_t ch) { return data[(h * width + w) * 3 + ch]; }
  float at(std::size_t h, std::size_t w, std::size_t ch) const {
    return data[(h * width + w) * 3 + ch];
  }
};

// Divides every column by max(‖column‖₂, eps).
Matrix normalize_columns(const Matrix& m, double eps = kNormEps);

// Backpropagates through normalize_columns: given dL/d(normalized), returns dL/d(input).
Matrix normalize_columns_backward(const Matrix& input, const Matrix& grad_normalized,
                                  double eps = kNormEps);

}  // namespace corrdistill
