#include "corrdistill/disthead.hpp"

#include <algorithm>
#include <cmath>

namespace corrdistill {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

struct Corner {
  Eigen::Index index;
  double weight;
};

// Align-corners bilinear stencil for one location.
std::array<Corner, 4> stencil(std::size_t height, std::size_t width, const std::array<double, 2>& yx) {
  const double y = std::clamp(yx[0], 0.0, 1.0) * static_cast<double>(height - 1);
  const double x = std::clamp(yx[1], 0.0, 1.0) * static_cast<double>(width - 1);
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, height - 1);
  const std::size_t x1 = std::min(x0 + 1, width - 1);
  const double dy = y - static_cast<double>(y0);
  const double dx = x - static_cast<double>(x0);
  auto idx = [width](std::size_t r, std::size_t c) { return static_cast<Eigen::Index>(r * width + c); };
  return {{{idx(y0, x0), (1 - dy) * (1 - dx)},
           {idx(y0, x1), (1 - dy) * dx},
           {idx(y1, x0), dy * (1 - dx)},
           {idx(y1, x1), dy * dx}}};
}

}  // namespace

HeadParams HeadParams::zeros(std::size_t in_channels, std::size_t code_dim, std::size_t hidden) {
  const auto c = static_cast<Eigen::Index>(in_channels);
  const auto k = static_cast<Eigen::Index>(code_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  HeadParams p;
  p.lin_weight = Matrix::Zero(k, c);
  p.lin_bias = Matrix::Zero(k, 1);
  p.hid_weight = Matrix::Zero(h, c);
  p.hid_bias = Matrix::Zero(h, 1);
  p.out_weight = Matrix::Zero(k, h);
  p.out_bias = Matrix::Zero(k, 1);
  return p;
}

HeadParams HeadParams::init(std::size_t in_channels, std::size_t code_dim, std::uint64_t seed,
                            std::size_t hidden) {
  if (in_channels == 0 || code_dim == 0)
    throw Error(ErrorCode::kConfiguration, "head dimensions must be positive");
  if (hidden == 0) hidden = in_channels;
  std::mt19937_64 rng(seed);
  const auto c = static_cast<Eigen::Index>(in_channels);
  const auto k = static_cast<Eigen::Index>(code_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(in_channels));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  HeadParams p;
  p.lin_weight = uniform_matrix(k, c, in_bound, rng);
  p.lin_bias = uniform_matrix(k, 1, in_bound, rng);
  p.hid_weight = uniform_matrix(h, c, in_bound, rng);
  p.hid_bias = uniform_matrix(h, 1, in_bound, rng);
  p.out_weight = uniform_matrix(k, h, hid_bound, rng);
  p.out_bias = uniform_matrix(k, 1, hid_bound, rng);
  return p;
}

std::array<Matrix*, 6> HeadParams::tensors() {
  return {&lin_weight, &lin_bias, &hid_weight, &hid_bias, &out_weight, &out_bias};
}

std::array<const Matrix*, 6> HeadParams::tensors() const {
  return {&lin_weight, &lin_bias, &hid_weight, &hid_bias, &out_weight, &out_bias};
}

bool HeadParams::all_finite() const {
  for (const Matrix* t : tensors())
    if (!t->allFinite()) return false;
  return true;
}

HeadGrads zeros_like(const HeadParams& p) {
  HeadGrads g = HeadParams::zeros(p.in_channels(), p.code_dim(), p.hidden());
  return g;
}

void accumulate(HeadGrads& into, const HeadGrads& other, double scale) {
  auto dst = into.tensors();
  auto src = other.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += scale * *src[i];
}

DropoutMask DropoutMask::all_keep(std::size_t channels, double keep_prob) {
  return DropoutMask{std::vector<std::uint8_t>(channels, 1), keep_prob};
}

DropoutMask DropoutMask::sample(std::size_t channels, double drop_prob, std::mt19937_64& rng) {
  if (drop_prob < 0.0 || drop_prob >= 1.0)
    throw Error(ErrorCode::kConfiguration, "dropout probability must be in [0, 1)");
  std::bernoulli_distribution keep(1.0 - drop_prob);
  DropoutMask mask;
  mask.keep_prob = 1.0 - drop_prob;
  mask.keep.resize(channels);
  for (auto& k : mask.keep) k = keep(rng) ? 1 : 0;
  return mask;
}

HeadForward head_forward(const Matrix& features, const HeadParams& params, const DropoutMask* mask) {
  if (static_cast<std::size_t>(features.rows()) != params.in_channels())
    throw Error(ErrorCode::kDimension, "head_forward: feature channels do not match the head");
  HeadForward out;
  HeadCache& cache = out.cache;
  cache.input = features;
  if (mask != nullptr) {
    if (mask->keep.size() != params.in_channels())
      throw Error(ErrorCode::kDimension, "head_forward: dropout mask size mismatch");
    for (Eigen::Index c = 0; c < features.rows(); ++c) {
      const double scale = mask->keep[static_cast<std::size_t>(c)] ? 1.0 / mask->keep_prob : 0.0;
      cache.input.row(c) *= scale;
    }
    cache.mask = *mask;
  }
  cache.hidden_pre = params.hid_weight * cache.input;
  cache.hidden_pre.colwise() += params.hid_bias.col(0);
  cache.hidden_act = cache.hidden_pre.cwiseMax(0.0);
  out.codes = params.lin_weight * cache.input + params.out_weight * cache.hidden_act;
  out.codes.colwise() += params.lin_bias.col(0) + params.out_bias.col(0);
  cache.params_version = params.version;
  cache.params = &params;
  return out;
}

FeatureMap head_forward(const FeatureMap& features, const HeadParams& params) {
  const HeadForward fwd = head_forward(features.as_matrix(), params);
  return FeatureMap::from_matrix(fwd.codes, features.height, features.width);
}

HeadBackward head_backward(const Matrix& grad_codes, const HeadCache& cache, const HeadParams& params) {
  if (cache.params != &params || cache.params_version != params.version)
    throw Error(ErrorCode::kContract, "head_backward: cache does not belong to these parameters");
  if (grad_codes.rows() != params.lin_weight.rows() || grad_codes.cols() != cache.input.cols())
    throw Error(ErrorCode::kDimension, "head_backward: gradient shape mismatch");
  HeadBackward out;
  HeadGrads& g = out.params;
  g.lin_weight = grad_codes * cache.input.transpose();
  g.lin_bias = grad_codes.rowwise().sum();
  g.out_weight = grad_codes * cache.hidden_act.transpose();
  g.out_bias = g.lin_bias;
  // ReLU subgradient is 0 at exactly zero.
  const Matrix grad_hidden = (params.out_weight.transpose() * grad_codes)
                                 .cwiseProduct((cache.hidden_pre.array() > 0.0).cast<double>().matrix());
  g.hid_weight = grad_hidden * cache.input.transpose();
  g.hid_bias = grad_hidden.rowwise().sum();
  out.input = params.lin_weight.transpose() * grad_codes + params.hid_weight.transpose() * grad_hidden;
  if (cache.mask) {
    for (Eigen::Index c = 0; c < out.input.rows(); ++c) {
      const double scale = cache.mask->keep[static_cast<std::size_t>(c)] ? 1.0 / cache.mask->keep_prob : 0.0;
      out.input.row(c) *= scale;
    }
  }
  return out;
}

SampledLocations sample_locations(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampledLocations locs;
  locs.yx.resize(n);
  for (auto& p : locs.yx) {
    p[0] = unit(rng);
    p[1] = unit(rng);
  }
  return locs;
}

SampledLocations grid_locations(std::size_t height, std::size_t width) {
  SampledLocations locs;
  locs.yx.reserve(height * width);
  for (std::size_t h = 0; h < height; ++h)
    for (std::size_t w = 0; w < width; ++w)
      locs.yx.push_back({height > 1 ? static_cast<double>(h) / static_cast<double>(height - 1) : 0.0,
                         width > 1 ? static_cast<double>(w) / static_cast<double>(width - 1) : 0.0});
  return locs;
}

Matrix bilinear_sample(const Matrix& map, std::size_t height, std::size_t width,
                       const SampledLocations& locs) {
  if (static_cast<std::size_t>(map.cols()) != height * width)
    throw Error(ErrorCode::kDimension, "bilinear_sample: map columns != H·W");
  Matrix out = Matrix::Zero(map.rows(), static_cast<Eigen::Index>(locs.size()));
  for (std::size_t n = 0; n < locs.size(); ++n) {
    for (const Corner& c : stencil(height, width, locs.yx[n]))
      if (c.weight != 0.0) out.col(static_cast<Eigen::Index>(n)) += c.weight * map.col(c.index);
  }
  return out;
}

Matrix bilinear_sample_backward(const Matrix& grad_samples, std::size_t height, std::size_t width,
                                const SampledLocations& locs) {
  Matrix grad = Matrix::Zero(grad_samples.rows(), static_cast<Eigen::Index>(height * width));
  for (std::size_t n = 0; n < locs.size(); ++n) {
    for (const Corner& c : stencil(height, width, locs.yx[n]))
      if (c.weight != 0.0) grad.col(c.index) += c.weight * grad_samples.col(static_cast<Eigen::Index>(n));
  }
  return grad;
}

}  // namespace corrdistill
