#include "corrdistill/crf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "corrdistill/adam.hpp"

namespace corrdistill {

void CrfParams::validate() const {
  if (theta_alpha <= 0 || theta_beta <= 0 || theta_gamma <= 0)
    throw Error(ErrorCode::kConfiguration, "CRF bandwidths must be positive");
  if (iterations < 1) throw Error(ErrorCode::kConfiguration, "CRF needs at least one iteration");
  if (color_scale <= 0) throw Error(ErrorCode::kConfiguration, "CRF color_scale must be positive");
}

double crf_kernel(const Position& pos_i, const Position& pos_j, const Color& color_i,
                  const Color& color_j, const CrfParams& params) {
  const double dy = pos_i[0] - pos_j[0];
  const double dx = pos_i[1] - pos_j[1];
  const double pos_sq = dy * dy + dx * dx;
  double color_sq = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = (color_i[c] - color_j[c]) * params.color_scale;
    color_sq += d * d;
  }
  const double appearance =
      params.a * std::exp(-pos_sq / (2 * params.theta_alpha * params.theta_alpha) -
                          color_sq / (2 * params.theta_beta * params.theta_beta));
  const double smoothness = params.b * std::exp(-pos_sq / (2 * params.theta_gamma * params.theta_gamma));
  return appearance + smoothness;
}

namespace {

Position pixel_position(std::size_t pixel, std::size_t width) {
  return {static_cast<double>(pixel / width), static_cast<double>(pixel % width)};
}

Color pixel_color(const RgbImage& image, std::size_t pixel) {
  return {image.data[pixel * 3], image.data[pixel * 3 + 1], image.data[pixel * 3 + 2]};
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double top = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - top).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

LabelMap argmax_rows(const Matrix& m, std::size_t height, std::size_t width) {
  LabelMap labels(height, width);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    labels.data[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(best);
  }
  return labels;
}

}  // namespace

UnaryField unary_from_codes(const Matrix& codes, std::size_t height, std::size_t width,
                            const Matrix& centroids, double temperature) {
  if (static_cast<std::size_t>(codes.cols()) != height * width)
    throw Error(ErrorCode::kDimension, "unary_from_codes: code count != H·W");
  if (codes.rows() != centroids.rows())
    throw Error(ErrorCode::kDimension, "unary_from_codes: code dim differs from centroid dim");
  const Matrix sims = normalize_columns(codes).transpose() * normalize_columns(centroids);
  UnaryField unary(height, width, static_cast<std::size_t>(centroids.cols()));
  for (Eigen::Index p = 0; p < sims.rows(); ++p) {
    const Vector logits = sims.row(p).transpose() / temperature;
    const double top = logits.maxCoeff();
    const double lse = top + std::log((logits.array() - top).exp().sum());
    for (Eigen::Index k = 0; k < sims.cols(); ++k)
      unary.at(static_cast<std::size_t>(p), static_cast<std::size_t>(k)) = logits(k) - lse;
  }
  return unary;
}

UnaryField unary_from_feature_map(const FeatureMap& map) {
  UnaryField unary(map.height, map.width, map.channels);
  const std::size_t n = map.locations();
  for (std::size_t k = 0; k < map.channels; ++k)
    for (std::size_t p = 0; p < n; ++p) unary.at(p, k) = map.data[k * n + p];
  return unary;
}

FeatureMap unary_to_feature_map(const UnaryField& unary) {
  FeatureMap map(unary.classes, unary.height, unary.width);
  const std::size_t n = unary.height * unary.width;
  for (std::size_t k = 0; k < unary.classes; ++k)
    for (std::size_t p = 0; p < n; ++p) map.data[k * n + p] = static_cast<float>(unary.at(p, k));
  return map;
}

MeanFieldResult meanfield_infer(const UnaryField& unary, const RgbImage& image, const CrfParams& params,
                                const std::function<void(std::size_t, const Matrix&)>& observer) {
  params.validate();
  if (unary.height != image.height || unary.width != image.width)
    throw Error(ErrorCode::kDimension, "meanfield_refine: unary and image sizes differ");
  const std::size_t n = unary.height * unary.width;
  if (n > params.max_pixels)
    throw Error(ErrorCode::kResource, "meanfield_refine: image exceeds the dense pairwise limit");
  const auto k = static_cast<Eigen::Index>(unary.classes);

  Matrix unary_m(static_cast<Eigen::Index>(n), k);
  for (std::size_t p = 0; p < n; ++p)
    for (Eigen::Index c = 0; c < k; ++c) unary_m(static_cast<Eigen::Index>(p), c) = unary.at(p, static_cast<std::size_t>(c));

  Matrix q = unary_m;
  softmax_rows(q);
  std::vector<Position> pos(n);
  std::vector<Color> col(n);
  for (std::size_t p = 0; p < n; ++p) {
    pos[p] = pixel_position(p, image.width);
    col[p] = pixel_color(image, p);
  }

  const bool pairwise = params.a != 0.0 || params.b != 0.0;
  for (std::size_t it = 0; it < params.iterations; ++it) {
    Matrix logits = unary_m;
    if (pairwise) {
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::RowVectorXd penalty = Eigen::RowVectorXd::Zero(k);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double w = crf_kernel(pos[i], pos[j], col[i], col[j], params);
          penalty += w * (Eigen::RowVectorXd::Ones(k) - q.row(static_cast<Eigen::Index>(j)));
        }
        logits.row(static_cast<Eigen::Index>(i)) -= penalty;
      }
    }
    q = logits;
    softmax_rows(q);
    if (observer) observer(it, q);
  }
  MeanFieldResult out;
  out.labels = argmax_rows(q, unary.height, unary.width);
  out.q = std::move(q);
  return out;
}

LabelMap meanfield_refine(const UnaryField& unary, const RgbImage& image, const CrfParams& params) {
  return meanfield_infer(unary, image, params).labels;
}

Matrix crf_weight_matrix(const RgbImage& image, const CrfParams& params) {
  params.validate();
  const std::size_t n = image.height * image.width;
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Position pi = pixel_position(i, image.width);
    const Color ci = pixel_color(image, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = crf_kernel(pi, pixel_position(j, image.width), ci, pixel_color(image, j), params) -
                       params.negative_shift;
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return w;
}

double relaxed_potts_energy(const Matrix& weights, const Matrix& codes) {
  // Σ_{i≠j} w_ij − Σ_{i≠j} w_ij⟨c_i, c_j⟩; the diagonal of weights is zero.
  return weights.sum() - (codes.transpose() * weights * codes).trace();
}

namespace {

// Maps raw parameters to row codes (softmax rows or unit rows).
Matrix codes_from_raw(const Matrix& raw, CodeSpace space) {
  if (space == CodeSpace::kDiscrete) {
    Matrix q = raw;
    softmax_rows(q);
    return q;
  }
  return normalize_columns(raw.transpose()).transpose();
}

Matrix raw_gradient(const Matrix& raw, const Matrix& codes, const Matrix& grad_codes, CodeSpace space) {
  if (space == CodeSpace::kDiscrete) {
    Matrix g(raw.rows(), raw.cols());
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
      const double inner = codes.row(r).dot(grad_codes.row(r));
      g.row(r) = codes.row(r).cwiseProduct((grad_codes.row(r).array() - inner).matrix());
    }
    return g;
  }
  return normalize_columns_backward(raw.transpose(), grad_codes.transpose()).transpose();
}

}  // namespace

PottsSolution unsupervised_potts_solve(const RgbImage& image, const CrfParams& params,
                                       const PottsSolveOptions& options) {
  const std::size_t n = image.height * image.width;
  if (n > options.max_pixels)
    throw Error(ErrorCode::kResource, "unsupervised_potts_solve: image exceeds the dense pairwise limit");
  if (options.dim < 1) throw Error(ErrorCode::kConfiguration, "unsupervised_potts_solve: dim must be >= 1");
  const Matrix weights = crf_weight_matrix(image, params);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(options.dim));
  for (Eigen::Index c = 0; c < raw.cols(); ++c)
    for (Eigen::Index r = 0; r < raw.rows(); ++r) raw(r, c) = normal(rng);

  PottsSolution out;
  out.height = image.height;
  out.width = image.width;
  AdamState adam;
  const AdamConfig adam_cfg{options.learning_rate, 0.9, 0.999, 1e-8};
  Matrix codes = codes_from_raw(raw, options.space);
  double energy = relaxed_potts_energy(weights, codes);
  out.energy.push_back(energy);
  for (std::size_t step = 0; step < options.steps; ++step) {
    // dE/dcodes = −2·W·codes for symmetric W.
    const Matrix grad_codes = -2.0 * weights * codes;
    const Matrix grad_raw = raw_gradient(raw, codes, grad_codes, options.space);
    Matrix proposal = raw;
    adam_step(proposal, grad_raw, adam, adam_cfg);
    const Matrix direction = proposal - raw;

    double scale = 1.0;
    for (int attempt = 0; attempt <= 20; ++attempt, scale *= 0.5) {
      const Matrix candidate = raw + scale * direction;
      const Matrix candidate_codes = codes_from_raw(candidate, options.space);
      const double candidate_energy = relaxed_potts_energy(weights, candidate_codes);
      if (candidate_energy <= energy) {
        raw = candidate;
        codes = candidate_codes;
        energy = candidate_energy;
        break;
      }
    }
    out.energy.push_back(energy);
  }
  out.codes = codes;
  out.labels = argmax_rows(codes, image.height, image.width);
  return out;
}

RgbImage codes_to_rgb(const PottsSolution& solution) {
  const Matrix& codes = solution.codes;
  std::vector<Eigen::Index> dims(static_cast<std::size_t>(codes.cols()));
  std::iota(dims.begin(), dims.end(), 0);
  Vector variance(codes.cols());
  for (Eigen::Index d = 0; d < codes.cols(); ++d) {
    const double mean = codes.col(d).mean();
    variance(d) = (codes.col(d).array() - mean).square().mean();
  }
  std::stable_sort(dims.begin(), dims.end(), [&](Eigen::Index a, Eigen::Index b) { return variance(a) > variance(b); });
  RgbImage image(solution.height, solution.width);
  for (std::size_t p = 0; p < solution.height * solution.width; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = c < dims.size() ? codes(static_cast<Eigen::Index>(p), dims[c]) : 0.0;
      image.data[p * 3 + c] = static_cast<float>(std::clamp((v + 1.0) * 0.5, 0.0, 1.0));
    }
  return image;
}

}  // namespace corrdistill
