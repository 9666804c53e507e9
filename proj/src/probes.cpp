#include "corrdistill/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace corrdistill {

Matrix seed_centroids(const Matrix& codes, std::size_t n_clusters, std::mt19937_64& rng) {
  if (codes.cols() == 0) throw Error(ErrorCode::kDegenerateInput, "seed_centroids: empty batch");
  if (n_clusters == 0) throw Error(ErrorCode::kConfiguration, "seed_centroids: need at least one cluster");
  const Matrix unit = normalize_columns(codes);
  Matrix centroids(codes.rows(), static_cast<Eigen::Index>(n_clusters));
  std::uniform_int_distribution<Eigen::Index> pick(0, unit.cols() - 1);
  centroids.col(0) = unit.col(pick(rng));
  Vector nearest = (Vector::Ones(unit.cols()) - unit.transpose() * centroids.col(0));
  for (std::size_t c = 1; c < n_clusters; ++c) {
    Eigen::Index far = 0;
    nearest.maxCoeff(&far);
    centroids.col(static_cast<Eigen::Index>(c)) = unit.col(far);
    nearest = nearest.cwiseMin(Vector::Ones(unit.cols()) -
                               unit.transpose() * centroids.col(static_cast<Eigen::Index>(c)));
  }
  return normalize_columns(centroids);
}

std::vector<int> assign_clusters(const Matrix& codes, const Matrix& centroids) {
  if (codes.rows() != centroids.rows())
    throw Error(ErrorCode::kDimension, "assign_clusters: code dim differs from centroid dim");
  const Matrix sims = normalize_columns(centroids).transpose() * normalize_columns(codes);
  std::vector<int> labels(static_cast<std::size_t>(codes.cols()));
  for (Eigen::Index p = 0; p < sims.cols(); ++p) {
    int best = 0;
    for (Eigen::Index c = 1; c < sims.rows(); ++c)
      if (sims(c, p) > sims(best, p)) best = static_cast<int>(c);
    labels[static_cast<std::size_t>(p)] = best;
  }
  return labels;
}

LabelMap assign_clusters(const FeatureMap& codes, const ClusterProbe& probe) {
  const auto ids = assign_clusters(codes.as_matrix(), probe.centroids);
  LabelMap out(codes.height, codes.width);
  for (std::size_t i = 0; i < ids.size(); ++i) out.data[i] = static_cast<std::uint8_t>(ids[i]);
  return out;
}

ProbeLoss cluster_probe_loss(const Matrix& codes, const Matrix& centroids) {
  if (codes.cols() == 0) throw Error(ErrorCode::kDegenerateInput, "cluster probe: empty batch");
  const Matrix code_unit = normalize_columns(codes);
  const Matrix cent_unit = normalize_columns(centroids);
  const auto assignment = assign_clusters(codes, centroids);
  const double inv_n = 1.0 / static_cast<double>(codes.cols());

  ProbeLoss out;
  Matrix grad_unit = Matrix::Zero(centroids.rows(), centroids.cols());
  for (Eigen::Index p = 0; p < codes.cols(); ++p) {
    const Eigen::Index c = assignment[static_cast<std::size_t>(p)];
    out.value += (1.0 - cent_unit.col(c).dot(code_unit.col(p))) * inv_n;
    grad_unit.col(c) -= code_unit.col(p) * inv_n;
  }
  out.grads.push_back(normalize_columns_backward(centroids, grad_unit));
  return out;
}

double cluster_probe_step(const Matrix& codes, ClusterProbe& probe, std::mt19937_64& rng) {
  if (!probe.initialized()) probe.centroids = seed_centroids(codes, probe.n_clusters, rng);
  const ProbeLoss loss = cluster_probe_loss(codes, probe.centroids);
  adam_step(probe.centroids, loss.grads[0], probe.adam, probe.adam_cfg);
  probe.centroids = normalize_columns(probe.centroids);
  return loss.value;
}

ProbeLoss linear_probe_loss(const Matrix& codes, std::span<const std::uint8_t> labels,
                            const Matrix& weight, const Matrix& bias) {
  if (static_cast<std::size_t>(codes.cols()) != labels.size())
    throw Error(ErrorCode::kDimension, "linear probe: label count differs from code count");
  if (weight.cols() != codes.rows())
    throw Error(ErrorCode::kDimension, "linear probe: weight does not match code dim");
  const auto classes = static_cast<std::size_t>(weight.rows());

  std::vector<Eigen::Index> valid;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] == kIgnoreLabel) continue;
    if (labels[p] >= classes) throw Error(ErrorCode::kInvalidArgument, "linear probe: label out of range");
    valid.push_back(static_cast<Eigen::Index>(p));
  }
  ProbeLoss out;
  Matrix grad_logits = Matrix::Zero(weight.rows(), codes.cols());
  if (!valid.empty()) {
    const double inv_n = 1.0 / static_cast<double>(valid.size());
    for (Eigen::Index p : valid) {
      Vector logits = weight * codes.col(p) + bias.col(0);
      const double top = logits.maxCoeff();
      const Vector expd = (logits.array() - top).exp().matrix();
      const double z = expd.sum();
      const Eigen::Index y = labels[static_cast<std::size_t>(p)];
      out.value += (std::log(z) + top - logits(y)) * inv_n;
      grad_logits.col(p) = expd / z * inv_n;
      grad_logits(y, p) -= inv_n;
    }
  }
  out.grads.push_back(grad_logits * codes.transpose());
  out.grads.push_back(grad_logits.rowwise().sum());
  return out;
}

double linear_probe_step(const Matrix& codes, std::span<const std::uint8_t> labels, LinearProbe& probe) {
  const ProbeLoss loss = linear_probe_loss(codes, labels, probe.weight, probe.bias);
  Matrix* const params[] = {&probe.weight, &probe.bias};
  const Matrix* const grads[] = {&loss.grads[0], &loss.grads[1]};
  adam_step(params, grads, probe.adam, probe.adam_cfg);
  return loss.value;
}

std::vector<int> linear_probe_predict(const Matrix& codes, const LinearProbe& probe) {
  Matrix logits = probe.weight * codes;
  logits.colwise() += probe.bias.col(0);
  std::vector<int> out(static_cast<std::size_t>(codes.cols()));
  for (Eigen::Index p = 0; p < logits.cols(); ++p) {
    Eigen::Index best = 0;
    logits.col(p).maxCoeff(&best);
    out[static_cast<std::size_t>(p)] = static_cast<int>(best);
  }
  return out;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

void ConfusionMatrix::accumulate(std::span<const int> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::kDimension, "confusion: size mismatch");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    if (gt[i] >= n || pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= n)
      throw Error(ErrorCode::kInvalidArgument, "confusion: label out of range");
    ++at(gt[i], static_cast<std::size_t>(pred[i]));
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n != n) throw Error(ErrorCode::kDimension, "confusion: merging different sizes");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

Matching hungarian_match(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.n;
  Matching out;
  if (n == 0) return out;
  // Rows are predicted ids (workers), columns classes (jobs); cost = −count.
  // 1-based potentials formulation; row 0 / column 0 are sentinels.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  auto cost = [&](std::size_t pred, std::size_t cls) {
    return -static_cast<double>(confusion.at(cls - 1, pred - 1));
  };
  for (std::size_t row = 1; row <= n; ++row) {
    owner[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = owner[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double cur = cost(r0, col) - u[r0] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[owner[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  out.cluster_to_class.assign(n, -1);
  for (std::size_t col = 1; col <= n; ++col) {
    const std::size_t pred = owner[col] - 1;
    out.cluster_to_class[pred] = static_cast<int>(col - 1);
    out.matched_total += confusion.at(col - 1, pred);
  }
  return out;
}

SegmentationMetrics metrics_from_confusion(const ConfusionMatrix& matched) {
  const std::uint64_t total = matched.total();
  if (total == 0) throw Error(ErrorCode::kDegenerateInput, "segmentation metrics: no evaluated pixels");
  SegmentationMetrics m;
  m.confusion = matched;
  std::uint64_t correct = 0;
  m.class_iou.assign(matched.n, std::numeric_limits<double>::quiet_NaN());
  double iou_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < matched.n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < matched.n; ++k) {
      row += matched.at(c, k);
      col += matched.at(k, c);
    }
    const std::uint64_t tp = matched.at(c, c);
    correct += tp;
    if (row == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(row + col - tp);
    m.class_iou[c] = iou;
    iou_sum += iou;
    ++present;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  m.mean_iou = iou_sum / static_cast<double>(present);
  return m;
}

SegmentationMetrics segmentation_metrics(std::span<const LabelMap> pred, std::span<const LabelMap> gt,
                                         const Matching& matching) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::kDimension, "segmentation metrics: list sizes differ");
  if (pred.empty()) throw Error(ErrorCode::kDegenerateInput, "segmentation metrics: empty evaluation set");
  ConfusionMatrix matched(matching.cluster_to_class.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].height != gt[i].height || pred[i].width != gt[i].width)
      throw Error(ErrorCode::kDimension, "segmentation metrics: label map shapes differ");
    std::vector<int> remapped(pred[i].data.size());
    for (std::size_t p = 0; p < remapped.size(); ++p) {
      const std::size_t id = pred[i].data[p];
      if (id >= matching.cluster_to_class.size())
        throw Error(ErrorCode::kInvalidArgument, "segmentation metrics: prediction outside matching");
      remapped[p] = matching.cluster_to_class[id];
    }
    matched.accumulate(remapped, gt[i].data);
  }
  return metrics_from_confusion(matched);
}

}  // namespace corrdistill
