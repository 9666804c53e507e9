#include "corrdistill/energy.hpp"

#include <algorithm>
#include <cmath>

#include "corrdistill/corrloss.hpp"

namespace corrdistill {

void PixelGraph::validate() const {
  const auto n = static_cast<Eigen::Index>(vertices.size());
  if (weights.rows() != n || weights.cols() != n)
    throw Error(ErrorCode::kDimension, "PixelGraph: weight table must be |V|×|V|");
  if (codes.rows() != n && labels.size() != vertices.size())
    throw Error(ErrorCode::kDimension, "PixelGraph: need one code row or label per vertex");
  if (!weights.allFinite() || !codes.allFinite())
    throw Error(ErrorCode::kNonFinite, "PixelGraph: weights and codes must be finite");
}

double potts_energy(const PixelGraph& graph, Compatibility compatibility) {
  graph.validate();
  const std::size_t n = graph.size();
  double energy = 0.0;
  if (compatibility == Compatibility::kCosineDistance) {
    const Matrix unit = normalize_columns(graph.codes.transpose());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        energy += graph.weights(a, b) * (1.0 - unit.col(a).dot(unit.col(b)));
      }
    return energy;
  }
  std::vector<int> labels = graph.labels;
  if (labels.empty()) {
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      graph.codes.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      labels[i] = static_cast<int>(best);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (labels[i] != labels[j])
        energy += graph.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return energy;
}

PixelGraph permute_vertices(const PixelGraph& graph, const std::vector<std::size_t>& order) {
  if (order.size() != graph.size()) throw Error(ErrorCode::kDimension, "permute_vertices: order size mismatch");
  const auto n = static_cast<Eigen::Index>(graph.size());
  PixelGraph out;
  out.vertices.resize(graph.size());
  out.weights.resize(n, n);
  if (graph.codes.rows() == n) out.codes.resize(n, graph.codes.cols());
  if (!graph.labels.empty()) out.labels.resize(graph.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(order[i]);
    const auto dst = static_cast<Eigen::Index>(i);
    out.vertices[i] = graph.vertices[order[i]];
    if (graph.codes.rows() == n) out.codes.row(dst) = graph.codes.row(src);
    if (!graph.labels.empty()) out.labels[i] = graph.labels[order[i]];
    for (std::size_t j = 0; j < order.size(); ++j)
      out.weights(dst, static_cast<Eigen::Index>(j)) = graph.weights(src, static_cast<Eigen::Index>(order[j]));
  }
  return out;
}

EquivalenceReport equivalence_check(const std::vector<FeatureMap>& dataset, const HeadParams& head,
                                    double b, double tolerance) {
  if (dataset.empty()) throw Error(ErrorCode::kDegenerateInput, "equivalence_check: empty dataset");
  if (dataset.size() > kEquivalenceMaxImages)
    throw Error(ErrorCode::kResource, "equivalence_check: at most 4 images can be enumerated");
  for (const auto& f : dataset)
    if (f.locations() > kEquivalenceMaxPixels)
      throw Error(ErrorCode::kResource, "equivalence_check: feature maps must be at most 8×8");

  // Graph route: vertices are all pixels, w = cosine(f_i, f_j) − b, φ = head codes.
  std::vector<Matrix> feats, codes;
  std::vector<std::size_t> offset;
  PixelGraph graph;
  for (std::size_t x = 0; x < dataset.size(); ++x) {
    feats.push_back(dataset[x].as_matrix());
    codes.push_back(head_forward(feats.back(), head).codes);
    offset.push_back(graph.vertices.size());
    for (std::size_t h = 0; h < dataset[x].height; ++h)
      for (std::size_t w = 0; w < dataset[x].width; ++w) graph.vertices.push_back({x, h, w});
  }
  const auto n = static_cast<Eigen::Index>(graph.size());
  Matrix all_feats(feats.front().rows(), n);
  graph.codes.resize(n, codes.front().rows());
  for (std::size_t x = 0; x < dataset.size(); ++x) {
    const auto off = static_cast<Eigen::Index>(offset[x]);
    all_feats.middleCols(off, feats[x].cols()) = feats[x];
    graph.codes.middleRows(off, codes[x].cols()) = codes[x].transpose();
  }
  const Matrix unit = normalize_columns(all_feats);
  graph.weights = (unit.transpose() * unit).array() - b;

  EquivalenceReport report;
  report.energy = potts_energy(graph, Compatibility::kCosineDistance);
  report.weight_sum = graph.weights.sum();

  // Loss route, one image pair at a time, compared block by block.
  const Matrix code_unit = normalize_columns(graph.codes.transpose());
  for (std::size_t x = 0; x < dataset.size(); ++x) {
    for (std::size_t y = 0; y < dataset.size(); ++y) {
      const double loss = simple_corr_loss(feats[x], feats[y], codes[x], codes[y], b).value;
      report.loss_sum += loss;

      const auto nx = feats[x].cols(), ny = feats[y].cols();
      const auto ox = static_cast<Eigen::Index>(offset[x]), oy = static_cast<Eigen::Index>(offset[y]);
      // Energy restricted to ordered pairs (v_i in x, v_j in y).
      double block_energy = 0.0, block_weight = 0.0;
      for (Eigen::Index i = 0; i < nx; ++i)
        for (Eigen::Index j = 0; j < ny; ++j) {
          const double w = graph.weights(ox + i, oy + j);
          block_weight += w;
          block_energy += w * (1.0 - code_unit.col(ox + i).dot(code_unit.col(oy + j)));
        }
      report.max_abs_diff = std::max(report.max_abs_diff, std::abs(block_energy - block_weight - loss));
    }
  }
  report.max_abs_diff =
      std::max(report.max_abs_diff, std::abs(report.energy - report.weight_sum - report.loss_sum));
  report.passed = report.max_abs_diff < tolerance;
  return report;
}

}  // namespace corrdistill
