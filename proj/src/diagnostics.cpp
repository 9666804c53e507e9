#include "corrdistill/diagnostics.hpp"

#include <algorithm>
#include <random>

namespace corrdistill {

PRCurve precision_recall(std::span<const ScoredTarget> entries) {
  std::vector<ScoredTarget> sorted(entries.begin(), entries.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredTarget& a, const ScoredTarget& b) { return a.score > b.score; });
  std::size_t total_pos = 0;
  for (const auto& e : sorted) total_pos += e.positive ? 1 : 0;
  if (total_pos == 0 || total_pos == sorted.size())
    throw Error(ErrorCode::kDegenerateTarget, "average precision needs positive and negative targets");

  PRCurve curve;
  std::size_t tp = 0, seen = 0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < sorted.size();) {
    const double score = sorted[k].score;
    while (k < sorted.size() && sorted[k].score == score) {
      tp += sorted[k].positive ? 1 : 0;
      ++seen;
      ++k;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    curve.thresholds.push_back(score);
    curve.precision.push_back(precision);
    curve.recall.push_back(recall);
    curve.average_precision += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return curve;
}

PRCurve correspondence_ap(std::span<const std::pair<CorrVolume, CoOccurrenceVolume>> pairs) {
  std::vector<ScoredTarget> entries;
  for (const auto& [corr, cooc] : pairs) {
    if (corr.h != cooc.h || corr.w != cooc.w || corr.i != cooc.i || corr.j != cooc.j)
      throw Error(ErrorCode::kDimension, "correspondence_ap: volume dims differ");
    for (std::size_t s = 0; s < corr.sources(); ++s)
      for (std::size_t t = 0; t < corr.targets(); ++t)
        if (cooc.is_valid(s, t)) entries.push_back({corr.at(s, t), cooc.at(s, t)});
  }
  return precision_recall(entries);
}

double precision_at_recall(const PRCurve& curve, double recall) {
  for (std::size_t k = 0; k < curve.recall.size(); ++k)
    if (curve.recall[k] >= recall) return curve.precision[k];
  return 0.0;
}

std::uint64_t SimilarityHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

double SimilarityHistogram::mass_between(double lo, double hi) const {
  const std::uint64_t n = total();
  if (n == 0) return 0.0;
  std::uint64_t in = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double center = 0.5 * (bin_edges[b] + bin_edges[b + 1]);
    if (center >= lo && center <= hi) in += counts[b];
  }
  return static_cast<double>(in) / static_cast<double>(n);
}

SimilarityHistogram empty_similarity_histogram() {
  SimilarityHistogram hist;
  hist.bin_edges.resize(kHistogramBins + 1);
  for (std::size_t b = 0; b <= kHistogramBins; ++b)
    hist.bin_edges[b] = -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(kHistogramBins);
  hist.counts.assign(kHistogramBins, 0);
  return hist;
}

std::size_t similarity_bin(double cosine) {
  const double pos = (cosine + 1.0) * 0.5 * static_cast<double>(kHistogramBins);
  const auto bin = static_cast<long long>(std::floor(pos));
  return static_cast<std::size_t>(std::clamp<long long>(bin, 0, kHistogramBins - 1));
}

SimilarityHistogram similarity_histogram(const Matrix& codes, std::size_t n_pairs,
                                         std::uint64_t rng_seed) {
  if (n_pairs == 0) throw Error(ErrorCode::kInvalidArgument, "similarity_histogram: n_pairs must be >= 1");
  const Matrix unit = normalize_columns(codes);
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, unit.cols() - 1);
  SimilarityHistogram hist = empty_similarity_histogram();
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Eigen::Index a = pick(rng);
    const Eigen::Index b = pick(rng);
    ++hist.counts[similarity_bin(unit.col(a).dot(unit.col(b)))];
  }
  return hist;
}

SimilarityHistogram similarity_histogram(const FeatureMap& codes, std::size_t n_pairs,
                                         std::uint64_t rng_seed) {
  return similarity_histogram(codes.as_matrix(), n_pairs, rng_seed);
}

}  // namespace corrdistill
