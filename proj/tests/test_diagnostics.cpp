#include <doctest.h>

#include <algorithm>

#include "corrdistill/diagnostics.hpp"
#include "corrdistill/synthetic.hpp"
#include "test_util.hpp"

using namespace corrdistill;

namespace {

// Brute-force AP: rank by score, sum precision increments at each distinct threshold.
double brute_ap(std::vector<ScoredTarget> e) {
  std::sort(e.begin(), e.end(), [](auto& a, auto& b) { return a.score > b.score; });
  const double pos = static_cast<double>(std::count_if(e.begin(), e.end(), [](auto& x) { return x.positive; }));
  double ap = 0, prev_recall = 0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    tp += e[i].positive;
    if (i + 1 < e.size() && e[i + 1].score == e[i].score) continue;
    const double recall = tp / pos;
    ap += (recall - prev_recall) * (tp / static_cast<double>(i + 1));
    prev_recall = recall;
  }
  return ap;
}

double dataset_ap(const Dataset& d) {
  std::vector<std::pair<CorrVolume, CoOccurrenceVolume>> pairs;
  for (const auto& item : d)
    pairs.emplace_back(feature_correspondence(item.features, item.features),
                       label_cooccurrence(*item.labels, *item.labels));
  return correspondence_ap(pairs).average_precision;
}

}  // namespace

TEST_CASE("perfect ranking gives AP 1") {
  std::vector<ScoredTarget> e = {{1.0, true}, {-1.0, false}, {1.0, true}, {-1.0, false}};
  const PRCurve c = precision_recall(e);
  CHECK(c.average_precision == doctest::Approx(1.0));
  CHECK(c.recall.back() == doctest::Approx(1.0));
}

TEST_CASE("degenerate targets are rejected") {
  std::vector<ScoredTarget> all_pos = {{0.1, true}, {0.2, true}};
  std::vector<ScoredTarget> all_neg = {{0.1, false}, {0.2, false}};
  CHECK_THROWS_AS(precision_recall(all_pos), Error);
  CHECK_THROWS_AS(precision_recall(all_neg), Error);
}

TEST_CASE("random scores give AP near the positive fraction") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::bernoulli_distribution pos(0.3);
  std::vector<ScoredTarget> e(200000);
  for (auto& x : e) x = {u(rng), pos(rng)};
  CHECK(precision_recall(e).average_precision == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("AP matches brute force and is invariant to monotone transforms") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> score(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredTarget> e(60);
    for (auto& x : e) x = {static_cast<double>(score(rng)), rng() % 3 == 0};
    e[0].positive = true;
    e[1].positive = false;
    const double ap = precision_recall(e).average_precision;
    CHECK(ap == doctest::Approx(brute_ap(e)).epsilon(1e-12));
    auto t = e;
    for (auto& x : t) x.score = std::exp(x.score) * 3 - 1;
    CHECK(precision_recall(t).average_precision == doctest::Approx(ap).epsilon(1e-12));
  }
}

TEST_CASE("precision at recall") {
  std::vector<ScoredTarget> e = {{3, true}, {2, false}, {1, true}, {0, false}};
  const PRCurve c = precision_recall(e);
  CHECK(precision_at_recall(c, 0.5) == doctest::Approx(1.0));
  CHECK(precision_at_recall(c, 1.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("one-hot class features give AP 1") {
  SyntheticCorpusConfig cfg;
  cfg.n_images = 3;
  cfg.grid = 6;
  cfg.noise_sigma = 0.0;
  CHECK(dataset_ap(make_synthetic_corpus(cfg)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("noisy synthetic corpus keeps AP high") {
  SyntheticCorpusConfig cfg;
  cfg.n_images = 10;
  cfg.noise_sigma = 0.1;
  CHECK(dataset_ap(make_synthetic_corpus(cfg)) >= 0.99);
}

TEST_CASE("similarity histogram") {
  Matrix same = Matrix::Ones(4, 10);
  const auto h = similarity_histogram(same, 500, 3);
  CHECK(h.total() == 500);
  CHECK(h.counts[similarity_bin(1.0)] == 500);
  CHECK(h.bin_edges.size() == kHistogramBins + 1);

  const Matrix basis = Matrix::Identity(8, 8);
  const auto b = similarity_histogram(basis, 4000, 5);
  CHECK(b.counts[similarity_bin(0.0)] + b.counts[similarity_bin(1.0)] == 4000);
  CHECK(b.counts[similarity_bin(1.0)] > 300);
  CHECK(b.counts[similarity_bin(1.0)] < 700);

  std::mt19937_64 rng(2);
  const Matrix r = testutil::random_matrix(5, 30, rng);
  const auto h1 = similarity_histogram(r, 1000, 17);
  const auto h2 = similarity_histogram(r, 1000, 17);
  CHECK(h1.counts == h2.counts);
  CHECK(h1.total() == 1000);
  CHECK_THROWS_AS(similarity_histogram(r, 0, 1), Error);
}
