#include <doctest.h>

#include "corrdistill/probes.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace corrdistill;
using testutil::numeric_gradient;
using testutil::random_matrix;
using testutil::relative_error;

TEST_CASE("cluster assignment") {
  std::mt19937_64 rng(1);
  const Matrix centroids = normalize_columns(random_matrix(4, 5, rng));
  CHECK(assign_clusters(Matrix(centroids.col(3)), centroids)[0] == 3);

  Matrix c(2, 3);
  c << 1, 0, 1, 0, 1, -1;
  c = normalize_columns(c);
  Matrix mid(2, 1);
  mid << 1, 1;  // equidistant from centroids 0 and 1
  CHECK(assign_clusters(mid, c)[0] == 0);

  const Matrix codes = random_matrix(4, 20, rng);
  CHECK(assign_clusters(codes, centroids) == assign_clusters(Matrix(codes * 5.0), centroids));
}

TEST_CASE("cluster loss at the optimum and its range") {
  std::mt19937_64 rng(2);
  const Matrix centroids = normalize_columns(random_matrix(3, 4, rng));
  const ProbeLoss at_opt = cluster_probe_loss(centroids, centroids);
  CHECK(at_opt.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(at_opt.grads[0].norm() < 1e-12);
  for (int i = 0; i < 20; ++i) {
    const double v = cluster_probe_loss(random_matrix(3, 10, rng), centroids).value;
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("cluster loss gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix codes = random_matrix(4, 12, rng);
    const Matrix centroids = random_matrix(4, 3, rng);
    const auto out = cluster_probe_loss(codes, centroids);
    auto f = [&](const Matrix& c) { return cluster_probe_loss(codes, c).value; };
    CHECK(relative_error(out.grads[0], numeric_gradient(f, centroids)) < 1e-4);
  }
}

TEST_CASE("cluster probe converges on antipodal groups") {
  std::mt19937_64 rng(3);
  Matrix codes(3, 40);
  std::normal_distribution<double> n(0, 0.01);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double sign = i < 20 ? 1.0 : -1.0;
    codes(0, i) = sign + n(rng);
    codes(1, i) = n(rng);
    codes(2, i) = n(rng);
  }
  ClusterProbe probe(2);
  double loss = 1.0;
  for (int step = 0; step < 500; ++step) loss = cluster_probe_step(codes, probe, rng);
  CHECK(loss < 0.01);
  const auto a = assign_clusters(codes, probe.centroids);
  CHECK(a[0] != a[39]);
}

TEST_CASE("uniform logits give ln K") {
  LinearProbe probe(3, 5);
  std::mt19937_64 rng(4);
  const Matrix codes = random_matrix(3, 8, rng);
  std::vector<std::uint8_t> labels = {0, 1, 2, 3, 4, 0, 1, kIgnoreLabel};
  CHECK(linear_probe_loss(codes, labels, probe.weight, probe.bias).value == doctest::Approx(std::log(5.0)));
}

TEST_CASE("linear probe gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix codes = random_matrix(4, 10, rng);
    std::vector<std::uint8_t> labels(10);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 3);
    labels[4] = kIgnoreLabel;
    const Matrix w = random_matrix(3, 4, rng), b = random_matrix(3, 1, rng);
    const auto out = linear_probe_loss(codes, labels, w, b);
    CHECK(relative_error(out.grads[0], numeric_gradient([&](const Matrix& x) { return linear_probe_loss(codes, labels, x, b).value; }, w)) < 1e-4);
    CHECK(relative_error(out.grads[1], numeric_gradient([&](const Matrix& x) { return linear_probe_loss(codes, labels, w, x).value; }, b)) < 1e-4);
  }
}

TEST_CASE("linear probe separates a toy set") {
  std::mt19937_64 rng(5);
  Matrix codes = random_matrix(2, 60, rng, 0.3);
  std::vector<std::uint8_t> labels(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    codes(0, i) += i % 2 ? 1.0 : -1.0;
  }
  LinearProbe probe(2, 2);
  for (int step = 0; step < 1000; ++step) linear_probe_step(codes, labels, probe);
  const auto pred = linear_probe_predict(codes, probe);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 60; ++i) correct += pred[i] == labels[i];
  CHECK(correct == 60);
}

TEST_CASE("hungarian small cases") {
  ConfusionMatrix a(2);
  a.counts = {5, 1, 0, 4};
  const Matching ma = hungarian_match(a);
  CHECK(ma.cluster_to_class == std::vector<int>{0, 1});
  CHECK(ma.matched_total == 9);

  ConfusionMatrix b(2);
  b.counts = {0, 7, 6, 0};
  const Matching mb = hungarian_match(b);
  CHECK(mb.cluster_to_class == std::vector<int>{1, 0});
  CHECK(mb.matched_total == 13);
}

TEST_CASE("hungarian equals brute force") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 7;
    ConfusionMatrix cm(n);
    for (auto& c : cm.counts) c = rng() % 20;
    const Matching m = hungarian_match(cm);
    CHECK(m.matched_total == oracle::brute_force_match(cm).first);
    std::uint64_t total = 0;
    for (std::size_t p = 0; p < n; ++p) total += cm.at(static_cast<std::size_t>(m.cluster_to_class[p]), p);
    CHECK(total == m.matched_total);
  }
}

TEST_CASE("segmentation metrics") {
  LabelMap gt(2, 3), pred(2, 3);
  gt.data = {0, 1, 2, 2, 1, 0};
  pred = gt;
  Matching id;
  id.cluster_to_class = {0, 1, 2};
  std::vector<LabelMap> p{pred}, g{gt};
  auto m = segmentation_metrics(p, g, id);
  CHECK(m.accuracy == doctest::Approx(1.0));
  CHECK(m.mean_iou == doctest::Approx(1.0));

  ConfusionMatrix cm(2);
  cm.counts = {2, 1, 1, 2};
  const auto direct = metrics_from_confusion(cm);
  CHECK(direct.class_iou[0] == doctest::Approx(0.5));
  CHECK(direct.class_iou[1] == doctest::Approx(0.5));
  CHECK(direct.mean_iou == doctest::Approx(0.5));
  CHECK(direct.accuracy == doctest::Approx(4.0 / 6.0));

  // Absent class excluded from the mean.
  ConfusionMatrix absent(3);
  absent.counts = {3, 0, 0, 0, 3, 0, 0, 0, 0};
  const auto ab = metrics_from_confusion(absent);
  CHECK(std::isnan(ab.class_iou[2]));
  CHECK(ab.mean_iou == doctest::Approx(1.0));
}

TEST_CASE("hungarian matching absorbs a permutation") {
  std::mt19937_64 rng(7);
  LabelMap gt(4, 4), pred(4, 4);
  for (auto& v : gt.data) v = static_cast<std::uint8_t>(rng() % 3);
  for (std::size_t i = 0; i < 16; ++i) pred.data[i] = rng() % 4 == 0 ? static_cast<std::uint8_t>(rng() % 3) : gt.data[i];
  LabelMap permuted = pred;
  const std::uint8_t perm[3] = {2, 0, 1};
  for (auto& v : permuted.data) v = perm[v];
  auto score = [&](const LabelMap& p) {
    ConfusionMatrix cm(3);
    std::vector<int> ids(p.data.begin(), p.data.end());
    cm.accumulate(ids, gt.data);
    std::vector<LabelMap> ps{p}, gs{gt};
    return segmentation_metrics(ps, gs, hungarian_match(cm)).accuracy;
  };
  CHECK(score(pred) == doctest::Approx(score(permuted)));
}
