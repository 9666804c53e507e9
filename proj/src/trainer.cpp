#include "corrdistill/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "corrdistill/knnindex.hpp"

namespace corrdistill {

void TrainConfig::validate() const {
  loss.validate();
  if (code_dim == 0) throw Error(ErrorCode::kConfiguration, "code_dim must be positive");
  if (head_lr <= 0 || probe_lr <= 0) throw Error(ErrorCode::kConfiguration, "learning rates must be positive");
  if (batch_size < 2) throw Error(ErrorCode::kConfiguration, "batch_size must be >= 2");
  if (dropout < 0 || dropout >= 1) throw Error(ErrorCode::kConfiguration, "dropout must be in [0, 1)");
  if (k_nn == 0) throw Error(ErrorCode::kConfiguration, "k_nn must be positive");
  if (histogram_pairs == 0) throw Error(ErrorCode::kConfiguration, "histogram_pairs must be positive");
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      if (l.contains("preset")) {
        const auto preset = l["preset"].get<std::string>();
        if (preset == "cocostuff") cfg.loss = LossConfig::cocostuff();
        else if (preset == "cityscapes") cfg.loss = LossConfig::cityscapes();
        else throw Error(ErrorCode::kConfiguration, "unknown loss preset '" + preset + "'");
      }
      cfg.loss.lambda_self = l.value("lambda_self", cfg.loss.lambda_self);
      cfg.loss.lambda_knn = l.value("lambda_knn", cfg.loss.lambda_knn);
      cfg.loss.lambda_rand = l.value("lambda_rand", cfg.loss.lambda_rand);
      cfg.loss.b_self = l.value("b_self", cfg.loss.b_self);
      cfg.loss.b_knn = l.value("b_knn", cfg.loss.b_knn);
      cfg.loss.b_rand = l.value("b_rand", cfg.loss.b_rand);
      cfg.loss.n_locations = l.value("n_locations", cfg.loss.n_locations);
      cfg.loss.zero_clamp = l.value("zero_clamp", cfg.loss.zero_clamp);
      cfg.loss.spatial_center = l.value("spatial_center", cfg.loss.spatial_center);
    }
    cfg.code_dim = j.value("code_dim", cfg.code_dim);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    cfg.head_lr = j.value("head_lr", cfg.head_lr);
    cfg.probe_lr = j.value("probe_lr", cfg.probe_lr);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.k_nn = j.value("k_nn", cfg.k_nn);
    cfg.five_crop = j.value("five_crop", cfg.five_crop);
    cfg.init_seed = j.value("init_seed", cfg.init_seed);
    cfg.sample_seed = j.value("sample_seed", cfg.sample_seed);
    cfg.histogram_every = j.value("histogram_every", cfg.histogram_every);
    cfg.histogram_pairs = j.value("histogram_pairs", cfg.histogram_pairs);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {
      {"loss",
       {{"lambda_self", cfg.loss.lambda_self},
        {"lambda_knn", cfg.loss.lambda_knn},
        {"lambda_rand", cfg.loss.lambda_rand},
        {"b_self", cfg.loss.b_self},
        {"b_knn", cfg.loss.b_knn},
        {"b_rand", cfg.loss.b_rand},
        {"n_locations", cfg.loss.n_locations},
        {"zero_clamp", cfg.loss.zero_clamp},
        {"spatial_center", cfg.loss.spatial_center}}},
      {"code_dim", cfg.code_dim},
      {"hidden", cfg.hidden},
      {"n_classes", cfg.n_classes},
      {"head_lr", cfg.head_lr},
      {"probe_lr", cfg.probe_lr},
      {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},
      {"adam_eps", cfg.adam_eps},
      {"dropout", cfg.dropout},
      {"batch_size", cfg.batch_size},
      {"steps", cfg.steps},
      {"k_nn", cfg.k_nn},
      {"five_crop", cfg.five_crop},
      {"init_seed", cfg.init_seed},
      {"sample_seed", cfg.sample_seed},
      {"histogram_every", cfg.histogram_every},
      {"histogram_pairs", cfg.histogram_pairs},
      {"checkpoint_every", cfg.checkpoint_every},
  };
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  return train_config_from_json(j);
}

nlohmann::json step_log_to_json(const StepLog& log) {
  nlohmann::json j = {{"step", log.step},           {"loss", log.loss},
                      {"loss_self", log.loss_self}, {"loss_knn", log.loss_knn},
                      {"loss_rand", log.loss_rand}, {"cluster_loss", log.cluster_loss}};
  j["linear_loss"] = std::isnan(log.linear_loss) ? nlohmann::json(nullptr) : nlohmann::json(log.linear_loss);
  return j;
}

Matrix compute_codes(const HeadParams& head, const FeatureMap& features) {
  return head_forward(features.as_matrix(), head).codes;
}

namespace {

std::size_t infer_classes(const Dataset& dataset) {
  std::size_t classes = 0;
  for (const auto& item : dataset) {
    if (!item.labels) continue;
    for (auto v : item.labels->data)
      if (v != kIgnoreLabel) classes = std::max<std::size_t>(classes, v + 1u);
  }
  return classes;
}

void append_histogram_csv(std::ofstream& out, const HistogramLog& h) {
  for (std::size_t b = 0; b < h.histogram.counts.size(); ++b)
    out << h.step << ',' << h.histogram.bin_edges[b] << ',' << h.histogram.bin_edges[b + 1] << ','
        << h.histogram.counts[b] << '\n';
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::kDegenerateInput, "train: empty dataset");
  const Dataset crops = config.five_crop ? five_crop_dataset(dataset) : Dataset();
  const Dataset& items = config.five_crop ? crops : dataset;
  if (items.size() < config.batch_size)
    throw Error(ErrorCode::kConfiguration, "train: dataset smaller than the batch size");
  const std::size_t channels = items.front().features.channels;
  const std::size_t n_classes = config.n_classes > 0 ? config.n_classes : infer_classes(dataset);
  if (n_classes == 0)
    throw Error(ErrorCode::kConfiguration, "train: n_classes not set and no labels to infer it from");

  const KnnIndex index = build_knn_index(items, config.k_nn);

  TrainResult result;
  Model& model = result.model;
  model.head = HeadParams::init(channels, config.code_dim, config.init_seed, config.hidden);
  model.cluster = ClusterProbe(n_classes);
  model.cluster.adam_cfg = {config.probe_lr, config.beta1, config.beta2, config.adam_eps};
  model.linear = LinearProbe(config.code_dim, n_classes);
  model.linear.adam_cfg = model.cluster.adam_cfg;
  model.has_linear = infer_classes(dataset) > 0;

  std::ofstream log_file, hist_file;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    log_file.open(*out_dir / "train_log.jsonl", std::ios::trunc);
    hist_file.open(*out_dir / "histograms.csv", std::ios::trunc);
    if (!log_file || !hist_file) throw Error(ErrorCode::kIo, "train: cannot create log files");
    hist_file << "step,bin_left,bin_right,count\n";
  }

  AdamState head_adam;
  const AdamConfig head_cfg{config.head_lr, config.beta1, config.beta2, config.adam_eps};
  std::mt19937_64 rng(config.sample_seed);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto batch = sample_batch(index, config.batch_size, rng);
    HeadGrads grads = zeros_like(model.head);
    StepLog entry;
    entry.step = step;
    for (const BatchTriple& t : batch) {
      const FullLossOutput out = full_loss(items[t.x].features, items[t.knn].features,
                                           items[t.rand].features, model.head, config.loss, rng,
                                           config.dropout);
      accumulate(grads, out.grads, inv_batch);
      entry.loss += out.value * inv_batch;
      entry.loss_self += out.terms[0] * inv_batch;
      entry.loss_knn += out.terms[1] * inv_batch;
      entry.loss_rand += out.terms[2] * inv_batch;
    }
    {
      auto params = model.head.tensors();
      const auto grad_tensors = std::as_const(grads).tensors();
      adam_step(std::span<Matrix* const>(params), std::span<const Matrix* const>(grad_tensors), head_adam,
                head_cfg);
      ++model.head.version;
    }

    // Probes see detached codes computed after the head update.
    std::vector<Matrix> batch_codes;
    std::size_t total_cols = 0;
    for (const BatchTriple& t : batch) {
      batch_codes.push_back(compute_codes(model.head, items[t.x].features));
      total_cols += static_cast<std::size_t>(batch_codes.back().cols());
    }
    Matrix codes(static_cast<Eigen::Index>(config.code_dim), static_cast<Eigen::Index>(total_cols));
    std::vector<std::uint8_t> labels;
    bool labelled = true;
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      codes.middleCols(col, batch_codes[i].cols()) = batch_codes[i];
      col += batch_codes[i].cols();
      const auto& item = items[batch[i].x];
      if (item.labels) labels.insert(labels.end(), item.labels->data.begin(), item.labels->data.end());
      else labelled = false;
    }
    entry.cluster_loss = cluster_probe_step(codes, model.cluster, rng);
    entry.linear_loss = std::numeric_limits<double>::quiet_NaN();
    if (labelled && model.has_linear) entry.linear_loss = linear_probe_step(codes, labels, model.linear);

    result.log.push_back(entry);
    if (log_file.is_open()) log_file << step_log_to_json(entry).dump() << '\n';

    if ((config.histogram_every > 0 && step % config.histogram_every == 0) || step == config.steps) {
      HistogramLog h{step, empty_similarity_histogram()};
      const std::size_t per_image = std::max<std::size_t>(1, config.histogram_pairs / batch_codes.size());
      for (std::size_t i = 0; i < batch_codes.size(); ++i) {
        const auto part = similarity_histogram(batch_codes[i], per_image, config.sample_seed + step * 131 + i);
        for (std::size_t b = 0; b < kHistogramBins; ++b) h.histogram.counts[b] += part.counts[b];
      }
      if (hist_file.is_open()) append_histogram_csv(hist_file, h);
      result.histograms.push_back(std::move(h));
    }
    if (out_dir && config.checkpoint_every > 0 && step % config.checkpoint_every == 0)
      save_checkpoint(model, *out_dir / ("step_" + std::to_string(step)),
                      {{"step", step}, {"config", train_config_to_json(config)}});
  }
  if (out_dir)
    save_checkpoint(model, *out_dir, {{"step", config.steps}, {"config", train_config_to_json(config)}});
  return result;
}

namespace {

ProbeEvaluation score_predictions(std::vector<LabelMap> predictions, const std::vector<LabelMap>& gt,
                                  std::size_t n_classes, bool hungarian) {
  ProbeEvaluation eval;
  if (hungarian) {
    ConfusionMatrix raw(n_classes);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      std::vector<int> ids(predictions[i].data.begin(), predictions[i].data.end());
      raw.accumulate(ids, gt[i].data);
    }
    eval.matching = hungarian_match(raw);
  } else {
    eval.matching.cluster_to_class.resize(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) eval.matching.cluster_to_class[c] = static_cast<int>(c);
  }
  eval.metrics = segmentation_metrics(predictions, gt, eval.matching);
  for (auto& pred : predictions)
    for (auto& v : pred.data) v = static_cast<std::uint8_t>(eval.matching.cluster_to_class[v]);
  eval.predictions = std::move(predictions);
  return eval;
}

}  // namespace

EvalReport evaluate(const Model& model, const Dataset& dataset,
                    const std::vector<std::optional<RgbImage>>* images, const CrfParams& crf) {
  std::vector<LabelMap> gt, cluster_pred, linear_pred;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset[i];
    if (!item.labels) continue;
    const Matrix codes = compute_codes(model.head, item.features);
    const std::size_t h = item.features.height, w = item.features.width;
    gt.push_back(*item.labels);

    const RgbImage* image = nullptr;
    if (images != nullptr && i < images->size() && (*images)[i]) image = &*(*images)[i];
    if (image != nullptr && image->height == h && image->width == w) {
      const UnaryField unary = unary_from_codes(codes, h, w, model.cluster.centroids);
      cluster_pred.push_back(meanfield_refine(unary, *image, crf));
    } else {
      const auto ids = assign_clusters(codes, model.cluster.centroids);
      LabelMap pred(h, w);
      for (std::size_t p = 0; p < ids.size(); ++p) pred.data[p] = static_cast<std::uint8_t>(ids[p]);
      cluster_pred.push_back(std::move(pred));
    }
    if (model.has_linear) {
      const auto ids = linear_probe_predict(codes, model.linear);
      LabelMap pred(h, w);
      for (std::size_t p = 0; p < ids.size(); ++p) pred.data[p] = static_cast<std::uint8_t>(ids[p]);
      linear_pred.push_back(std::move(pred));
    }
  }
  if (gt.empty()) throw Error(ErrorCode::kDegenerateInput, "evaluate: no labelled items");
  EvalReport report;
  report.cluster = score_predictions(std::move(cluster_pred), gt, model.cluster.n_clusters, true);
  if (model.has_linear)
    report.linear = score_predictions(std::move(linear_pred), gt, model.linear.n_classes(), false);
  return report;
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
  auto probe_json = [](const ProbeEvaluation& e) {
    nlohmann::json iou = nlohmann::json::array();
    for (double v : e.metrics.class_iou) iou.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    return nlohmann::json{{"accuracy", e.metrics.accuracy},
                          {"mean_iou", e.metrics.mean_iou},
                          {"class_iou", iou},
                          {"matching", e.matching.cluster_to_class}};
  };
  nlohmann::json j;
  j["cluster_probe"] = probe_json(report.cluster);
  if (report.linear) j["linear_probe"] = probe_json(*report.linear);
  return j;
}

}  // namespace corrdistill
