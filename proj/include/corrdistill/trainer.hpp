#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrdistill/adam.hpp"
#include "corrdistill/crf.hpp"
#include "corrdistill/diagnostics.hpp"
#include "corrdistill/disthead.hpp"
#include "corrdistill/probes.hpp"
#include "corrdistill/corrloss.hpp"
#include "corrdistill/tensorio.hpp"

namespace corrdistill {

struct TrainConfig {
  LossConfig loss;
  std::size_t code_dim = 70;
  std::size_t hidden = 0;  // 0 → same as the feature channels
  std::size_t n_classes = 0;  // 0 → inferred from the labels
  double head_lr = 0.0005;
  double probe_lr = kProbeLearningRate;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.1;
  std::size_t batch_size = 32;
  std::size_t steps = 0;
  std::size_t k_nn = 7;
  bool five_crop = true;
  std::uint64_t init_seed = 0;
  std::uint64_t sample_seed = 1;
  std::size_t histogram_every = 100;
  std::size_t histogram_pairs = 4096;
  std::size_t checkpoint_every = 500;

  void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig read_train_config(const std::filesystem::path& path);

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  double loss_self = 0.0;
  double loss_knn = 0.0;
  double loss_rand = 0.0;
  double cluster_loss = 0.0;
  double linear_loss = 0.0;  // NaN when the batch has no labels
};

nlohmann::json step_log_to_json(const StepLog& log);

struct HistogramLog {
  std::size_t step = 0;
  SimilarityHistogram histogram;
};

struct Model {
  HeadParams head;
  ClusterProbe cluster;
  LinearProbe linear;
  bool has_linear = false;
};

struct TrainResult {
  Model model;
  std::vector<StepLog> log;
  std::vector<HistogramLog> histograms;
};

// Head codes for one feature map, no dropout.
Matrix compute_codes(const HeadParams& head, const FeatureMap& features);

// Runs `config.steps` steps. When out_dir is set, writes train_log.jsonl,
// histograms.csv, a checkpoint every checkpoint_every steps and a final one.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct ProbeEvaluation {
  Matching matching;
  SegmentationMetrics metrics;
  std::vector<LabelMap> predictions;  // already remapped to class ids
};

struct EvalReport {
  ProbeEvaluation cluster;
  std::optional<ProbeEvaluation> linear;
};

// Scores the cluster probe (Hungarian-matched) and linear probe on every
// labelled item. When images are supplied (same order, same size as the
// features) cluster predictions are CRF-refined first.
EvalReport evaluate(const Model& model, const Dataset& dataset,
                    const std::vector<std::optional<RgbImage>>* images = nullptr,
                    const CrfParams& crf = {});

nlohmann::json eval_report_to_json(const EvalReport& report);

// Checkpoint directory: one DFA1 archive per tensor plus checkpoint.json.
void save_checkpoint(const Model& model, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace corrdistill
