#include "corrdistill/corrdistill.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <set>
#include <string>

#include <json.hpp>

#include "corrdistill/corrvol.hpp"
#include "corrdistill/crf.hpp"
#include "corrdistill/diagnostics.hpp"
#include "corrdistill/knnindex.hpp"
#include "corrdistill/synthetic.hpp"
#include "corrdistill/tensorio.hpp"
#include "corrdistill/trainer.hpp"

struct cd_dataset {
  corrdistill::Dataset items;
};

struct cd_model {
  corrdistill::Model model;
};

namespace {

using namespace corrdistill;

thread_local std::string g_last_error;

cd_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return CD_OK;
    case ErrorCode::kInvalidArgument: return CD_INVALID_ARGUMENT;
    case ErrorCode::kDimension: return CD_DIMENSION;
    case ErrorCode::kIo: return CD_IO;
    case ErrorCode::kBadMagic: return CD_BAD_MAGIC;
    case ErrorCode::kBadDtype: return CD_BAD_DTYPE;
    case ErrorCode::kSizeMismatch: return CD_SIZE_MISMATCH;
    case ErrorCode::kNonFinite: return CD_NON_FINITE;
    case ErrorCode::kConfiguration: return CD_CONFIGURATION;
    case ErrorCode::kDegenerateTarget: return CD_DEGENERATE_TARGET;
    case ErrorCode::kDegenerateInput: return CD_DEGENERATE_INPUT;
    case ErrorCode::kResource: return CD_RESOURCE;
    case ErrorCode::kContract: return CD_CONTRACT;
    case ErrorCode::kParse: return CD_PARSE;
  }
  return CD_INTERNAL;
}

template <typename F>
cd_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CD_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return CD_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CD_RESOURCE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CD_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit_json(const nlohmann::json& j, char** out) {
  if (out != nullptr) *out = dup_string(j.dump());
}

CrfParams crf_from_json(const char* text) {
  CrfParams p;
  if (text == nullptr) return p;
  const auto j = nlohmann::json::parse(text);
  p.a = j.value("a", p.a);
  p.b = j.value("b", p.b);
  p.theta_alpha = j.value("theta_alpha", p.theta_alpha);
  p.theta_beta = j.value("theta_beta", p.theta_beta);
  p.theta_gamma = j.value("theta_gamma", p.theta_gamma);
  p.iterations = j.value("iterations", p.iterations);
  p.negative_shift = j.value("negative_shift", p.negative_shift);
  p.color_scale = j.value("color_scale", p.color_scale);
  p.validate();
  return p;
}

bool has_provenance(const Dataset& d) {
  for (const auto& item : d)
    if (!item.provenance) return false;
  return !d.empty();
}

}  // namespace

extern "C" {

const char* cd_version(void) { return "0.1.0"; }

const char* cd_status_name(cd_status status) {
  switch (status) {
    case CD_OK: return "ok";
    case CD_INVALID_ARGUMENT: return "invalid_argument";
    case CD_DIMENSION: return "dimension";
    case CD_IO: return "io";
    case CD_BAD_MAGIC: return "bad_magic";
    case CD_BAD_DTYPE: return "bad_dtype";
    case CD_SIZE_MISMATCH: return "size_mismatch";
    case CD_NON_FINITE: return "non_finite";
    case CD_CONFIGURATION: return "configuration";
    case CD_DEGENERATE_TARGET: return "degenerate_target";
    case CD_DEGENERATE_INPUT: return "degenerate_input";
    case CD_RESOURCE: return "resource";
    case CD_CONTRACT: return "contract";
    case CD_PARSE: return "parse";
    case CD_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* cd_last_error(void) { return g_last_error.c_str(); }

void cd_string_free(char* str) { std::free(str); }

cd_status cd_archive_write(const char* path, const float* data, size_t channels, size_t height,
                           size_t width) {
  return guarded([&] {
    require(path != nullptr && data != nullptr, "cd_archive_write: null argument");
    FeatureMap map(channels, height, width);
    std::copy(data, data + map.data.size(), map.data.begin());
    write_feature_archive(map, path);
  });
}

cd_status cd_archive_read(const char* path, size_t* channels, size_t* height, size_t* width,
                          float* buffer, size_t capacity) {
  return guarded([&] {
    require(path != nullptr && channels != nullptr && height != nullptr && width != nullptr,
            "cd_archive_read: null argument");
    const FeatureMap map = read_feature_archive(path);
    *channels = map.channels;
    *height = map.height;
    *width = map.width;
    if (buffer != nullptr) {
      if (capacity < map.data.size())
        throw Error(ErrorCode::kSizeMismatch, "cd_archive_read: buffer too small");
      std::copy(map.data.begin(), map.data.end(), buffer);
    }
  });
}

cd_status cd_dataset_load(const char* manifest_path, cd_dataset** out) {
  return guarded([&] {
    require(manifest_path != nullptr && out != nullptr, "cd_dataset_load: null argument");
    *out = new cd_dataset{load_dataset(std::filesystem::path(manifest_path))};
  });
}

cd_status cd_dataset_synthetic(size_t n_images, size_t grid, size_t n_classes, size_t channels,
                               double noise_sigma, uint64_t seed, cd_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "cd_dataset_synthetic: null argument");
    SyntheticCorpusConfig cfg{n_images, grid, n_classes, channels, noise_sigma, seed};
    *out = new cd_dataset{make_synthetic_corpus(cfg)};
  });
}

cd_status cd_dataset_save(const cd_dataset* dataset, const char* dir) {
  return guarded([&] {
    require(dataset != nullptr && dir != nullptr, "cd_dataset_save: null argument");
    save_dataset(dataset->items, dir);
  });
}

size_t cd_dataset_size(const cd_dataset* dataset) { return dataset == nullptr ? 0 : dataset->items.size(); }

void cd_dataset_free(cd_dataset* dataset) { delete dataset; }

cd_status cd_train(const char* config_json, const cd_dataset* dataset, const char* out_dir, cd_model** out,
                   char** summary_json) {
  return guarded([&] {
    require(dataset != nullptr && out != nullptr, "cd_train: null argument");
    TrainConfig cfg;
    if (config_json != nullptr) cfg = train_config_from_json(nlohmann::json::parse(config_json));
    std::optional<std::filesystem::path> dir;
    if (out_dir != nullptr) dir = std::filesystem::path(out_dir);
    TrainResult result = train(cfg, dataset->items, dir);
    if (summary_json != nullptr) {
      nlohmann::json s = {{"steps", cfg.steps}, {"config", train_config_to_json(cfg)}};
      if (!result.log.empty()) s["final"] = step_log_to_json(result.log.back());
      if (!result.histograms.empty()) {
        const auto& h = result.histograms.back().histogram;
        s["histogram"] = {{"mass_high", h.mass_between(0.9, 1.0)}, {"mass_zero", h.mass_between(-0.1, 0.1)}};
      }
      emit_json(s, summary_json);
    }
    *out = new cd_model{std::move(result.model)};
  });
}

cd_status cd_model_load(const char* checkpoint_dir, cd_model** out) {
  return guarded([&] {
    require(checkpoint_dir != nullptr && out != nullptr, "cd_model_load: null argument");
    *out = new cd_model{load_checkpoint(checkpoint_dir)};
  });
}

cd_status cd_model_save(const cd_model* model, const char* checkpoint_dir) {
  return guarded([&] {
    require(model != nullptr && checkpoint_dir != nullptr, "cd_model_save: null argument");
    save_checkpoint(model->model, checkpoint_dir);
  });
}

size_t cd_model_code_dim(const cd_model* model) {
  return model == nullptr ? 0 : static_cast<size_t>(model->model.head.lin_weight.rows());
}

void cd_model_free(cd_model* model) { delete model; }

cd_status cd_evaluate(const cd_model* model, const cd_dataset* dataset, const char* crf_manifest,
                      const char* out_dir, char** report_json) {
  return guarded([&] {
    require(model != nullptr && dataset != nullptr, "cd_evaluate: null argument");
    std::vector<std::optional<RgbImage>> images;
    if (crf_manifest != nullptr) {
      const DatasetManifest manifest = read_manifest(crf_manifest);
      for (const auto& entry : manifest.entries) {
        if (entry.source_image_path) images.emplace_back(read_rgb_ppm(*entry.source_image_path));
        else images.emplace_back(std::nullopt);
      }
    }
    const EvalReport report = evaluate(model->model, dataset->items, crf_manifest ? &images : nullptr);
    if (out_dir != nullptr) {
      const std::filesystem::path dir(out_dir);
      std::filesystem::create_directories(dir);
      std::ofstream csv(dir / "confusion.csv", std::ios::trunc);
      if (!csv) throw Error(ErrorCode::kIo, "cannot write confusion.csv");
      const ConfusionMatrix& cm = report.cluster.metrics.confusion;
      csv << "ground_truth";
      for (std::size_t p = 0; p < cm.n; ++p) csv << ",pred_" << p;
      csv << '\n';
      for (std::size_t g = 0; g < cm.n; ++g) {
        csv << g;
        for (std::size_t p = 0; p < cm.n; ++p) csv << ',' << cm.at(g, p);
        csv << '\n';
      }
      std::size_t k = 0;
      for (const auto& item : dataset->items) {
        if (!item.labels) continue;
        std::string name = item.id;
        for (char& c : name)
          if (c == '/') c = '_';
        write_label_pgm(report.cluster.predictions[k++], dir / (name + ".pred.pgm"));
      }
    }
    emit_json(eval_report_to_json(report), report_json);
  });
}

cd_status cd_diagnose_pr(const cd_dataset* dataset, int self_pairs, char** result_json) {
  return guarded([&] {
    require(dataset != nullptr && result_json != nullptr, "cd_diagnose_pr: null argument");
    std::vector<std::pair<CorrVolume, CoOccurrenceVolume>> pairs;
    const auto& items = dataset->items;
    for (std::size_t a = 0; a < items.size(); ++a) {
      for (std::size_t b = 0; b < items.size(); ++b) {
        if (self_pairs != 0 && a != b) continue;
        if (!items[a].labels || !items[b].labels)
          throw Error(ErrorCode::kConfiguration, "diagnose-pr needs labels for every item");
        pairs.emplace_back(feature_correspondence(items[a].features, items[b].features),
                           label_cooccurrence(*items[a].labels, *items[b].labels));
      }
    }
    const PRCurve curve = correspondence_ap(pairs);
    emit_json({{"average_precision", curve.average_precision},
               {"thresholds", curve.thresholds},
               {"precision", curve.precision},
               {"recall", curve.recall}},
              result_json);
  });
}

cd_status cd_diagnose_hist(const cd_model* model, const cd_dataset* dataset, size_t n_pairs, uint64_t seed,
                           char** result_json) {
  return guarded([&] {
    require(dataset != nullptr && result_json != nullptr, "cd_diagnose_hist: null argument");
    if (dataset->items.empty()) throw Error(ErrorCode::kDegenerateInput, "diagnose-hist: empty dataset");
    SimilarityHistogram total = empty_similarity_histogram();
    const std::size_t per_item = std::max<std::size_t>(1, n_pairs / dataset->items.size());
    for (std::size_t i = 0; i < dataset->items.size(); ++i) {
      const FeatureMap& f = dataset->items[i].features;
      const Matrix codes = model != nullptr ? compute_codes(model->model.head, f) : f.as_matrix();
      const auto part = similarity_histogram(codes, per_item, seed + i);
      for (std::size_t b = 0; b < kHistogramBins; ++b) total.counts[b] += part.counts[b];
    }
    emit_json({{"bin_edges", total.bin_edges},
               {"counts", total.counts},
               {"mass_high", total.mass_between(0.9, 1.0)},
               {"mass_zero", total.mass_between(-0.1, 0.1)}},
              result_json);
  });
}

cd_status cd_knn_stats(const cd_dataset* dataset, size_t k_nn, char** result_json) {
  return guarded([&] {
    require(dataset != nullptr && result_json != nullptr, "cd_knn_stats: null argument");
    const Dataset cropped = has_provenance(dataset->items) ? Dataset() : five_crop_dataset(dataset->items);
    const Dataset& items = cropped.empty() ? dataset->items : cropped;
    const KnnIndex index = build_knn_index(items, k_nn);
    emit_json({{"k", k_nn}, {"entries", index.size()}, {"counts", self_match_stats(index)}}, result_json);
  });
}

cd_status cd_crf_refine(const char* image_ppm, const char* unary_dfa, const char* crf_json,
                        const char* labels_pgm) {
  return guarded([&] {
    require(image_ppm != nullptr && unary_dfa != nullptr && labels_pgm != nullptr, "cd_crf_refine: null argument");
    const RgbImage image = read_rgb_ppm(image_ppm);
    const UnaryField unary = unary_from_feature_map(read_feature_archive(unary_dfa));
    write_label_pgm(meanfield_refine(unary, image, crf_from_json(crf_json)), labels_pgm);
  });
}

cd_status cd_potts_solve(const char* image_ppm, int continuous, size_t dim, size_t steps, uint64_t seed,
                         const char* labels_pgm, const char* codes_ppm, char** result_json) {
  return guarded([&] {
    require(image_ppm != nullptr, "cd_potts_solve: null image path");
    const RgbImage image = read_rgb_ppm(image_ppm);
    PottsSolveOptions opts;
    opts.space = continuous != 0 ? CodeSpace::kContinuous : CodeSpace::kDiscrete;
    opts.dim = dim;
    opts.steps = steps;
    opts.seed = seed;
    const PottsSolution sol = unsupervised_potts_solve(image, CrfParams{}, opts);
    if (labels_pgm != nullptr) write_label_pgm(sol.labels, labels_pgm);
    if (codes_ppm != nullptr) write_rgb_ppm(codes_to_rgb(sol), codes_ppm);
    const std::set<std::uint8_t> distinct(sol.labels.data.begin(), sol.labels.data.end());
    emit_json({{"energy", sol.energy}, {"labels", distinct.size()}}, result_json);
  });
}

cd_status cd_make_crf_demo(const char* out_dir, size_t size, double label_noise, uint64_t seed) {
  return guarded([&] {
    require(out_dir != nullptr, "cd_make_crf_demo: null argument");
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const TwoRegionDemo demo = make_two_region_demo(size, label_noise, seed);
    write_rgb_ppm(demo.image, dir / "image.ppm");
    write_label_pgm(demo.truth, dir / "truth.pgm");
    write_feature_archive(unary_to_feature_map(demo.unary), dir / "unary.dfa");
  });
}

}  // extern "C"
