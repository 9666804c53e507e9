// Command-line front end; talks to the library only through the C API.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "corrdistill/corrdistill.h"

namespace {

struct Failure {
  cd_status status;
};

void check(cd_status status) {
  if (status != CD_OK) throw Failure{status};
}

struct DatasetDeleter {
  void operator()(cd_dataset* d) const { cd_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(cd_model* m) const { cd_model_free(m); }
};
using DatasetPtr = std::unique_ptr<cd_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<cd_model, ModelDeleter>;

nlohmann::json take_json(char* raw) {
  std::unique_ptr<char, void (*)(char*)> owned(raw, cd_string_free);
  return raw == nullptr ? nlohmann::json() : nlohmann::json::parse(raw);
}

DatasetPtr load(const std::string& manifest) {
  cd_dataset* d = nullptr;
  check(cd_dataset_load(manifest.c_str(), &d));
  return DatasetPtr(d);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `path`, or stdout when path is empty or "-".
void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distill dense features into segmentation codes"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, checkpoint_path, image_path, unary_path, crf_json;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "Train a head and probes");
  train->add_option("--config", config_path, "JSON config (optional)");
  train->add_option("--data", data_path, "dataset manifest")->required();
  train->add_option("--out", out_path, "output directory")->required();

  bool use_crf = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint directory")->required();
  eval->add_option("--data", data_path, "dataset manifest")->required();
  eval->add_option("--out", out_path, "directory for confusion.csv and predicted PGMs");
  eval->add_flag("--crf", use_crf, "CRF-refine with the manifest's source images");

  bool all_pairs = false;
  auto* pr = app.add_subcommand("diagnose-pr", "Correspondence precision/recall CSV");
  pr->add_option("--data", data_path, "dataset manifest")->required();
  pr->add_option("--out", out_path, "CSV path (default stdout)");
  pr->add_flag("--all-pairs", all_pairs, "score every ordered image pair, not just self pairs");

  std::size_t n_pairs = 4096;
  auto* hist = app.add_subcommand("diagnose-hist", "Within-image similarity histogram CSV");
  hist->add_option("--data", data_path, "dataset manifest")->required();
  hist->add_option("--checkpoint", checkpoint_path, "use codes from this checkpoint instead of raw features");
  hist->add_option("--pairs", n_pairs, "sampled location pairs");
  hist->add_option("--seed", seed, "sampling seed");
  hist->add_option("--out", out_path, "CSV path (default stdout)");

  std::size_t k_nn = 7;
  auto* knn = app.add_subcommand("knn-stats", "Same-image neighbour count histogram CSV");
  knn->add_option("--data", data_path, "dataset manifest")->required();
  knn->add_option("--k", k_nn, "neighbours per entry");
  knn->add_option("--out", out_path, "CSV path (default stdout)");

  std::size_t demo_size = 32, potts_dim = 2, potts_steps = 500;
  double label_noise = 0.1;
  bool continuous = false;
  auto* crf = app.add_subcommand("crf-demo", "CRF refinement and unsupervised Potts solve");
  crf->add_option("--image", image_path, "PPM image (default: generated two-region image)");
  crf->add_option("--unary", unary_path, "unary archive, classes x H x W");
  crf->add_option("--params", crf_json, "CRF parameters as inline JSON");
  crf->add_option("--out", out_path, "output directory")->required();
  crf->add_option("--seed", seed, "seed for the generated demo and the solver");
  crf->add_option("--size", demo_size, "generated image side");
  crf->add_option("--noise", label_noise, "generated unary label-noise rate");
  crf->add_option("--dim", potts_dim, "Potts code dimension");
  crf->add_option("--steps", potts_steps, "Potts solver steps");
  crf->add_flag("--continuous", continuous, "continuous unit-vector codes instead of discrete labels");

  std::size_t n_images = 50, grid = 16, n_classes = 5, channels = 32;
  double sigma = 0.1;
  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled corpus");
  synth->add_option("--seed", seed, "corpus seed");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--images", n_images, "number of images");
  synth->add_option("--grid", grid, "feature grid side");
  synth->add_option("--classes", n_classes, "number of classes");
  synth->add_option("--channels", channels, "feature channels");
  synth->add_option("--sigma", sigma, "feature noise");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto data = load(data_path);
      const std::string config = config_path.empty() ? std::string() : read_text(config_path);
      cd_model* model = nullptr;
      char* summary = nullptr;
      check(cd_train(config_path.empty() ? nullptr : config.c_str(), data.get(), out_path.c_str(), &model,
                     &summary));
      ModelPtr owned(model);
      std::cout << take_json(summary).dump(2) << '\n';
    } else if (*eval) {
      auto data = load(data_path);
      cd_model* raw = nullptr;
      check(cd_model_load(checkpoint_path.c_str(), &raw));
      ModelPtr model(raw);
      char* report = nullptr;
      check(cd_evaluate(model.get(), data.get(), use_crf ? data_path.c_str() : nullptr,
                        out_path.empty() ? nullptr : out_path.c_str(), &report));
      std::cout << take_json(report).dump(2) << '\n';
    } else if (*pr) {
      auto data = load(data_path);
      char* raw = nullptr;
      check(cd_diagnose_pr(data.get(), all_pairs ? 0 : 1, &raw));
      const auto j = take_json(raw);
      std::ostringstream csv;
      csv.precision(10);
      csv << "threshold,precision,recall\n";
      for (std::size_t i = 0; i < j["thresholds"].size(); ++i)
        csv << j["thresholds"][i].get<double>() << ',' << j["precision"][i].get<double>() << ','
            << j["recall"][i].get<double>() << '\n';
      write_output(out_path, csv.str());
      std::cerr << "average_precision " << j["average_precision"].get<double>() << '\n';
    } else if (*hist) {
      auto data = load(data_path);
      ModelPtr model;
      if (!checkpoint_path.empty()) {
        cd_model* raw = nullptr;
        check(cd_model_load(checkpoint_path.c_str(), &raw));
        model.reset(raw);
      }
      char* raw = nullptr;
      check(cd_diagnose_hist(model.get(), data.get(), n_pairs, seed, &raw));
      const auto j = take_json(raw);
      std::ostringstream csv;
      csv << "bin_left,bin_right,count\n";
      for (std::size_t b = 0; b < j["counts"].size(); ++b)
        csv << j["bin_edges"][b].get<double>() << ',' << j["bin_edges"][b + 1].get<double>() << ','
            << j["counts"][b].get<std::uint64_t>() << '\n';
      write_output(out_path, csv.str());
    } else if (*knn) {
      auto data = load(data_path);
      char* raw = nullptr;
      check(cd_knn_stats(data.get(), k_nn, &raw));
      const auto j = take_json(raw);
      std::ostringstream csv;
      csv << "same_image_neighbors,count\n";
      for (std::size_t b = 0; b < j["counts"].size(); ++b) csv << b << ',' << j["counts"][b].get<std::uint64_t>() << '\n';
      write_output(out_path, csv.str());
    } else if (*crf) {
      std::filesystem::create_directories(out_path);
      if (image_path.empty()) {
        check(cd_make_crf_demo(out_path.c_str(), demo_size, label_noise, seed));
        image_path = out_path + "/image.ppm";
        if (unary_path.empty()) unary_path = out_path + "/unary.dfa";
      }
      if (!unary_path.empty()) {
        const std::string refined = out_path + "/refined.pgm";
        check(cd_crf_refine(image_path.c_str(), unary_path.c_str(), crf_json.empty() ? nullptr : crf_json.c_str(),
                            refined.c_str()));
        std::cout << "refined labels: " << refined << '\n';
      }
      const std::string labels = out_path + "/potts_labels.pgm";
      const std::string codes = out_path + "/potts_codes.ppm";
      char* raw = nullptr;
      check(cd_potts_solve(image_path.c_str(), continuous ? 1 : 0, potts_dim, potts_steps, seed, labels.c_str(),
                           codes.c_str(), &raw));
      const auto j = take_json(raw);
      std::cout << "potts labels: " << labels << " (" << j["labels"].get<int>() << " distinct)\n"
                << "potts codes: " << codes << '\n'
                << "energy: " << j["energy"].front().get<double>() << " -> " << j["energy"].back().get<double>()
                << '\n';
    } else if (*synth) {
      cd_dataset* raw = nullptr;
      check(cd_dataset_synthetic(n_images, grid, n_classes, channels, sigma, seed, &raw));
      DatasetPtr data(raw);
      check(cd_dataset_save(data.get(), out_path.c_str()));
      std::cout << "wrote " << cd_dataset_size(data.get()) << " items to " << out_path << "/manifest.json\n";
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << cd_status_name(f.status) << "): " << cd_last_error() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
