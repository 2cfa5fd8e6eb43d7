#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentaug/augment.hpp"
#include "latentaug/classifier.hpp"
#include "latentaug/report.hpp"
#include "latentaug/vae.hpp"

namespace latentaug {

// Fully resolved run configuration. Profiles provide the defaults, a JSON
// config file overrides them, and CLI flags override both. The resolved
// struct is persisted as resolved_config.json next to every run's outputs.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string profile = "desk";  // desk | paper
  std::filesystem::path data_root = "data";
  std::filesystem::path out_dir = "out";

  // toy dataset generation
  std::vector<std::int64_t> toy_counts{65, 91, 165};
  std::int64_t image_size = 32;
  double toy_noise = 0.25;
  double toy_overlap = 1.0;

  // splits
  double test_fraction = 0.2;
  double val_fraction = 0.15;

  // per-class VAEs
  std::int64_t vae_latent_dim = 32;
  std::vector<std::int64_t> vae_hidden{512, 256};
  std::int64_t vae_epochs = 300;
  double vae_lr = 1e-3;
  std::int64_t vae_batch = 24;

  // synthetic generation
  std::int64_t synth_count = 300;
  double alpha_lo = 0.2;
  double alpha_hi = 0.8;
  std::vector<std::string> classical_ops{"rot90", "rot180", "rot270", "flip_h", "flip_v"};
  bool augment_synthetic = false;

  // classifier
  std::string clf_arch = "small-cnn";
  std::int64_t clf_epochs = 150;
  std::int64_t clf_batch = 24;
  double clf_lr = 5e-4;
  int clf_patience = 10;
  double clf_factor = 10.0;
  double clf_min_improvement = 1e-4;
  bool clf_use_classical = false;  // classical augmentation in standalone train-clf

  std::string pca_features = "pixels";  // pixels | latent
};

RunConfig profile_defaults(const std::string& profile);
RunConfig load_config_file(const std::filesystem::path& path);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);
void save_resolved_config(const RunConfig& config, const std::filesystem::path& path);

// Number of VAE trainings run concurrently: min(#classes, hardware threads),
// capped by the LATENTAUG_THREADS environment variable.
int vae_thread_count(int num_classes);

DatasetManifest cmd_gen_toy(const RunConfig& config, bool force);
void cmd_split(const RunConfig& config);

struct VaeStageResult {
  std::vector<std::filesystem::path> checkpoints;            // per class
  std::vector<std::vector<VaeEpochStats>> histories;         // per class
};
VaeStageResult cmd_train_vae(const RunConfig& config);

void cmd_generate(const RunConfig& config, std::int64_t count_per_class);

struct ClfStageResult {
  std::filesystem::path checkpoint;
  std::vector<ClfEpochStats> history;
};
ClfStageResult cmd_train_clf(const RunConfig& config);

NamedMetrics cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint,
                          const std::string& name);
void cmd_pca_export(const RunConfig& config);

struct ExperimentResult {
  std::vector<NamedMetrics> metrics;  // real_noaug, real_aug, realgen_noaug, realgen_aug
  std::uint64_t test_split_hash = 0;
  std::vector<std::pair<std::string, std::uint64_t>> checkpoint_hashes;
  std::vector<std::vector<VaeEpochStats>> vae_histories;  // per class
};

// The four-configuration comparison: one shared split, one VAE per class,
// one synthetic pool, four classifier trainings on the identical test split.
ExperimentResult run_experiment(const RunConfig& config);

std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace latentaug
