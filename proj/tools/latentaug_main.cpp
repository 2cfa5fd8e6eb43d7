#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "latentaug/pipeline.hpp"

using namespace latentaug;

namespace {

// --config and --profile decide which defaults apply, so they are resolved
// before the full CLI parse overrides individual fields.
std::optional<std::string> scan_flag(int argc, char** argv, const std::string& name) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == name && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind(name + "=", 0) == 0) return arg.substr(name.size() + 1);
  }
  return std::nullopt;
}

std::string peek_profile(const std::filesystem::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw IoError("cannot open config file '" + config_path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config file '" + config_path.string() + "': " + e.what());
  }
  return j.value("profile", std::string("desk"));
}

void print_metrics_line(const NamedMetrics& m) {
  std::printf("%-14s overall_acc=%.2f%% prec=%.2f%% rec=%.2f%% f1=%.2f%%", m.config.c_str(),
              m.metrics.overall_accuracy * 100, m.metrics.macro_precision * 100,
              m.metrics.macro_recall * 100, m.metrics.macro_f1 * 100);
  for (std::size_t k = 0; k < m.metrics.per_class_accuracy.size(); ++k) {
    std::printf(" class%zu=%.2f%%", k, m.metrics.per_class_accuracy[k] * 100);
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  try {
    const auto config_file = scan_flag(argc, argv, "--config");
    std::string profile = scan_flag(argc, argv, "--profile").value_or("");
    if (profile.empty() && config_file) profile = peek_profile(*config_file);
    if (profile.empty()) profile = "desk";
    cfg = profile_defaults(profile);
    if (config_file) {
      apply_config_file(cfg, *config_file);
      cfg.profile = profile;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"Per-class VAE latent-interpolation augmentation pipeline"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_dummy;
  std::string data_root = cfg.data_root.string();
  std::string out_dir = cfg.out_dir.string();
  app.add_option("--config", config_dummy, "JSON config file (flat keys mirroring the run config)");
  app.add_option("--profile", cfg.profile, "Configuration profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", cfg.seed, "Master seed for all random streams");
  app.add_option("--data-root", data_root, "Dataset root (manifest.csv and images/)");
  app.add_option("--out", out_dir, "Output directory for checkpoints, histories and reports");

  auto* gen_toy = app.add_subcommand("gen-toy", "Generate the deterministic imbalanced toy dataset");
  bool force = false;
  gen_toy->add_option("--counts", cfg.toy_counts, "Per-class image counts")->delimiter(',');
  gen_toy->add_option("--size", cfg.image_size, "Image side length");
  gen_toy->add_option("--noise", cfg.toy_noise, "Gaussian pixel noise level");
  gen_toy->add_option("--overlap", cfg.toy_overlap, "Blend factor toward the majority class");
  gen_toy->add_flag("--force", force, "Overwrite an existing dataset");

  auto* split = app.add_subcommand("split", "Assign stratified train/val/test splits");
  split->add_option("--test-fraction", cfg.test_fraction, "Per-class test fraction");
  split->add_option("--val-fraction", cfg.val_fraction, "Validation fraction of the train rows");

  auto* train_vae = app.add_subcommand("train-vae", "Train one VAE per class on the train split");
  train_vae->add_option("--latent", cfg.vae_latent_dim, "Latent dimension");
  train_vae->add_option("--epochs", cfg.vae_epochs, "Training epochs");
  train_vae->add_option("--lr", cfg.vae_lr, "Adam learning rate");
  train_vae->add_option("--batch", cfg.vae_batch, "Batch size");
  train_vae->add_option("--hidden", cfg.vae_hidden, "Encoder hidden widths")->delimiter(',');

  auto* generate = app.add_subcommand("generate", "Decode latent interpolations into synthetic images");
  std::int64_t gen_count = -1;
  generate->add_option("--count", gen_count, "Synthetic images per class");
  generate->add_option("--alpha-lo", cfg.alpha_lo, "Lower interpolation weight");
  generate->add_option("--alpha-hi", cfg.alpha_hi, "Upper interpolation weight");

  auto* train_clf = app.add_subcommand("train-clf", "Train the classifier on the current train split");
  train_clf->add_option("--arch", cfg.clf_arch, "Architecture")->check(CLI::IsMember({"small-cnn", "mlp"}));
  train_clf->add_option("--epochs", cfg.clf_epochs, "Training epochs");
  train_clf->add_option("--lr", cfg.clf_lr, "Initial learning rate");
  train_clf->add_option("--batch", cfg.clf_batch, "Batch size");
  train_clf->add_option("--patience", cfg.clf_patience, "Plateau patience (epochs)");
  train_clf->add_flag("--with-classical-aug", cfg.clf_use_classical,
                      "Add classical augmentations of the real train rows");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a classifier checkpoint on the test split");
  std::string eval_checkpoint;
  std::string eval_name = "eval";
  evaluate->add_option("--checkpoint", eval_checkpoint, "Classifier checkpoint path");
  evaluate->add_option("--name", eval_name, "Configuration name used in the report");

  auto* experiment = app.add_subcommand("run-experiment", "Run the four-configuration comparison");
  experiment->add_option("--count", cfg.synth_count, "Synthetic images per class");
  experiment->add_option("--vae-epochs", cfg.vae_epochs, "VAE training epochs");
  experiment->add_option("--clf-epochs", cfg.clf_epochs, "Classifier training epochs");
  experiment->add_option("--arch", cfg.clf_arch, "Classifier architecture")
      ->check(CLI::IsMember({"small-cnn", "mlp"}));

  auto* pca = app.add_subcommand("pca-export", "Write per-class PCA scatter data");
  pca->add_option("--features", cfg.pca_features, "Feature source")
      ->check(CLI::IsMember({"pixels", "latent"}));

  CLI11_PARSE(app, argc, argv);

  cfg.data_root = data_root;
  cfg.out_dir = out_dir;

  try {
    save_resolved_config(cfg, cfg.out_dir / "resolved_config.json");

    if (gen_toy->parsed()) {
      const DatasetManifest manifest = cmd_gen_toy(cfg, force);
      std::printf("toy dataset at %s\n", cfg.data_root.string().c_str());
      for (int k = 0; k < manifest.num_classes(); ++k) {
        std::printf("  class %d: %zu images\n", k, manifest.select(std::nullopt, k).size());
      }
    } else if (split->parsed()) {
      cmd_split(cfg);
      const DatasetManifest manifest = load_manifest(cfg.data_root / "manifest.csv");
      std::printf("split: %zu train / %zu val / %zu test\n", manifest.select(Split::train).size(),
                  manifest.select(Split::val).size(), manifest.select(Split::test).size());
    } else if (train_vae->parsed()) {
      const VaeStageResult result = cmd_train_vae(cfg);
      for (std::size_t k = 0; k < result.checkpoints.size(); ++k) {
        std::printf("class %zu: %s (final loss %.4f over %zu epochs)\n", k,
                    result.checkpoints[k].string().c_str(), result.histories[k].back().total,
                    result.histories[k].size());
      }
    } else if (generate->parsed()) {
      const std::int64_t count = gen_count >= 0 ? gen_count : cfg.synth_count;
      cmd_generate(cfg, count);
      std::printf("generated %lld synthetic images per class\n", static_cast<long long>(count));
    } else if (train_clf->parsed()) {
      const ClfStageResult result = cmd_train_clf(cfg);
      double best = result.history.front().val_loss;
      for (const auto& e : result.history) best = std::min(best, e.val_loss);
      std::printf("classifier at %s (best val loss %.4f)\n", result.checkpoint.string().c_str(), best);
    } else if (evaluate->parsed()) {
      if (eval_checkpoint.empty()) {
        eval_checkpoint = (cfg.out_dir / "checkpoints" / "clf.ckpt").string();
      }
      const NamedMetrics metrics = cmd_evaluate(cfg, eval_checkpoint, eval_name);
      emit_report({metrics}, cfg.out_dir);
      print_metrics_line(metrics);
    } else if (experiment->parsed()) {
      const ExperimentResult result = run_experiment(cfg);
      for (const auto& m : result.metrics) print_metrics_line(m);
      std::printf("report written to %s\n", cfg.out_dir.string().c_str());
    } else if (pca->parsed()) {
      cmd_pca_export(cfg);
      std::printf("pca exports written to %s\n", cfg.out_dir.string().c_str());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
