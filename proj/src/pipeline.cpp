#include "latentaug/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace latentaug {

namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error("stage '" + name + "': " + e.what());
  }
}

ImageGeom infer_geom(const DatasetManifest& manifest) {
  if (manifest.rows.empty()) throw InsufficientDataError("manifest has no rows");
  const ImageBuffer first = read_image(manifest.root / manifest.rows.front().path);
  return first.geom();
}

std::vector<int> labels_of(const std::vector<const ManifestRow*>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto* row : rows) out.push_back(row->label);
  return out;
}

LabeledImages labeled(const DatasetManifest& manifest, const std::vector<const ManifestRow*>& rows,
                      const ImageGeom& geom) {
  return LabeledImages{load_rows_matrix(manifest, rows, geom), labels_of(rows), geom};
}

LabeledImages concat(const LabeledImages& a, const LabeledImages& b) {
  if (b.size() == 0) return a;
  if (a.size() == 0) return b;
  if (!(a.geom == b.geom)) throw DimensionError("concat: geometries differ");
  Tensor::Array data(a.images.size() + b.images.size());
  data.head(a.images.size()) = a.images.array();
  data.tail(b.images.size()) = b.images.array();
  std::vector<int> labels = a.labels;
  labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  return LabeledImages{Tensor({a.size() + b.size(), a.geom.pixels()}, std::move(data)),
                       std::move(labels), a.geom};
}

std::vector<ClassicalOp> parse_ops(const std::vector<std::string>& names) {
  std::vector<ClassicalOp> ops;
  ops.reserve(names.size());
  for (const auto& name : names) ops.push_back(classical_op_from_string(name));
  return ops;
}

// Classically augmented copies of every image in `base` (one per enabled op).
LabeledImages classical_expand(const LabeledImages& base, const std::vector<ClassicalOp>& ops) {
  const std::int64_t n = base.size() * static_cast<std::int64_t>(ops.size());
  if (n == 0) {
    LabeledImages empty;
    empty.geom = base.geom;
    return empty;  // size() == 0; concat treats it as a no-op
  }
  Tensor::Array data(n * base.geom.pixels());
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  std::int64_t row = 0;
  for (std::int64_t i = 0; i < base.size(); ++i) {
    const Tensor flat({base.geom.pixels()},
                      Tensor::Array(base.images.array().segment(i * base.geom.pixels(), base.geom.pixels())));
    const ImageBuffer img = from_planar(base.geom, flat);
    for (ClassicalOp op : ops) {
      const Tensor aug = to_planar_tensor(classical_augment(img, op));
      data.segment(row * base.geom.pixels(), base.geom.pixels()) = aug.array();
      labels.push_back(base.labels[static_cast<std::size_t>(i)]);
      ++row;
    }
  }
  return LabeledImages{Tensor({n, base.geom.pixels()}, std::move(data)), std::move(labels), base.geom};
}

std::filesystem::path vae_checkpoint_path(const RunConfig& config, int label) {
  return config.out_dir / "checkpoints" / ("vae_class" + std::to_string(label) + ".ckpt");
}

void write_vae_history(const std::filesystem::path& path, const std::vector<VaeEpochStats>& history) {
  std::string csv = "epoch,total,reconstruction,kl\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    csv += std::to_string(e) + "," + g17(history[e].total) + "," + g17(history[e].reconstruction) +
           "," + g17(history[e].kl) + "\n";
  }
  write_text(path, csv);
}

void write_clf_history(const std::filesystem::path& path, const std::vector<ClfEpochStats>& history) {
  std::string csv = "epoch,train_loss,val_loss,val_accuracy,lr\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    csv += std::to_string(e) + "," + g17(history[e].train_loss) + "," + g17(history[e].val_loss) +
           "," + g17(history[e].val_accuracy) + "," + g17(history[e].lr) + "\n";
  }
  write_text(path, csv);
}

VaeTrainConfig vae_train_config(const RunConfig& config, const ImageGeom& geom) {
  VaeTrainConfig tc;
  tc.arch = VaeArch{geom, config.vae_latent_dim, config.vae_hidden};
  tc.epochs = config.vae_epochs;
  tc.lr = config.vae_lr;
  tc.batch_size = config.vae_batch;
  return tc;
}

ClfTrainConfig clf_train_config(const RunConfig& config) {
  ClfTrainConfig tc;
  tc.arch = clf_arch_from_string(config.clf_arch);
  tc.epochs = config.clf_epochs;
  tc.batch_size = config.clf_batch;
  tc.lr = config.clf_lr;
  tc.patience = config.clf_patience;
  tc.factor = config.clf_factor;
  tc.min_improvement = config.clf_min_improvement;
  return tc;
}

AugmentPlan augment_plan(const RunConfig& config) {
  AugmentPlan plan;
  plan.alpha_lo = config.alpha_lo;
  plan.alpha_hi = config.alpha_hi;
  plan.classical_ops = parse_ops(config.classical_ops);
  plan.augment_synthetic = config.augment_synthetic;
  plan.seed = config.seed;
  plan.validate();
  return plan;
}

void require_train_split(const DatasetManifest& manifest) {
  if (manifest.select(Split::train).empty()) {
    throw ContractError(
        "no rows carry split=train; assign splits first with `latentaug split --data-root ...`");
  }
}

// Trains the per-class VAEs over a loaded manifest; shared by the standalone
// command and the experiment.
VaeStageResult vae_stage(const RunConfig& config, const DatasetManifest& manifest,
                         const ImageGeom& geom) {
  require_train_split(manifest);
  const int num_classes = manifest.num_classes();
  std::filesystem::create_directories(config.out_dir / "checkpoints");
  std::filesystem::create_directories(config.out_dir / "history");

  // Preload class matrices, then train with per-class streams; scheduling
  // cannot affect results because the streams are independent.
  std::vector<Tensor> class_images;
  for (int k = 0; k < num_classes; ++k) {
    const auto rows = manifest.select(Split::train, k, Provenance::real);
    if (rows.size() < 2) {
      throw InsufficientDataError("class " + std::to_string(k) + " has fewer than 2 real train images");
    }
    class_images.push_back(load_rows_matrix(manifest, rows, geom));
  }

  VaeStageResult result;
  result.checkpoints.resize(static_cast<std::size_t>(num_classes));
  result.histories.resize(static_cast<std::size_t>(num_classes));

  const int threads = vae_thread_count(num_classes);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  auto worker = [&](int worker_id) {
    try {
      for (int k = worker_id; k < num_classes; k += threads) {
        const VaeTrainConfig tc = vae_train_config(config, geom);
        VaeTrainResult trained =
            train_class_vae(class_images[static_cast<std::size_t>(k)], k, tc,
                            RngStream(config.seed, "vae/" + std::to_string(k)));
        const auto path = vae_checkpoint_path(config, k);
        save_checkpoint(trained.model, path);
        write_vae_history(config.out_dir / "history" / ("vae_class" + std::to_string(k) + ".csv"),
                          trained.history);
        result.checkpoints[static_cast<std::size_t>(k)] = path;
        result.histories[static_cast<std::size_t>(k)] = std::move(trained.history);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(worker_id)] = std::current_exception();
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return result;
}

// Replaces the manifest's synthetic rows for every class with freshly
// generated images; deterministic, so regeneration is idempotent.
void generate_stage(const RunConfig& config, DatasetManifest& manifest, const ImageGeom& geom,
                    std::int64_t count_per_class) {
  if (count_per_class < 0) throw DomainError("generate: negative count");
  if (count_per_class == 0) return;
  require_train_split(manifest);
  const int num_classes = manifest.num_classes();
  const AugmentPlan plan = augment_plan(config);

  for (int k = 0; k < num_classes; ++k) {
    const auto ckpt = vae_checkpoint_path(config, k);
    if (!std::filesystem::exists(ckpt)) {
      throw IoError("missing VAE checkpoint for class " + std::to_string(k) + " at '" +
                    ckpt.string() + "'; run `latentaug train-vae` first");
    }
    const VaeModel model = load_checkpoint(ckpt);
    if (!(model.arch().geom == geom)) {
      throw DimensionError("checkpoint for class " + std::to_string(k) +
                           " was trained at a different image geometry");
    }
    const auto rows = manifest.select(Split::train, k, Provenance::real);
    const Tensor images = load_rows_matrix(manifest, rows, geom);
    const auto synth = generate_synthetic(model, images, count_per_class, plan,
                                          RngStream(config.seed, "augment/" + std::to_string(k)));

    // drop this class's previous synthetic rows and files
    std::vector<ManifestRow> kept;
    kept.reserve(manifest.rows.size());
    for (const auto& row : manifest.rows) {
      if (row.provenance == Provenance::synthetic && row.label == k) {
        std::filesystem::remove(manifest.root / row.path);
      } else {
        kept.push_back(row);
      }
    }
    manifest.rows = std::move(kept);

    for (std::size_t i = 0; i < synth.size(); ++i) {
      std::string idx = std::to_string(i);
      while (idx.size() < 4) idx.insert(idx.begin(), '0');
      const std::string id = "s" + std::to_string(k) + "_" + idx;
      const std::string rel = "images/" + std::to_string(k) + "/" + id + ".pgm";
      write_image(manifest.root / rel, from_planar(geom, synth[i].pixels));
      manifest.rows.push_back(ManifestRow{id, rel, k, Split::train, Provenance::synthetic});
    }
  }
  validate_manifest(manifest);
  save_manifest(manifest, manifest.root / "manifest.csv");
}

NamedMetrics evaluate_model(const ClassifierModel& model, const LabeledImages& test,
                            const std::string& name) {
  const std::vector<int> preds = predict_labels(model, test.images);
  const ConfusionMatrix cm = build_confusion(test.labels, preds, model.num_classes());
  return NamedMetrics{name, metrics_from_confusion(cm)};
}

void pca_stage(const RunConfig& config, const DatasetManifest& manifest, const ImageGeom& geom) {
  const int num_classes = manifest.num_classes();
  for (int k = 0; k < num_classes; ++k) {
    std::vector<const ManifestRow*> rows;
    for (const auto* row : manifest.select(Split::train, k)) rows.push_back(row);
    for (const auto* row : manifest.select(Split::val, k)) rows.push_back(row);
    if (rows.size() < 2) continue;
    Tensor features = load_rows_matrix(manifest, rows, geom);
    if (config.pca_features == "latent") {
      const VaeModel model = load_checkpoint(vae_checkpoint_path(config, k));
      NoGradScope guard;
      features = model.encode(features).first;
    } else if (config.pca_features != "pixels") {
      throw ContractError("pca_features must be 'pixels' or 'latent'");
    }
    std::vector<Provenance> provenance;
    provenance.reserve(rows.size());
    for (const auto* row : rows) provenance.push_back(row->provenance);
    write_pca_csv(config.out_dir / ("pca_" + std::to_string(k) + ".csv"), k, features, provenance);
  }
}

}  // namespace

RunConfig profile_defaults(const std::string& profile) {
  RunConfig config;  // desk defaults
  config.profile = profile;
  if (profile == "desk") {
    return config;
  }
  if (profile == "paper") {
    config.vae_latent_dim = 256;
    config.vae_epochs = 1000;
    config.vae_lr = 1e-4;
    return config;
  }
  throw ContractError("unknown profile '" + profile + "' (expected desk or paper)");
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void apply_json(RunConfig& config, const json& j) {
  static const std::vector<std::string> known = {
      "seed",          "profile",      "data_root",         "out_dir",
      "toy_counts",    "image_size",   "toy_noise",         "toy_overlap",
      "test_fraction", "val_fraction", "vae_latent_dim",    "vae_hidden",
      "vae_epochs",    "vae_lr",       "vae_batch",         "synth_count",
      "alpha_lo",      "alpha_hi",     "classical_ops",     "augment_synthetic",
      "clf_arch",      "clf_epochs",   "clf_batch",         "clf_lr",
      "clf_patience",  "clf_factor",   "clf_min_improvement", "clf_use_classical",
      "pca_features"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError("unknown config key '" + key + "'");
    }
  }
  maybe(j, "seed", config.seed);
  maybe(j, "profile", config.profile);
  if (j.contains("data_root")) config.data_root = j.at("data_root").get<std::string>();
  if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
  maybe(j, "toy_counts", config.toy_counts);
  maybe(j, "image_size", config.image_size);
  maybe(j, "toy_noise", config.toy_noise);
  maybe(j, "toy_overlap", config.toy_overlap);
  maybe(j, "test_fraction", config.test_fraction);
  maybe(j, "val_fraction", config.val_fraction);
  maybe(j, "vae_latent_dim", config.vae_latent_dim);
  maybe(j, "vae_hidden", config.vae_hidden);
  maybe(j, "vae_epochs", config.vae_epochs);
  maybe(j, "vae_lr", config.vae_lr);
  maybe(j, "vae_batch", config.vae_batch);
  maybe(j, "synth_count", config.synth_count);
  maybe(j, "alpha_lo", config.alpha_lo);
  maybe(j, "alpha_hi", config.alpha_hi);
  maybe(j, "classical_ops", config.classical_ops);
  maybe(j, "augment_synthetic", config.augment_synthetic);
  maybe(j, "clf_arch", config.clf_arch);
  maybe(j, "clf_epochs", config.clf_epochs);
  maybe(j, "clf_batch", config.clf_batch);
  maybe(j, "clf_lr", config.clf_lr);
  maybe(j, "clf_patience", config.clf_patience);
  maybe(j, "clf_factor", config.clf_factor);
  maybe(j, "clf_min_improvement", config.clf_min_improvement);
  maybe(j, "clf_use_classical", config.clf_use_classical);
  maybe(j, "pca_features", config.pca_features);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("config file '" + path.string() + "': " + e.what());
  }
  if (!j.is_object()) throw ParseError("config file '" + path.string() + "' must hold a JSON object");
  return j;
}

}  // namespace

RunConfig load_config_file(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  RunConfig config = profile_defaults(j.value("profile", std::string("desk")));
  apply_json(config, j);
  return config;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  apply_json(config, read_json_file(path));
}

std::string config_to_json(const RunConfig& config) {
  json j;
  j["seed"] = config.seed;
  j["profile"] = config.profile;
  j["data_root"] = config.data_root.string();
  j["out_dir"] = config.out_dir.string();
  j["toy_counts"] = config.toy_counts;
  j["image_size"] = config.image_size;
  j["toy_noise"] = config.toy_noise;
  j["toy_overlap"] = config.toy_overlap;
  j["test_fraction"] = config.test_fraction;
  j["val_fraction"] = config.val_fraction;
  j["vae_latent_dim"] = config.vae_latent_dim;
  j["vae_hidden"] = config.vae_hidden;
  j["vae_epochs"] = config.vae_epochs;
  j["vae_lr"] = config.vae_lr;
  j["vae_batch"] = config.vae_batch;
  j["synth_count"] = config.synth_count;
  j["alpha_lo"] = config.alpha_lo;
  j["alpha_hi"] = config.alpha_hi;
  j["classical_ops"] = config.classical_ops;
  j["augment_synthetic"] = config.augment_synthetic;
  j["clf_arch"] = config.clf_arch;
  j["clf_epochs"] = config.clf_epochs;
  j["clf_batch"] = config.clf_batch;
  j["clf_lr"] = config.clf_lr;
  j["clf_patience"] = config.clf_patience;
  j["clf_factor"] = config.clf_factor;
  j["clf_min_improvement"] = config.clf_min_improvement;
  j["clf_use_classical"] = config.clf_use_classical;
  j["pca_features"] = config.pca_features;
  return j.dump(2) + "\n";
}

void save_resolved_config(const RunConfig& config, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  write_text(path, config_to_json(config));
}

int vae_thread_count(int num_classes) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  int threads = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(num_classes)));
  if (const char* env = std::getenv("LATENTAUG_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) threads = std::min(threads, cap);
    } catch (const std::exception&) {
      throw ContractError("LATENTAUG_THREADS must be a positive integer");
    }
  }
  return std::max(1, threads);
}

DatasetManifest cmd_gen_toy(const RunConfig& config, bool force) {
  const auto& root = config.data_root;
  if (std::filesystem::exists(root) && !std::filesystem::is_empty(root)) {
    if (!force) {
      throw RefusalError("'" + root.string() + "' already contains data; pass --force to regenerate");
    }
    std::filesystem::remove_all(root / "images");
    std::filesystem::remove(root / "manifest.csv");
  }
  ToySpec spec;
  spec.counts = config.toy_counts;
  spec.image_size = config.image_size;
  spec.noise_sigma = config.toy_noise;
  spec.overlap = config.toy_overlap;
  spec.seed = config.seed;
  return generate_toy_dataset(spec, root);
}

void cmd_split(const RunConfig& config) {
  DatasetManifest manifest = load_manifest(config.data_root / "manifest.csv");
  stratified_split(manifest, config.test_fraction, config.seed);
  carve_validation(manifest, config.val_fraction, config.seed);
  save_manifest(manifest, config.data_root / "manifest.csv");
}

VaeStageResult cmd_train_vae(const RunConfig& config) {
  const DatasetManifest manifest = load_manifest(config.data_root / "manifest.csv");
  return vae_stage(config, manifest, infer_geom(manifest));
}

void cmd_generate(const RunConfig& config, std::int64_t count_per_class) {
  DatasetManifest manifest = load_manifest(config.data_root / "manifest.csv");
  generate_stage(config, manifest, infer_geom(manifest), count_per_class);
}

ClfStageResult cmd_train_clf(const RunConfig& config) {
  const DatasetManifest manifest = load_manifest(config.data_root / "manifest.csv");
  const ImageGeom geom = infer_geom(manifest);
  require_train_split(manifest);
  const auto val_rows = manifest.select(Split::val);
  if (val_rows.empty()) {
    throw InsufficientDataError("no validation rows; run `latentaug split --data-root ...` first");
  }
  const int num_classes = manifest.num_classes();

  LabeledImages train = labeled(manifest, manifest.select(Split::train, std::nullopt, Provenance::real), geom);
  const auto synth_rows = manifest.select(Split::train, std::nullopt, Provenance::synthetic);
  LabeledImages synth;
  synth.geom = geom;
  if (!synth_rows.empty()) synth = labeled(manifest, synth_rows, geom);

  if (config.clf_use_classical) {
    const auto ops = parse_ops(config.classical_ops);
    train = concat(train, classical_expand(train, ops));
    if (config.augment_synthetic && synth.size() > 0) {
      synth = concat(synth, classical_expand(synth, ops));
    }
  }
  if (synth.size() > 0) train = concat(train, synth);

  const LabeledImages val = labeled(manifest, val_rows, geom);
  ClfTrainResult trained =
      train_classifier(train, val, num_classes, clf_train_config(config), RngStream(config.seed, "clf"));

  std::filesystem::create_directories(config.out_dir / "checkpoints");
  std::filesystem::create_directories(config.out_dir / "history");
  const auto ckpt = config.out_dir / "checkpoints" / "clf.ckpt";
  save_classifier_checkpoint(trained.model, ckpt);
  write_clf_history(config.out_dir / "history" / "clf.csv", trained.history);
  return ClfStageResult{ckpt, std::move(trained.history)};
}

NamedMetrics cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint,
                          const std::string& name) {
  const DatasetManifest manifest = load_manifest(config.data_root / "manifest.csv");
  const ImageGeom geom = infer_geom(manifest);
  const auto test_rows = manifest.select(Split::test);
  if (test_rows.empty()) {
    throw InsufficientDataError("no test rows; run `latentaug split --data-root ...` first");
  }
  const ClassifierModel model = load_classifier_checkpoint(checkpoint);
  return evaluate_model(model, labeled(manifest, test_rows, geom), name);
}

void cmd_pca_export(const RunConfig& config) {
  const DatasetManifest manifest = load_manifest(config.data_root / "manifest.csv");
  std::filesystem::create_directories(config.out_dir);
  pca_stage(config, manifest, infer_geom(manifest));
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for hashing");
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return detail::fnv1a(blob);
}

ExperimentResult run_experiment(const RunConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  save_resolved_config(config, config.out_dir / "resolved_config.json");

  ExperimentResult result;
  DatasetManifest manifest;
  ImageGeom geom;

  stage("split", [&] {
    manifest = load_manifest(config.data_root / "manifest.csv");
    geom = infer_geom(manifest);
    // reset to real data: the experiment owns synthetic generation
    std::vector<ManifestRow> kept;
    for (const auto& row : manifest.rows) {
      if (row.provenance == Provenance::synthetic) {
        std::filesystem::remove(manifest.root / row.path);
      } else {
        kept.push_back(row);
      }
    }
    manifest.rows = std::move(kept);
    stratified_split(manifest, config.test_fraction, config.seed);
    carve_validation(manifest, config.val_fraction, config.seed);
    save_manifest(manifest, manifest.root / "manifest.csv");
    result.test_split_hash = split_hash(manifest, Split::test);
    return 0;
  });

  stage("train-vae", [&] {
    VaeStageResult vae = vae_stage(config, manifest, geom);
    result.vae_histories = std::move(vae.histories);
    for (const auto& path : vae.checkpoints) {
      result.checkpoint_hashes.emplace_back(path.filename().string(), file_hash(path));
    }
    return 0;
  });

  stage("generate", [&] {
    generate_stage(config, manifest, geom, config.synth_count);
    return 0;
  });

  stage("train-classifiers", [&] {
    const LabeledImages test = labeled(manifest, manifest.select(Split::test), geom);
    const LabeledImages val = labeled(manifest, manifest.select(Split::val), geom);
    const LabeledImages real_train =
        labeled(manifest, manifest.select(Split::train, std::nullopt, Provenance::real), geom);
    const auto synth_rows = manifest.select(Split::train, std::nullopt, Provenance::synthetic);
    LabeledImages synth;
    synth.geom = geom;
    if (!synth_rows.empty()) synth = labeled(manifest, synth_rows, geom);

    const auto ops = parse_ops(config.classical_ops);
    const LabeledImages real_classical = classical_expand(real_train, ops);
    LabeledImages synth_for_aug = synth;
    if (config.augment_synthetic && synth.size() > 0) {
      synth_for_aug = concat(synth, classical_expand(synth, ops));
    }

    struct ConfigRow {
      std::string name;
      LabeledImages train;
    };
    std::vector<ConfigRow> rows;
    rows.push_back({"real_noaug", real_train});
    rows.push_back({"real_aug", concat(real_train, real_classical)});
    rows.push_back({"realgen_noaug", concat(real_train, synth)});
    rows.push_back({"realgen_aug", concat(concat(real_train, real_classical), synth_for_aug)});

    const int num_classes = manifest.num_classes();
    for (const auto& row : rows) {
      if (split_hash(manifest, Split::test) != result.test_split_hash) {
        throw ContractError("test split changed between configurations");
      }
      ClfTrainResult trained = train_classifier(row.train, val, num_classes, clf_train_config(config),
                                                RngStream(config.seed, "clf/" + row.name));
      const auto ckpt = config.out_dir / "checkpoints" / ("clf_" + row.name + ".ckpt");
      save_classifier_checkpoint(trained.model, ckpt);
      write_clf_history(config.out_dir / "history" / ("clf_" + row.name + ".csv"), trained.history);
      result.checkpoint_hashes.emplace_back(ckpt.filename().string(), file_hash(ckpt));
      result.metrics.push_back(evaluate_model(trained.model, test, row.name));
    }
    return 0;
  });

  stage("report", [&] {
    emit_report(result.metrics, config.out_dir);
    pca_stage(config, manifest, geom);
    json summary;
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(result.test_split_hash));
    summary["test_split_hash"] = hex;
    json ckpts = json::object();
    for (const auto& [name, hash] : result.checkpoint_hashes) {
      std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
      ckpts[name] = hex;
    }
    summary["checkpoints"] = ckpts;
    write_text(config.out_dir / "summary.json", summary.dump(2) + "\n");
    return 0;
  });

  return result;
}

}  // namespace latentaug
