#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "latentaug/pipeline.hpp"

using namespace latentaug;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "latentaug_pipeline_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Small but non-trivial settings so a full experiment runs in about a second.
RunConfig tiny_config(const std::filesystem::path& root) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.data_root = root / "data";
  cfg.out_dir = root / "out";
  cfg.toy_counts = {10, 12, 16};
  cfg.image_size = 12;
  cfg.toy_noise = 0.06;
  cfg.toy_overlap = 0.5;
  cfg.vae_latent_dim = 4;
  cfg.vae_hidden = {24};
  cfg.vae_epochs = 20;
  cfg.vae_lr = 2e-3;
  cfg.vae_batch = 8;
  cfg.synth_count = 6;
  cfg.clf_arch = "mlp";
  cfg.clf_epochs = 6;
  cfg.clf_batch = 8;
  cfg.clf_lr = 3e-3;
  return cfg;
}

}  // namespace

TEST_CASE("gen-toy refuses to overwrite without force") {
  const auto root = fresh_dir("refusal");
  RunConfig cfg = tiny_config(root);
  cmd_gen_toy(cfg, false);
  CHECK_THROWS_AS(cmd_gen_toy(cfg, false), RefusalError);
  CHECK_NOTHROW(cmd_gen_toy(cfg, true));
}

TEST_CASE("train-vae without a split fails with a message naming the split command") {
  const auto root = fresh_dir("nosplit");
  RunConfig cfg = tiny_config(root);
  cmd_gen_toy(cfg, false);
  try {
    cmd_train_vae(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("split") != std::string::npos);
  }
}

TEST_CASE("generate without checkpoints names the missing class") {
  const auto root = fresh_dir("nockpt");
  RunConfig cfg = tiny_config(root);
  cmd_gen_toy(cfg, false);
  cmd_split(cfg);
  try {
    cmd_generate(cfg, 4);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("class 0") != std::string::npos);
  }
}

TEST_CASE("generate with count 0 leaves the manifest unchanged") {
  const auto root = fresh_dir("gen0");
  RunConfig cfg = tiny_config(root);
  cmd_gen_toy(cfg, false);
  cmd_split(cfg);
  const std::string before = read_bytes(cfg.data_root / "manifest.csv");
  cmd_generate(cfg, 0);
  CHECK(read_bytes(cfg.data_root / "manifest.csv") == before);
}

TEST_CASE("full experiment produces the four configurations and all artifacts") {
  const auto root = fresh_dir("experiment");
  RunConfig cfg = tiny_config(root);
  cmd_gen_toy(cfg, false);

  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.metrics.size() == 4);
  CHECK(result.metrics[0].config == "real_noaug");
  CHECK(result.metrics[1].config == "real_aug");
  CHECK(result.metrics[2].config == "realgen_noaug");
  CHECK(result.metrics[3].config == "realgen_aug");
  CHECK(result.vae_histories.size() == 3);
  for (const auto& h : result.vae_histories) CHECK(h.size() == 20);

  for (const char* name :
       {"metrics.csv", "metrics.json", "class_acc_bars.csv", "resolved_config.json", "summary.json",
        "pca_0.csv", "pca_1.csv", "pca_2.csv"}) {
    CHECK(std::filesystem::exists(cfg.out_dir / name));
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(std::filesystem::exists(cfg.out_dir / "checkpoints" /
                                  ("vae_class" + std::to_string(k) + ".ckpt")));
  }
  for (const char* name : {"real_noaug", "real_aug", "realgen_noaug", "realgen_aug"}) {
    CHECK(std::filesystem::exists(cfg.out_dir / "checkpoints" / ("clf_" + std::string(name) + ".ckpt")));
    CHECK(std::filesystem::exists(cfg.out_dir / "history" / ("clf_" + std::string(name) + ".csv")));
  }

  // manifest holds exactly synth_count synthetic train rows per class
  const DatasetManifest manifest = load_manifest(cfg.data_root / "manifest.csv");
  validate_manifest(manifest);
  for (int k = 0; k < 3; ++k) {
    const auto synth = manifest.select(std::nullopt, k, Provenance::synthetic);
    CHECK(synth.size() == 6);
    for (const auto* row : synth) CHECK(row->split == Split::train);
  }

  // baseline row anchors the improvement column
  const std::string bars = read_bytes(cfg.out_dir / "class_acc_bars.csv");
  CHECK(bars.find("real_noaug,0,") != std::string::npos);
}

TEST_CASE("experiments are byte-identical across reruns and from the resolved config") {
  const auto root = fresh_dir("determinism");
  RunConfig cfg = tiny_config(root);
  cmd_gen_toy(cfg, false);

  const ExperimentResult a = run_experiment(cfg);
  const std::string metrics_a = read_bytes(cfg.out_dir / "metrics.csv");
  const std::string resolved = read_bytes(cfg.out_dir / "resolved_config.json");

  const ExperimentResult b = run_experiment(cfg);
  CHECK(read_bytes(cfg.out_dir / "metrics.csv") == metrics_a);
  REQUIRE(a.checkpoint_hashes.size() == b.checkpoint_hashes.size());
  for (std::size_t i = 0; i < a.checkpoint_hashes.size(); ++i) {
    CHECK(a.checkpoint_hashes[i].first == b.checkpoint_hashes[i].first);
    CHECK(a.checkpoint_hashes[i].second == b.checkpoint_hashes[i].second);
  }
  CHECK(a.test_split_hash == b.test_split_hash);

  // rerun purely from the persisted resolved config
  const auto cfg_path = root / "replay.json";
  std::ofstream(cfg_path) << resolved;
  const RunConfig replay = load_config_file(cfg_path);
  CHECK(replay.seed == cfg.seed);
  CHECK(replay.vae_epochs == cfg.vae_epochs);
  run_experiment(replay);
  CHECK(read_bytes(cfg.out_dir / "metrics.csv") == metrics_a);
}

TEST_CASE("config precedence: profile defaults then file overrides") {
  CHECK(profile_defaults("desk").vae_latent_dim == 32);
  CHECK(profile_defaults("paper").vae_latent_dim == 256);
  CHECK(profile_defaults("paper").vae_epochs == 1000);
  CHECK(profile_defaults("paper").vae_lr == 1e-4);
  CHECK(profile_defaults("paper").clf_lr == 5e-4);
  CHECK(profile_defaults("paper").clf_batch == 24);
  CHECK(profile_defaults("paper").seed == 42);
  CHECK(profile_defaults("paper").synth_count == 300);
  CHECK_THROWS_AS(profile_defaults("gpu"), ContractError);

  const auto root = fresh_dir("config");
  const auto path = root / "cfg.json";
  std::ofstream(path) << R"({"profile": "paper", "vae_epochs": 77, "clf_arch": "mlp"})";
  const RunConfig cfg = load_config_file(path);
  CHECK(cfg.vae_latent_dim == 256);  // from the paper profile
  CHECK(cfg.vae_epochs == 77);       // file override
  CHECK(cfg.clf_arch == "mlp");

  const auto bad = root / "bad.json";
  std::ofstream(bad) << R"({"vae_epocs": 3})";
  CHECK_THROWS_AS(load_config_file(bad), ParseError);
}

TEST_CASE("cli binary round trip") {
  const auto root = fresh_dir("cli");
  const std::string bin = LATENTAUG_CLI_PATH;
  const std::string data = (root / "data").string();
  const std::string out = (root / "out").string();

  auto run = [&](const std::string& args) {
    const std::string cmd = bin + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
  };

  CHECK(run("gen-toy --data-root " + data + " --out " + out +
            " --counts 8,9,12 --size 12 --seed 3") == 0);
  CHECK(run("split --data-root " + data + " --out " + out + " --seed 3") == 0);
  CHECK(run("train-vae --data-root " + data + " --out " + out +
            " --seed 3 --latent 4 --hidden 16 --epochs 5 --lr 2e-3") == 0);
  CHECK(run("generate --data-root " + data + " --out " + out + " --seed 3 --count 4") == 0);
  CHECK(run("train-clf --data-root " + data + " --out " + out +
            " --seed 3 --arch mlp --epochs 3 --batch 8") == 0);
  CHECK(run("evaluate --data-root " + data + " --out " + out) == 0);
  CHECK(run("pca-export --data-root " + data + " --out " + out) == 0);
  CHECK(std::filesystem::exists(root / "out" / "metrics.csv"));
  CHECK(std::filesystem::exists(root / "out" / "resolved_config.json"));

  // failures exit non-zero
  CHECK(run("evaluate --data-root " + (root / "missing").string()) != 0);
  CHECK(run("gen-toy --data-root " + data) != 0);  // refuses to overwrite
}
