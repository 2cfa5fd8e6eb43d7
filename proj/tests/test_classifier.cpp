#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "latentaug/classifier.hpp"
#include "test_util.hpp"

using namespace latentaug;
using testutil::bit_equal;

namespace {

// Three well-separated classes on 8x8 images: a bright band whose position
// depends on the class, plus mild noise.
LabeledImages banded_dataset(std::int64_t per_class, std::uint64_t seed) {
  const ImageGeom geom{8, 8, 1};
  RngStream rng(seed);
  const std::int64_t n = per_class * 3;
  Tensor::Array data(n * geom.pixels());
  std::vector<int> labels;
  std::int64_t row = 0;
  for (int k = 0; k < 3; ++k) {
    for (std::int64_t i = 0; i < per_class; ++i, ++row) {
      for (std::int64_t y = 0; y < 8; ++y) {
        for (std::int64_t x = 0; x < 8; ++x) {
          const bool bright = y >= k * 2 + 1 && y < k * 2 + 3;
          double v = (bright ? 0.85 : 0.15) + rng.uniform(-0.1, 0.1);
          data[row * 64 + y * 8 + x] = std::clamp(v, 0.0, 1.0);
        }
      }
      labels.push_back(k);
    }
  }
  return LabeledImages{Tensor({n, geom.pixels()}, std::move(data)), std::move(labels), geom};
}

}  // namespace

TEST_CASE("predict rows are probability distributions; zero weights give uniform") {
  RngStream rng(3);
  const ImageGeom geom{8, 8, 1};
  ClassifierModel model(ClfArch::small_cnn, 3, geom, rng);
  LabeledImages ds = banded_dataset(2, 1);

  Tensor p = predict(model, ds.images);
  CHECK(p.shape() == Shape{6, 3});
  for (std::int64_t r = 0; r < p.shape()[0]; ++r) {
    double s = 0;
    for (std::int64_t c = 0; c < 3; ++c) {
      s += p.at(r, c);
      CHECK(p.at(r, c) >= 0.0);
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }

  for (Tensor* t : model.parameters()) t->assign(Tensor::Array::Zero(t->size()));
  Tensor uniform = predict(model, ds.images);
  for (std::int64_t i = 0; i < uniform.size(); ++i) {
    CHECK(uniform[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  CHECK(bit_equal(predict(model, ds.images), uniform));
  CHECK_THROWS_AS(predict(model, Tensor::zeros({2, 10})), DimensionError);
}

TEST_CASE("mlp architecture also runs and differs in parameter layout") {
  RngStream rng(4);
  ClassifierModel model(ClfArch::mlp, 3, ImageGeom{8, 8, 1}, rng);
  CHECK(model.parameter_names().front() == "fc0.weight");
  LabeledImages ds = banded_dataset(2, 2);
  CHECK(predict(model, ds.images).shape() == Shape{6, 3});
}

TEST_CASE("scheduler: patience exhaustion divides the lr by the factor") {
  PlateauSchedulerState s;
  s.lr = 5e-4;
  s.patience = 10;
  s.factor = 10.0;
  scheduler_step(s, 1.0);  // baseline
  for (int i = 0; i < 10; ++i) scheduler_step(s, 1.0);
  CHECK(s.lr == doctest::Approx(5e-5).epsilon(1e-12));
  CHECK(s.epochs_since_improvement == 0);
}

TEST_CASE("scheduler: strictly improving losses never change the lr") {
  PlateauSchedulerState s;
  s.lr = 5e-4;
  s.patience = 3;
  double loss = 2.0;
  for (int i = 0; i < 50; ++i) {
    scheduler_step(s, loss);
    loss -= 0.01;
  }
  CHECK(s.lr == 5e-4);
}

TEST_CASE("scheduler: constant loss for 2x patience after a baseline gives two reductions") {
  PlateauSchedulerState s;
  s.lr = 5e-4;
  s.patience = 10;
  s.factor = 10.0;
  scheduler_step(s, 0.7);  // baseline epoch
  for (int i = 0; i < 20; ++i) scheduler_step(s, 0.7);
  CHECK(s.lr == doctest::Approx(5e-6).epsilon(1e-12));
}

TEST_CASE("scheduler: improvements below the threshold still count as stagnation") {
  PlateauSchedulerState s;
  s.lr = 1.0;
  s.patience = 2;
  s.factor = 2.0;
  s.min_improvement = 1e-4;
  scheduler_step(s, 1.0);
  scheduler_step(s, 1.0 - 5e-5);  // too small to count
  scheduler_step(s, 1.0 - 9e-5);
  CHECK(s.lr == 0.5);
  CHECK_THROWS_AS(scheduler_step(s, std::numeric_limits<double>::quiet_NaN()), ContractError);
  CHECK_THROWS_AS(scheduler_step(s, std::numeric_limits<double>::infinity()), ContractError);
}

TEST_CASE("train_classifier learns, is deterministic, and returns the best epoch") {
  LabeledImages train = banded_dataset(10, 11);
  LabeledImages val = banded_dataset(3, 12);

  ClfTrainConfig config;
  config.arch = ClfArch::small_cnn;
  config.epochs = 15;
  config.batch_size = 8;
  config.lr = 3e-3;
  config.patience = 5;

  ClfTrainResult a = train_classifier(train, val, 3, config, RngStream(42, "clf"));
  CHECK(a.history.size() == 15);
  CHECK(a.history.back().train_loss < a.history.front().train_loss);

  // determinism
  ClfTrainResult b = train_classifier(train, val, 3, config, RngStream(42, "clf"));
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
    CHECK(a.history[i].val_accuracy == b.history[i].val_accuracy);
    CHECK(a.history[i].lr == b.history[i].lr);
  }

  // best-epoch selection: the returned parameters reproduce the minimum
  // validation loss seen in the history.
  double min_val = a.history.front().val_loss;
  for (const auto& e : a.history) min_val = std::min(min_val, e.val_loss);
  CHECK(a.history[static_cast<std::size_t>(a.best_epoch)].val_loss == min_val);
  {
    NoGradScope guard;
    const double recomputed =
        softmax_cross_entropy(a.model.logits(val.images), one_hot(val.labels, 3)).value();
    CHECK(recomputed == min_val);
  }

  // lr sequence: non-increasing, each value is the previous one or previous/factor
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    const double prev = a.history[i - 1].lr;
    const double cur = a.history[i].lr;
    CHECK((cur == prev || cur == prev / config.factor));
  }
}

TEST_CASE("train_classifier input validation") {
  LabeledImages train = banded_dataset(4, 3);
  LabeledImages val = banded_dataset(2, 4);
  LabeledImages empty;
  empty.images = Tensor::zeros({1, 64});
  empty.labels = {0};
  empty.geom = ImageGeom{8, 8, 1};

  ClfTrainConfig config;
  config.epochs = 1;

  LabeledImages none;
  CHECK_THROWS_AS(train_classifier(none, val, 3, config, RngStream(1)), InsufficientDataError);
  CHECK_THROWS_AS(train_classifier(train, none, 3, config, RngStream(1)), InsufficientDataError);

  LabeledImages bad = train;
  bad.labels[0] = 7;
  CHECK_THROWS_AS(train_classifier(bad, val, 3, config, RngStream(1)), DataError);
}

TEST_CASE("training on a single-class dataset converges to that class") {
  LabeledImages train = banded_dataset(6, 21);
  for (auto& label : train.labels) label = 1;
  LabeledImages val = banded_dataset(2, 22);
  for (auto& label : val.labels) label = 1;

  ClfTrainConfig config;
  config.arch = ClfArch::mlp;
  config.epochs = 25;
  config.batch_size = 6;
  config.lr = 5e-3;

  ClfTrainResult r = train_classifier(train, val, 3, config, RngStream(9));
  const std::vector<int> preds = predict_labels(r.model, train.images);
  for (int p : preds) CHECK(p == 1);
}

TEST_CASE("classifier checkpoint round trip") {
  RngStream rng(31);
  ClassifierModel model(ClfArch::small_cnn, 3, ImageGeom{8, 8, 1}, rng);
  auto dir = std::filesystem::temp_directory_path() / "latentaug_clf_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "clf.ckpt";
  save_classifier_checkpoint(model, path);
  ClassifierModel loaded = load_classifier_checkpoint(path);
  CHECK(loaded.arch() == ClfArch::small_cnn);
  CHECK(loaded.num_classes() == 3);

  LabeledImages ds = banded_dataset(2, 5);
  Tensor pa = predict(model, ds.images);
  Tensor pb = predict(loaded, ds.images);
  CHECK((pa.array() - pb.array()).abs().maxCoeff() <= 1e-5);
}
