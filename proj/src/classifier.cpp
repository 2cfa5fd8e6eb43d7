#include "latentaug/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "latentaug/checkpoint.hpp"

namespace latentaug {

namespace {

constexpr std::int64_t kConvChannels[2] = {8, 16};
constexpr std::int64_t kMlpHidden = 128;

std::int64_t strided(std::int64_t v) { return (v + 1) / 2; }  // ceil(v/2)

void check_labels(const std::vector<int>& labels, int num_classes) {
  for (int label : labels) {
    if (label < 0 || label >= num_classes) {
      throw DataError("label " + std::to_string(label) + " out of range [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

std::string to_string(ClfArch arch) {
  return arch == ClfArch::small_cnn ? "small-cnn" : "mlp";
}

ClfArch clf_arch_from_string(const std::string& s) {
  if (s == "small-cnn") return ClfArch::small_cnn;
  if (s == "mlp") return ClfArch::mlp;
  throw ParseError("unknown classifier architecture '" + s + "'");
}

ClassifierModel::ClassifierModel(ClfArch arch, int num_classes, ImageGeom geom, RngStream& rng)
    : arch_(arch), num_classes_(num_classes), geom_(geom) {
  if (num_classes < 2) throw DimensionError("classifier: need at least 2 classes");
  if (arch_ == ClfArch::small_cnn) {
    convs_.push_back(Conv2dLayer::init(geom_.channels, kConvChannels[0], 3, 2, rng));
    convs_.push_back(Conv2dLayer::init(kConvChannels[0], kConvChannels[1], 3, 2, rng));
    const std::int64_t oh = strided(strided(geom_.height));
    const std::int64_t ow = strided(strided(geom_.width));
    denses_.push_back(DenseLayer::init(kConvChannels[1] * oh * ow, num_classes, rng));
  } else {
    denses_.push_back(DenseLayer::init(geom_.pixels(), kMlpHidden, rng));
    denses_.push_back(DenseLayer::init(kMlpHidden, num_classes, rng));
  }
}

Tensor ClassifierModel::logits(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != geom_.pixels()) {
    throw DimensionError("classifier: input must be batch x " + std::to_string(geom_.pixels()) +
                         " (geometry " + std::to_string(geom_.width) + "x" +
                         std::to_string(geom_.height) + "x" + std::to_string(geom_.channels) +
                         "), got " + shape_str(x.shape()));
  }
  const std::int64_t batch = x.shape()[0];
  if (arch_ == ClfArch::small_cnn) {
    Tensor h = reshape(x, {batch, geom_.channels, geom_.height, geom_.width});
    for (const auto& conv : convs_) h = relu(conv2d_forward(conv, h));
    const std::int64_t flat = h.size() / batch;
    return dense_forward(denses_.back(), reshape(h, {batch, flat}));
  }
  Tensor h = relu(dense_forward(denses_[0], x));
  return dense_forward(denses_[1], h);
}

std::vector<Tensor*> ClassifierModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& c : convs_) {
    out.push_back(&c.kernels);
    out.push_back(&c.bias);
  }
  for (auto& d : denses_) {
    out.push_back(&d.weights);
    out.push_back(&d.bias);
  }
  return out;
}

std::vector<const Tensor*> ClassifierModel::parameters() const {
  auto mutable_params = const_cast<ClassifierModel*>(this)->parameters();
  return std::vector<const Tensor*>(mutable_params.begin(), mutable_params.end());
}

std::vector<std::string> ClassifierModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    names.push_back("conv" + std::to_string(i) + ".kernels");
    names.push_back("conv" + std::to_string(i) + ".bias");
  }
  for (std::size_t i = 0; i + 1 < denses_.size(); ++i) {
    names.push_back("fc" + std::to_string(i) + ".weight");
    names.push_back("fc" + std::to_string(i) + ".bias");
  }
  names.push_back("head.weight");
  names.push_back("head.bias");
  return names;
}

Tensor predict(const ClassifierModel& model, const Tensor& images) {
  NoGradScope guard;
  return softmax(model.logits(images));
}

std::vector<int> predict_labels(const ClassifierModel& model, const Tensor& images) {
  const Tensor probs = predict(model, images);
  const std::int64_t classes = probs.shape()[1];
  std::vector<int> labels(static_cast<std::size_t>(probs.shape()[0]));
  for (std::int64_t r = 0; r < probs.shape()[0]; ++r) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < classes; ++c) {
      if (probs.at(r, c) > probs.at(r, best)) best = c;
    }
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

void scheduler_step(PlateauSchedulerState& state, double validation_loss) {
  if (!std::isfinite(validation_loss)) {
    throw ContractError("scheduler_step: validation loss must be finite");
  }
  if (state.best - validation_loss > state.min_improvement) {
    state.best = validation_loss;
    state.epochs_since_improvement = 0;
    return;
  }
  state.epochs_since_improvement += 1;
  if (state.epochs_since_improvement >= state.patience) {
    state.lr /= state.factor;
    state.epochs_since_improvement = 0;
  }
}

ClfTrainResult train_classifier(const LabeledImages& train, const LabeledImages& val,
                                int num_classes, const ClfTrainConfig& config, RngStream rng) {
  if (train.size() == 0) throw InsufficientDataError("train_classifier: empty training split");
  if (val.size() == 0) throw InsufficientDataError("train_classifier: empty validation split");
  if (train.size() != static_cast<std::int64_t>(train.labels.size()) ||
      val.size() != static_cast<std::int64_t>(val.labels.size())) {
    throw ContractError("train_classifier: image/label counts disagree");
  }
  if (!(train.geom == val.geom)) {
    throw DimensionError("train_classifier: train and val geometries differ");
  }
  check_labels(train.labels, num_classes);
  check_labels(val.labels, num_classes);
  if (config.epochs <= 0 || config.batch_size <= 0) {
    throw ContractError("train_classifier: epochs and batch size must be positive");
  }

  RngStream init_rng = rng.stream("init");
  RngStream shuffle_rng = rng.stream("shuffle");

  ClfTrainResult result{ClassifierModel(config.arch, num_classes, train.geom, init_rng), {}, -1};
  ClassifierModel& model = result.model;
  AdamState opt(AdamConfig{.lr = config.lr});
  PlateauSchedulerState sched;
  sched.lr = config.lr;
  sched.patience = config.patience;
  sched.factor = config.factor;
  sched.min_improvement = config.min_improvement;

  const Tensor val_targets = one_hot(val.labels, num_classes);
  const std::int64_t n = train.size();
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor::Array> best_params;

  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    const double epoch_lr = sched.lr;
    opt.set_lr(epoch_lr);

    double train_loss = 0.0;
    for (std::int64_t start = 0; start < n; start += config.batch_size) {
      const std::int64_t stop = std::min(n, start + config.batch_size);
      const std::vector<std::int64_t> batch(order.begin() + start, order.begin() + stop);
      const Tensor xb = take_rows(train.images, batch);
      std::vector<int> batch_labels;
      batch_labels.reserve(batch.size());
      for (auto idx : batch) batch_labels.push_back(train.labels[static_cast<std::size_t>(idx)]);
      const Tensor yb = one_hot(batch_labels, num_classes);

      Tape tape;
      const Tensor loss = softmax_cross_entropy(model.logits(xb), yb);
      tape.backward(loss);
      auto params = model.parameters();
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Tensor* p : params) grads.push_back(tape.grad(*p));
      adam_step(params, grads, opt);
      train_loss += loss.value() * static_cast<double>(stop - start);
    }
    train_loss /= static_cast<double>(n);

    double val_loss = 0.0;
    double val_acc = 0.0;
    {
      NoGradScope guard;
      val_loss = softmax_cross_entropy(model.logits(val.images), val_targets).value();
      const std::vector<int> preds = predict_labels(model, val.images);
      std::int64_t hits = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == val.labels[i] ? 1 : 0;
      val_acc = static_cast<double>(hits) / static_cast<double>(preds.size());
    }
    result.history.push_back(ClfEpochStats{train_loss, val_loss, val_acc, epoch_lr});

    if (val_loss < best_val) {
      best_val = val_loss;
      result.best_epoch = epoch;
      best_params.clear();
      for (Tensor* p : model.parameters()) best_params.push_back(p->array());
    }
    scheduler_step(sched, val_loss);
  }

  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->assign(best_params[i]);
  return result;
}

void save_classifier_checkpoint(const ClassifierModel& model, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("arch", to_string(model.arch()));
  meta.emplace_back("num_classes", std::to_string(model.num_classes()));
  const auto& g = model.geom();
  meta.emplace_back("image", std::to_string(g.width) + " " + std::to_string(g.height) + " " +
                                 std::to_string(g.channels));
  const auto names = model.parameter_names();
  const auto params = model.parameters();
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (std::size_t i = 0; i < params.size(); ++i) tensors.emplace_back(names[i], params[i]);
  write_checkpoint(path, kClfCheckpointMagic, meta, tensors);
}

ClassifierModel load_classifier_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path, kClfCheckpointMagic);
  const ClfArch arch = clf_arch_from_string(ckpt.meta_value("arch"));
  const int num_classes = std::stoi(ckpt.meta_value("num_classes"));
  ImageGeom geom;
  {
    std::istringstream is(ckpt.meta_value("image"));
    if (!(is >> geom.width >> geom.height >> geom.channels)) {
      throw ParseError(path.string() + ": malformed image geometry");
    }
  }
  RngStream scratch(0);
  ClassifierModel model(arch, num_classes, geom, scratch);
  const auto names = model.parameter_names();
  auto params = model.parameters();
  if (ckpt.tensors.size() != params.size()) {
    throw ParseError(path.string() + ": expected " + std::to_string(params.size()) +
                     " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = ckpt.tensors[i];
    if (stored.name != names[i] || stored.tensor.shape() != params[i]->shape()) {
      throw ParseError(path.string() + ": tensor '" + stored.name +
                       "' does not match the declared architecture");
    }
    params[i]->assign(stored.tensor.array());
    params[i]->set_grad_tracked(true);
  }
  return model;
}

}  // namespace latentaug
