#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "latentaug/data.hpp"
#include "latentaug/nn.hpp"

namespace latentaug {

enum class ClfArch { small_cnn, mlp };

std::string to_string(ClfArch arch);
ClfArch clf_arch_from_string(const std::string& s);

// Training/evaluation set: flattened planar pixel rows plus labels.
struct LabeledImages {
  Tensor images;  // N x pixels
  std::vector<int> labels;
  ImageGeom geom;

  std::int64_t size() const { return images.rank() == 2 ? images.shape()[0] : 0; }
};

// Small image classifier standing in for the full-scale pretrained backbones:
// either two stride-2 conv blocks with a dense head, or a one-hidden-layer MLP.
class ClassifierModel {
 public:
  ClassifierModel(ClfArch arch, int num_classes, ImageGeom geom, RngStream& rng);

  // x is batch x pixels (planar layout); returns batch x num_classes logits.
  Tensor logits(const Tensor& x) const;

  ClfArch arch() const { return arch_; }
  int num_classes() const { return num_classes_; }
  const ImageGeom& geom() const { return geom_; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;

 private:
  ClfArch arch_;
  int num_classes_ = 0;
  ImageGeom geom_;
  std::vector<Conv2dLayer> convs_;
  std::vector<DenseLayer> denses_;  // hidden layers followed by the head
};

// Row-stochastic class probabilities (softmax over logits).
Tensor predict(const ClassifierModel& model, const Tensor& images);
std::vector<int> predict_labels(const ClassifierModel& model, const Tensor& images);

struct PlateauSchedulerState {
  double lr = 5e-4;
  double best = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  int patience = 10;
  double factor = 10.0;
  double min_improvement = 1e-4;
};

// If the loss improves on `best` by more than the threshold, record it and
// reset the counter; otherwise count, and divide the lr by `factor` once the
// counter reaches `patience`.
void scheduler_step(PlateauSchedulerState& state, double validation_loss);

struct ClfTrainConfig {
  ClfArch arch = ClfArch::small_cnn;
  std::int64_t epochs = 150;
  std::int64_t batch_size = 24;
  double lr = 5e-4;
  int patience = 10;
  double factor = 10.0;
  double min_improvement = 1e-4;
};

struct ClfEpochStats {
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double lr = 0;  // rate in effect during the epoch
};

struct ClfTrainResult {
  ClassifierModel model;  // parameters from the best-validation epoch
  std::vector<ClfEpochStats> history;
  std::int64_t best_epoch = -1;
};

// Cross-entropy training with Adam and plateau lr scheduling. Returns the
// parameters of the epoch with the lowest validation loss. Deterministic
// given the stream.
ClfTrainResult train_classifier(const LabeledImages& train, const LabeledImages& val,
                                int num_classes, const ClfTrainConfig& config, RngStream rng);

inline constexpr const char* kClfCheckpointMagic = "latentaug-clf-v1";

void save_classifier_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_classifier_checkpoint(const std::filesystem::path& path);

}  // namespace latentaug
