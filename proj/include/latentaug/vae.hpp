#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "latentaug/data.hpp"
#include "latentaug/nn.hpp"

namespace latentaug {

struct VaeArch {
  ImageGeom geom;
  std::int64_t latent_dim = 32;
  std::vector<std::int64_t> hidden = {512, 256};
};

// Class-specific VAE: an MLP encoder ending in mu / log-variance heads and a
// mirror-image MLP decoder with a sigmoid output over flattened pixels.
class VaeModel {
 public:
  VaeModel(int class_label, VaeArch arch, RngStream& rng);

  // x is batch x pixels with values in [0,1]; returns (mu, logvar), each
  // batch x latent_dim.
  std::pair<Tensor, Tensor> encode(const Tensor& x) const;

  // z is batch x latent_dim; returns batch x pixels with values strictly
  // inside (0,1).
  Tensor decode(const Tensor& z) const;

  int class_label() const { return class_label_; }
  const VaeArch& arch() const { return arch_; }
  std::int64_t latent_dim() const { return arch_.latent_dim; }
  std::int64_t input_dim() const { return arch_.geom.pixels(); }

  // Parameters in declaration (checkpoint) order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;

 private:
  int class_label_ = 0;
  VaeArch arch_;
  std::vector<DenseLayer> encoder_;
  DenseLayer mu_head_;
  DenseLayer logvar_head_;
  std::vector<DenseLayer> decoder_;
  DenseLayer output_;
};

// z = mu + exp(logvar/2) * eps, differentiable wrt mu and logvar.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps);

struct LatentSample {
  Tensor mu;
  Tensor logvar;
  Tensor eps;
  Tensor z;
};

LatentSample sample_posterior(const VaeModel& model, const Tensor& x, RngStream& rng);

// Loss terms are scalar tensors on the active tape; total == reconstruction + kl.
struct LossBreakdown {
  Tensor total;
  Tensor reconstruction;
  Tensor kl;
};

// reconstruction: mean over the batch of the per-sample Bernoulli negative
// log-likelihood (x_hat clamped to [1e-7, 1-1e-7] before the logs);
// kl: mean over the batch of 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar).
LossBreakdown elbo_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar);

struct VaeTrainConfig {
  VaeArch arch;
  std::int64_t epochs = 300;
  double lr = 1e-4;
  std::int64_t batch_size = 24;
};

struct VaeEpochStats {
  double total = 0;
  double reconstruction = 0;
  double kl = 0;
};

struct VaeTrainResult {
  VaeModel model;
  std::vector<VaeEpochStats> history;  // one entry per epoch
};

// Trains one class-specific VAE on an N x pixels matrix of that class's
// images. Fully deterministic given the stream. Requires N >= 2.
VaeTrainResult train_class_vae(const Tensor& images, int class_label, const VaeTrainConfig& config,
                               RngStream rng);

inline constexpr const char* kVaeCheckpointMagic = "latentaug-vae-v1";

void save_checkpoint(const VaeModel& model, const std::filesystem::path& path);
VaeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace latentaug
