#pragma once

#include <vector>

#include "latentaug/autodiff.hpp"
#include "latentaug/rng.hpp"

namespace latentaug {

// Glorot-uniform weights for rank >= 2 shapes, zeros for rank-1 (bias) shapes.
Tensor init_params(const Shape& shape, RngStream& rng);

// Standard-normal draws in flat order.
Tensor standard_normal(const Shape& shape, RngStream& rng);

struct DenseLayer {
  Tensor weights;  // out x in
  Tensor bias;     // out

  static DenseLayer init(std::int64_t in_dim, std::int64_t out_dim, RngStream& rng);

  std::int64_t in_dim() const { return weights.shape()[1]; }
  std::int64_t out_dim() const { return weights.shape()[0]; }
};

// x (batch x in) -> x W^T + b (batch x out), differentiable through the tape.
Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

struct Conv2dLayer {
  Tensor kernels;  // out_ch x in_ch x kh x kw, kh == kw odd
  Tensor bias;     // out_ch
  std::int64_t stride = 1;

  static Conv2dLayer init(std::int64_t in_ch, std::int64_t out_ch, std::int64_t ksize,
                          std::int64_t stride, RngStream& rng);

  std::int64_t in_channels() const { return kernels.shape()[1]; }
  std::int64_t out_channels() const { return kernels.shape()[0]; }
  std::int64_t kernel_size() const { return kernels.shape()[2]; }
};

// Cross-correlation with zero padding (k-1)/2 and stride in {1, 2};
// x is batch x ch x h x w, output spatial dims are ceil(h/stride) x ceil(w/stride).
Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& x);

// Row-wise softmax (plain value computation, not recorded).
Tensor softmax(const Tensor& logits);

// Mean over the batch of -log softmax(logits)[target]; targets are one-hot
// rows. Recorded as a single fused node for numerical stability.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets_onehot);

Tensor one_hot(const std::vector<int>& labels, std::int64_t num_classes);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter-group Adam state: first/second moments and the step count.
// Moment shapes bind to the parameter group on the first step.
class AdamState {
 public:
  explicit AdamState(AdamConfig config) : config_(config) {}

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  long long step_count() const { return t_; }

  friend void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                        AdamState& state);

 private:
  AdamConfig config_;
  long long t_ = 0;
  std::vector<Tensor::Array> m_;
  std::vector<Tensor::Array> v_;
};

// Standard Adam update with bias correction:
//   m^ = m/(1-b1^t), v^ = v/(1-b2^t), p <- p - lr * m^ / (sqrt(v^) + eps).
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state);

// Gathers the given rows of a rank-2 tensor into a new tensor (plain copy).
Tensor take_rows(const Tensor& t, const std::vector<std::int64_t>& rows);

}  // namespace latentaug
