#include "latentaug/vae.hpp"

#include <algorithm>
#include <sstream>

#include "latentaug/checkpoint.hpp"

namespace latentaug {

namespace {

constexpr double kElboClamp = 1e-7;
constexpr double kDecodeClamp = 1e-12;

void check_unit_interval(const char* who, const Tensor& t) {
  if (!((t.array() >= 0.0).all() && (t.array() <= 1.0).all())) {
    throw DomainError(std::string(who) + ": values must lie in [0,1]");
  }
}

}  // namespace

VaeModel::VaeModel(int class_label, VaeArch arch, RngStream& rng)
    : class_label_(class_label), arch_(std::move(arch)) {
  if (arch_.latent_dim <= 0) throw DimensionError("vae: latent_dim must be positive");
  const std::int64_t pixels = arch_.geom.pixels();
  std::int64_t prev = pixels;
  for (std::int64_t h : arch_.hidden) {
    encoder_.push_back(DenseLayer::init(prev, h, rng));
    prev = h;
  }
  mu_head_ = DenseLayer::init(prev, arch_.latent_dim, rng);
  logvar_head_ = DenseLayer::init(prev, arch_.latent_dim, rng);
  prev = arch_.latent_dim;
  for (auto it = arch_.hidden.rbegin(); it != arch_.hidden.rend(); ++it) {
    decoder_.push_back(DenseLayer::init(prev, *it, rng));
    prev = *it;
  }
  output_ = DenseLayer::init(prev, pixels, rng);
}

std::pair<Tensor, Tensor> VaeModel::encode(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != input_dim()) {
    throw DimensionError("encode: input must be batch x " + std::to_string(input_dim()) + ", got " +
                         shape_str(x.shape()));
  }
  check_unit_interval("encode", x);
  Tensor h = x;
  for (const auto& layer : encoder_) h = relu(dense_forward(layer, h));
  return {dense_forward(mu_head_, h), dense_forward(logvar_head_, h)};
}

Tensor VaeModel::decode(const Tensor& z) const {
  if (z.rank() != 2 || z.shape()[1] != latent_dim()) {
    throw DimensionError("decode: input must be batch x " + std::to_string(latent_dim()) + ", got " +
                         shape_str(z.shape()));
  }
  Tensor h = z;
  for (const auto& layer : decoder_) h = relu(dense_forward(layer, h));
  // Sigmoid saturates to exactly 0/1 in floating point; clamp keeps the
  // output strictly inside (0,1).
  return clamp(sigmoid(dense_forward(output_, h)), kDecodeClamp, 1.0 - kDecodeClamp);
}

std::vector<Tensor*> VaeModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : encoder_) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  out.push_back(&mu_head_.weights);
  out.push_back(&mu_head_.bias);
  out.push_back(&logvar_head_.weights);
  out.push_back(&logvar_head_.bias);
  for (auto& l : decoder_) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  out.push_back(&output_.weights);
  out.push_back(&output_.bias);
  return out;
}

std::vector<const Tensor*> VaeModel::parameters() const {
  auto mutable_params = const_cast<VaeModel*>(this)->parameters();
  return std::vector<const Tensor*>(mutable_params.begin(), mutable_params.end());
}

std::vector<std::string> VaeModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    names.push_back("enc" + std::to_string(i) + ".weight");
    names.push_back("enc" + std::to_string(i) + ".bias");
  }
  names.insert(names.end(), {"mu.weight", "mu.bias", "logvar.weight", "logvar.bias"});
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    names.push_back("dec" + std::to_string(i) + ".weight");
    names.push_back("dec" + std::to_string(i) + ".bias");
  }
  names.insert(names.end(), {"out.weight", "out.bias"});
  return names;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& eps) {
  if (!mu.same_shape(logvar) || !mu.same_shape(eps)) {
    throw DimensionError("reparameterize: mu " + shape_str(mu.shape()) + ", logvar " +
                         shape_str(logvar.shape()) + ", eps " + shape_str(eps.shape()) +
                         " must share a shape");
  }
  return add(mul(exp(mul_scalar(logvar, 0.5)), eps), mu);
}

LatentSample sample_posterior(const VaeModel& model, const Tensor& x, RngStream& rng) {
  auto [mu, logvar] = model.encode(x);
  Tensor eps = standard_normal(mu.shape(), rng);
  Tensor z = reparameterize(mu, logvar, eps);
  return LatentSample{std::move(mu), std::move(logvar), std::move(eps), std::move(z)};
}

LossBreakdown elbo_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar) {
  if (x.rank() != 2 || !x.same_shape(x_hat)) {
    throw DimensionError("elbo_loss: x " + shape_str(x.shape()) + " and x_hat " +
                         shape_str(x_hat.shape()) + " must be equal rank-2 shapes");
  }
  if (mu.rank() != 2 || !mu.same_shape(logvar)) {
    throw DimensionError("elbo_loss: mu and logvar must be equal rank-2 shapes");
  }
  if (mu.shape()[0] != x.shape()[0]) {
    throw DimensionError("elbo_loss: batch sizes of x and mu disagree");
  }
  check_unit_interval("elbo_loss(x)", x);
  check_unit_interval("elbo_loss(x_hat)", x_hat);

  const Tensor xc = clamp(x_hat, kElboClamp, 1.0 - kElboClamp);
  const Tensor one_minus_x = add_scalar(neg(x), 1.0);
  const Tensor one_minus_xc = add_scalar(neg(xc), 1.0);
  const Tensor nll = neg(add(mul(x, log(xc)), mul(one_minus_x, log(one_minus_xc))));
  Tensor reconstruction = mean(sum(nll, 1));

  const Tensor inner = sub(add(square(mu), exp(logvar)), add_scalar(logvar, 1.0));
  Tensor kl = mean(mul_scalar(sum(inner, 1), 0.5));

  Tensor total = add(reconstruction, kl);
  return LossBreakdown{std::move(total), std::move(reconstruction), std::move(kl)};
}

VaeTrainResult train_class_vae(const Tensor& images, int class_label, const VaeTrainConfig& config,
                               RngStream rng) {
  if (images.rank() != 2) throw DimensionError("train_class_vae: images must be N x pixels");
  const std::int64_t n = images.shape()[0];
  if (n < 2) {
    throw InsufficientDataError("train_class_vae: class " + std::to_string(class_label) +
                                " has fewer than 2 images");
  }
  if (images.shape()[1] != config.arch.geom.pixels()) {
    throw DimensionError("train_class_vae: image size does not match the configured geometry");
  }
  if (config.epochs <= 0 || config.batch_size <= 0) {
    throw ContractError("train_class_vae: epochs and batch size must be positive");
  }

  RngStream init_rng = rng.stream("init");
  RngStream shuffle_rng = rng.stream("shuffle");
  RngStream eps_rng = rng.stream("eps");

  VaeTrainResult result{VaeModel(class_label, config.arch, init_rng), {}};
  VaeModel& model = result.model;
  AdamState opt(AdamConfig{.lr = config.lr});

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    VaeEpochStats stats;
    for (std::int64_t start = 0; start < n; start += config.batch_size) {
      const std::int64_t stop = std::min(n, start + config.batch_size);
      const std::vector<std::int64_t> batch(order.begin() + start, order.begin() + stop);
      const Tensor xb = take_rows(images, batch);

      Tape tape;
      auto [mu, logvar] = model.encode(xb);
      const Tensor eps = standard_normal(mu.shape(), eps_rng);
      const Tensor z = reparameterize(mu, logvar, eps);
      const Tensor x_hat = model.decode(z);
      const LossBreakdown loss = elbo_loss(xb, x_hat, mu, logvar);
      tape.backward(loss.total);

      auto params = model.parameters();
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Tensor* p : params) grads.push_back(tape.grad(*p));
      adam_step(params, grads, opt);

      const double weight = static_cast<double>(stop - start);
      stats.total += loss.total.value() * weight;
      stats.reconstruction += loss.reconstruction.value() * weight;
      stats.kl += loss.kl.value() * weight;
    }
    stats.total /= static_cast<double>(n);
    stats.reconstruction /= static_cast<double>(n);
    stats.kl /= static_cast<double>(n);
    result.history.push_back(stats);
  }
  return result;
}

void save_checkpoint(const VaeModel& model, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("class_label", std::to_string(model.class_label()));
  meta.emplace_back("latent_dim", std::to_string(model.latent_dim()));
  const auto& g = model.arch().geom;
  meta.emplace_back("image", std::to_string(g.width) + " " + std::to_string(g.height) + " " +
                                 std::to_string(g.channels));
  std::string hidden;
  for (auto h : model.arch().hidden) hidden += (hidden.empty() ? "" : " ") + std::to_string(h);
  meta.emplace_back("hidden", hidden);

  const auto names = model.parameter_names();
  const auto params = model.parameters();
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (std::size_t i = 0; i < params.size(); ++i) tensors.emplace_back(names[i], params[i]);
  write_checkpoint(path, kVaeCheckpointMagic, meta, tensors);
}

VaeModel load_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path, kVaeCheckpointMagic);
  VaeArch arch;
  const int class_label = std::stoi(ckpt.meta_value("class_label"));
  arch.latent_dim = std::stoll(ckpt.meta_value("latent_dim"));
  {
    std::istringstream is(ckpt.meta_value("image"));
    if (!(is >> arch.geom.width >> arch.geom.height >> arch.geom.channels)) {
      throw ParseError(path.string() + ": malformed image geometry");
    }
  }
  arch.hidden.clear();
  {
    std::istringstream is(ckpt.meta_value("hidden"));
    std::int64_t h;
    while (is >> h) arch.hidden.push_back(h);
  }

  RngStream scratch(0);
  VaeModel model(class_label, arch, scratch);
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
