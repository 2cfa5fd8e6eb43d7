#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "latentaug/vae.hpp"
#include "test_util.hpp"

using namespace latentaug;
using testutil::bit_equal;
using testutil::pack_params;
using testutil::unpack_params;

namespace {

VaeArch tiny_arch() {
  VaeArch arch;
  arch.geom = ImageGeom{4, 3, 1};  // 12 pixels
  arch.latent_dim = 3;
  arch.hidden = {8};
  return arch;
}

Tensor random_pixels(const Shape& shape, RngStream& rng) {
  Tensor::Array data(numel(shape));
  for (std::int64_t i = 0; i < data.size(); ++i) data[i] = rng.uniform(0.1, 0.9);
  return Tensor(shape, std::move(data));
}

// Independent Monte-Carlo estimate of KL(N(mu, diag sigma^2) || N(0, I)).
double kl_monte_carlo(const Tensor& mu, const Tensor& logvar, std::int64_t samples, RngStream& rng) {
  double acc = 0.0;
  for (std::int64_t s = 0; s < samples; ++s) {
    double term = 0.0;
    for (std::int64_t i = 0; i < mu.size(); ++i) {
      const double eps = rng.normal();
      const double sigma = std::exp(0.5 * logvar[i]);
      const double z = mu[i] + sigma * eps;
      // log q(z) - log p(z) = 0.5 * (z^2 - logvar - eps^2)
      term += 0.5 * (z * z - logvar[i] - eps * eps);
    }
    acc += term;
  }
  return acc / static_cast<double>(samples);
}

double closed_form_kl(const Tensor& mu, const Tensor& logvar) {
  double kl = 0.0;
  for (std::int64_t i = 0; i < mu.size(); ++i) {
    kl += 0.5 * (mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i]);
  }
  return kl;
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "latentaug_vae_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("reparameterize examples") {
  Tensor mu = Tensor::from_vector({1, 2}, {0.7, -1.2});
  Tensor lv = Tensor::from_vector({1, 2}, {0.3, -0.5});
  CHECK(bit_equal(reparameterize(mu, lv, Tensor::zeros({1, 2})), mu));

  Tensor e = Tensor::from_vector({1, 2}, {0.25, -2.0});
  CHECK(bit_equal(reparameterize(Tensor::zeros({1, 2}), Tensor::zeros({1, 2}), e), e));

  Tensor z = reparameterize(Tensor::from_vector({1, 1}, {1.0}),
                            Tensor::from_vector({1, 1}, {std::log(4.0)}),
                            Tensor::from_vector({1, 1}, {0.5}));
  CHECK(z[0] == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(reparameterize(mu, lv, Tensor::zeros({2, 2})), DimensionError);
}

TEST_CASE("reparameterize: empirical mean and std match (mu, sigma) within 5%") {
  RngStream rng(606);
  const double mu0 = 0.8, mu1 = -1.5;
  const double s0 = 1.0, s1 = 0.5;
  Tensor mu = Tensor::from_vector({1, 2}, {mu0, mu1});
  Tensor lv = Tensor::from_vector({1, 2}, {2.0 * std::log(s0), 2.0 * std::log(s1)});
  const int n = 10000;
  double sum0 = 0, sum1 = 0, sq0 = 0, sq1 = 0;
  for (int i = 0; i < n; ++i) {
    Tensor eps = standard_normal({1, 2}, rng);
    Tensor z = reparameterize(mu, lv, eps);
    sum0 += z[0];
    sum1 += z[1];
    sq0 += z[0] * z[0];
    sq1 += z[1] * z[1];
  }
  const double m0 = sum0 / n, m1 = sum1 / n;
  const double sd0 = std::sqrt(sq0 / n - m0 * m0);
  const double sd1 = std::sqrt(sq1 / n - m1 * m1);
  CHECK(std::abs(m0 - mu0) <= 0.05 * s0);
  CHECK(std::abs(m1 - mu1) <= 0.05 * s1);
  CHECK(std::abs(sd0 - s0) <= 0.05 * s0);
  CHECK(std::abs(sd1 - s1) <= 0.05 * s1);
}

TEST_CASE("elbo_loss worked examples") {
  // q == prior: KL is exactly 0.
  Tensor x = Tensor::from_vector({1, 1}, {0.5});
  Tensor xh = Tensor::from_vector({1, 1}, {0.5});
  auto zero_case = elbo_loss(x, xh, Tensor::zeros({1, 1}), Tensor::zeros({1, 1}));
  CHECK(zero_case.kl.value() == 0.0);
  CHECK(zero_case.reconstruction.value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(zero_case.total.value() == zero_case.reconstruction.value() + zero_case.kl.value());

  // mu=1, logvar=0, single latent: KL = 0.5*(1 + 1 - 1 - 0) = 0.5.
  auto half = elbo_loss(x, xh, Tensor::from_vector({1, 1}, {1.0}), Tensor::zeros({1, 1}));
  CHECK(half.kl.value() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("elbo_loss clamps x_hat at exactly 0 and 1 instead of failing") {
  Tensor x = Tensor::from_vector({1, 2}, {1.0, 0.0});
  Tensor xh = Tensor::from_vector({1, 2}, {1.0, 0.0});  // would be log(0) without the clamp
  auto loss = elbo_loss(x, xh, Tensor::zeros({1, 2}), Tensor::zeros({1, 2}));
  CHECK(loss.reconstruction.value() == doctest::Approx(2.0 * -std::log(1.0 - 1e-7)).epsilon(1e-6));
}

TEST_CASE("kl is positive for non-trivial posteriors") {
  RngStream rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor mu = testutil::random_tensor({1, 4}, rng, 0.5, 1.5);
    Tensor lv = testutil::random_tensor({1, 4}, rng, -1.0, 1.0);
    Tensor x = random_pixels({1, 3}, rng);
    auto loss = elbo_loss(x, x, mu, lv);
    CHECK(loss.kl.value() > 0.0);
  }
}

TEST_CASE("closed-form KL matches a 1e5-sample Monte-Carlo estimate within 2%") {
  RngStream rng(1234);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor::Array mu_data(8), lv_data(8);
    for (int i = 0; i < 8; ++i) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      mu_data[i] = sign * rng.uniform(0.5, 1.5);
      lv_data[i] = rng.uniform(-1.0, 1.0);
    }
    Tensor mu({8}, std::move(mu_data));
    Tensor lv({8}, std::move(lv_data));
    const double exact = closed_form_kl(mu, lv);
    RngStream mc_rng = rng.stream("mc/" + std::to_string(trial));
    const double estimate = kl_monte_carlo(mu, lv, 100000, mc_rng);
    CHECK(std::abs(estimate - exact) / std::abs(exact) <= 0.02);
  }
}

TEST_CASE("encode/decode contracts") {
  RngStream rng(21);
  VaeModel model(1, tiny_arch(), rng);
  Tensor x = random_pixels({4, 12}, rng);

  auto [mu, lv] = model.encode(x);
  CHECK(mu.shape() == Shape{4, 3});
  CHECK(lv.shape() == Shape{4, 3});

  auto [mu2, lv2] = model.encode(x);
  CHECK(bit_equal(mu, mu2));
  CHECK(bit_equal(lv, lv2));

  Tensor z = testutil::random_tensor({5, 3}, rng, -3.0, 3.0);
  Tensor xh = model.decode(z);
  CHECK(xh.shape() == Shape{5, 12});
  CHECK((xh.array() > 0.0).all());
  CHECK((xh.array() < 1.0).all());
  CHECK(bit_equal(model.decode(z), xh));

  CHECK_THROWS_AS(model.encode(Tensor::zeros({2, 5})), DimensionError);
  CHECK_THROWS_AS(model.decode(Tensor::zeros({2, 5})), DimensionError);
  Tensor bad = Tensor::from_vector({1, 12}, {2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS(model.encode(bad), DomainError);
}

TEST_CASE("zero-weight encoder returns its bias; zero-weight decoder a constant") {
  RngStream rng(3);
  VaeModel model(0, tiny_arch(), rng);
  auto params = model.parameters();
  for (Tensor* p : params) p->assign(Tensor::Array::Zero(p->size()));
  // mu head bias is parameter index 3 (enc0.weight, enc0.bias, mu.weight, mu.bias).
  Tensor mu_bias = Tensor::from_vector({3}, {0.25, -0.5, 1.0});
  params[3]->assign(mu_bias.array());
  Tensor x = random_pixels({2, 12}, rng);
  auto [mu, lv] = model.encode(x);
  for (std::int64_t r = 0; r < 2; ++r) {
    for (std::int64_t c = 0; c < 3; ++c) CHECK(mu.at(r, c) == mu_bias[c]);
  }
  CHECK(bit_equal(lv, Tensor::zeros({2, 3})));

  // out bias is the last parameter; decoder output becomes sigmoid(bias).
  Tensor out_bias = Tensor::full({12}, 0.4);
  params.back()->assign(out_bias.array());
  Tensor xh = model.decode(Tensor::ones({2, 3}));
  const double expect = 1.0 / (1.0 + std::exp(-0.4));
  for (std::int64_t i = 0; i < xh.size(); ++i) CHECK(xh[i] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("full VAE loss passes grad_check on a 2-image batch") {
  RngStream rng(88);
  VaeModel model(2, tiny_arch(), rng);
  Tensor x = random_pixels({2, 12}, rng);
  Tensor eps = standard_normal({2, 3}, rng);

  auto all_params = model.parameters();
  std::vector<const Tensor*> cparams(all_params.begin(), all_params.end());
  Tensor flat = pack_params(cparams);

  auto loss_fn = [&](const Tensor& theta) {
    VaeModel probe = model;
    testutil::unpack_params_on_tape(theta, probe.parameters());
    auto [mu, lv] = probe.encode(x);
    Tensor z = reparameterize(mu, lv, eps);
    Tensor xh = probe.decode(z);
    return elbo_loss(x, xh, mu, lv).total;
  };
  CHECK(grad_check(loss_fn, flat) <= 1e-4);
}

TEST_CASE("train_class_vae reduces loss and is seed-deterministic") {
  RngStream data_rng(17);
  const std::int64_t n = 12;
  // Two clusters of near-constant images so there is structure to learn.
  Tensor::Array data(n * 12);
  for (std::int64_t i = 0; i < n; ++i) {
    const double base = i % 2 == 0 ? 0.25 : 0.75;
    for (std::int64_t p = 0; p < 12; ++p) data[i * 12 + p] = base + data_rng.uniform(-0.05, 0.05);
  }
  Tensor images({n, 12}, std::move(data));

  VaeTrainConfig config;
  config.arch = tiny_arch();
  config.epochs = 60;
  config.lr = 3e-3;
  config.batch_size = 4;

  VaeTrainResult a = train_class_vae(images, 0, config, RngStream(42, "vae/0"));
  CHECK(a.history.size() == 60);
  CHECK(a.history.back().total < a.history.front().total);
  for (const auto& e : a.history) CHECK(e.kl >= 0.0);

  VaeTrainResult b = train_class_vae(images, 0, config, RngStream(42, "vae/0"));
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].total == b.history[i].total);
    CHECK(a.history[i].reconstruction == b.history[i].reconstruction);
    CHECK(a.history[i].kl == b.history[i].kl);
  }

  CHECK_THROWS_AS(train_class_vae(take_rows(images, {0}), 0, config, RngStream(1)), InsufficientDataError);
}

TEST_CASE("checkpoint round-trip preserves architecture and parameters") {
  RngStream rng(99);
  VaeModel model(1, tiny_arch(), rng);
  const auto path = temp_dir() / "model.ckpt";
  save_checkpoint(model, path);
  VaeModel loaded = load_checkpoint(path);

  CHECK(loaded.class_label() == 1);
  CHECK(loaded.latent_dim() == 3);
  CHECK(loaded.arch().hidden == std::vector<std::int64_t>{8});
  CHECK(loaded.arch().geom == model.arch().geom);

  auto orig = model.parameters();
  auto load = loaded.parameters();
  REQUIRE(orig.size() == load.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    for (std::int64_t j = 0; j < orig[i]->size(); ++j) {
      const double a = (*orig[i])[j];
      const double b = (*load[i])[j];
      CHECK(std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(a)));
    }
  }

  // encode outputs differ by <= 1e-5 after the f32 round trip
  Tensor x = random_pixels({3, 12}, rng);
  auto [mu_a, lv_a] = model.encode(x);
  auto [mu_b, lv_b] = loaded.encode(x);
  CHECK((mu_a.array() - mu_b.array()).abs().maxCoeff() <= 1e-5);
  CHECK((lv_a.array() - lv_b.array()).abs().maxCoeff() <= 1e-5);
}

TEST_CASE("checkpoint loading rejects truncated files and wrong magics") {
  RngStream rng(7);
  VaeModel model(0, tiny_arch(), rng);
  const auto dir = temp_dir();
  const auto good = dir / "good.ckpt";
  save_checkpoint(model, good);

  // truncate the payload
  std::ifstream in(good, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto bad = dir / "truncated.ckpt";
  std::ofstream out(bad, std::ios::binary);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(bad), ParseError);

  const auto wrong = dir / "wrong_magic.ckpt";
  std::ofstream w(wrong, std::ios::binary);
  w << "latentaug-vae-v999\nend\n";
  w.close();
  CHECK_THROWS_AS(load_checkpoint(wrong), VersionError);
}

TEST_CASE("sample_posterior satisfies the reparameterization identity") {
  RngStream rng(55);
  VaeModel model(0, tiny_arch(), rng);
  Tensor x = random_pixels({2, 12}, rng);
  RngStream eps_rng(9);
  LatentSample s = sample_posterior(model, x, eps_rng);
  for (std::int64_t i = 0; i < s.z.size(); ++i) {
    const double expect = s.mu[i] + std::exp(0.5 * s.logvar[i]) * s.eps[i];
    CHECK(s.z[i] == doctest::Approx(expect).epsilon(1e-15));
  }
}
