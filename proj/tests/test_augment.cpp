#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "latentaug/augment.hpp"
#include "test_util.hpp"

using namespace latentaug;
using testutil::bit_equal;

namespace {

ImageBuffer image_from(std::int64_t h, std::int64_t w, std::vector<double> px) {
  ImageBuffer img;
  img.height = h;
  img.width = w;
  img.channels = 1;
  img.pixels = std::move(px);
  return img;
}

bool same_pixels(const ImageBuffer& a, const ImageBuffer& b) {
  return a.width == b.width && a.height == b.height && a.pixels == b.pixels;
}

bool same_multiset(const ImageBuffer& a, const ImageBuffer& b) {
  auto pa = a.pixels;
  auto pb = b.pixels;
  std::sort(pa.begin(), pa.end());
  std::sort(pb.begin(), pb.end());
  return pa == pb;
}

}  // namespace

TEST_CASE("interpolate endpoints reproduce the inputs bit-exactly") {
  RngStream rng(1);
  Tensor z1 = testutil::random_tensor({6}, rng, -2, 2);
  Tensor z2 = testutil::random_tensor({6}, rng, -2, 2);
  CHECK(bit_equal(interpolate(z1, z2, 1.0), z1));
  CHECK(bit_equal(interpolate(z1, z2, 0.0), z2));
}

TEST_CASE("interpolate worked example") {
  Tensor z1 = Tensor::from_vector({2}, {4, 0});
  Tensor z2 = Tensor::from_vector({2}, {0, 4});
  Tensor z = interpolate(z1, z2, 0.25);
  CHECK(z[0] == 1.0);
  CHECK(z[1] == 3.0);
}

TEST_CASE("interpolate symmetry is bit-exact on the dyadic grid") {
  RngStream rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor z1 = testutil::random_tensor({8}, rng, -3, 3);
    Tensor z2 = testutil::random_tensor({8}, rng, -3, 3);
    for (int k = 0; k <= 64; ++k) {
      const double alpha = static_cast<double>(k) / 64.0;
      CHECK(bit_equal(interpolate(z1, z2, alpha), interpolate(z2, z1, 1.0 - alpha)));
    }
  }
}

TEST_CASE("interpolate of identical endpoints is the identity for any alpha") {
  RngStream rng(3);
  Tensor z = testutil::random_tensor({5}, rng, -2, 2);
  for (double alpha : {0.0, 0.1, 0.3141, 0.5, 0.77, 1.0}) {
    CHECK(bit_equal(interpolate(z, z, alpha), z));
  }
}

TEST_CASE("interpolate validates alpha and shapes") {
  Tensor z = Tensor::zeros({3});
  CHECK_THROWS_AS(interpolate(z, z, -0.01), DomainError);
  CHECK_THROWS_AS(interpolate(z, z, 1.01), DomainError);
  CHECK_THROWS_AS(interpolate(z, Tensor::zeros({4}), 0.5), DimensionError);
}

TEST_CASE("rot90 worked example") {
  ImageBuffer in = image_from(2, 2, {1, 2, 3, 4});
  ImageBuffer out = classical_augment(in, ClassicalOp::rot90);
  CHECK(out.pixels == std::vector<double>{3, 1, 4, 2});
}

TEST_CASE("classical ops compose to the identity") {
  RngStream rng(4);
  std::vector<double> px(36);
  for (auto& v : px) v = rng.uniform();
  ImageBuffer img = image_from(6, 6, px);

  ImageBuffer h2 = classical_augment(classical_augment(img, ClassicalOp::flip_h), ClassicalOp::flip_h);
  CHECK(same_pixels(h2, img));
  ImageBuffer v2 = classical_augment(classical_augment(img, ClassicalOp::flip_v), ClassicalOp::flip_v);
  CHECK(same_pixels(v2, img));
  ImageBuffer r2 = classical_augment(classical_augment(img, ClassicalOp::rot180), ClassicalOp::rot180);
  CHECK(same_pixels(r2, img));

  ImageBuffer r = img;
  for (int k = 0; k < 4; ++k) r = classical_augment(r, ClassicalOp::rot90);
  CHECK(same_pixels(r, img));

  ImageBuffer inv = classical_augment(classical_augment(img, ClassicalOp::rot90), ClassicalOp::rot270);
  CHECK(same_pixels(inv, img));
}

TEST_CASE("classical ops preserve the pixel multiset") {
  RngStream rng(5);
  std::vector<double> px(25);
  for (auto& v : px) v = rng.uniform();
  ImageBuffer img = image_from(5, 5, px);
  for (ClassicalOp op : {ClassicalOp::rot90, ClassicalOp::rot180, ClassicalOp::rot270,
                         ClassicalOp::flip_h, ClassicalOp::flip_v}) {
    CHECK(same_multiset(classical_augment(img, op), img));
  }
}

TEST_CASE("90-degree rotations require square images") {
  ImageBuffer rect = image_from(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(classical_augment(rect, ClassicalOp::rot90), DimensionError);
  CHECK_THROWS_AS(classical_augment(rect, ClassicalOp::rot270), DimensionError);
  CHECK_NOTHROW(classical_augment(rect, ClassicalOp::rot180));
  CHECK_NOTHROW(classical_augment(rect, ClassicalOp::flip_h));
}

TEST_CASE("generate_synthetic produces the requested count with valid provenance") {
  RngStream model_rng(10);
  VaeArch arch;
  arch.geom = ImageGeom{4, 4, 1};
  arch.latent_dim = 3;
  arch.hidden = {8};
  VaeModel model(1, arch, model_rng);

  RngStream data_rng(11);
  Tensor::Array data(5 * 16);
  for (std::int64_t i = 0; i < data.size(); ++i) data[i] = data_rng.uniform(0.1, 0.9);
  Tensor images({5, 16}, std::move(data));

  AugmentPlan plan;
  plan.alpha_lo = 0.2;
  plan.alpha_hi = 0.8;

  CHECK(generate_synthetic(model, images, 0, plan, RngStream(42, "augment/1")).empty());

  auto batch = generate_synthetic(model, images, 47, plan, RngStream(42, "augment/1"));
  CHECK(batch.size() == 47);
  for (const auto& syn : batch) {
    CHECK(syn.pixels.size() == 16);
    CHECK((syn.pixels.array() > 0.0).all());
    CHECK((syn.pixels.array() < 1.0).all());
    CHECK(syn.spec.i != syn.spec.j);
    CHECK(syn.spec.i >= 0);
    CHECK(syn.spec.i < 5);
    CHECK(syn.spec.j >= 0);
    CHECK(syn.spec.j < 5);
    CHECK(syn.spec.alpha >= 0.2);
    CHECK(syn.spec.alpha <= 0.8);
  }

  // Within one pass (20 ordered pairs), no pair repeats.
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (std::size_t k = 0; k < 20; ++k) {
    CHECK(seen.insert({batch[k].spec.i, batch[k].spec.j}).second);
  }

  auto again = generate_synthetic(model, images, 47, plan, RngStream(42, "augment/1"));
  REQUIRE(again.size() == batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    CHECK(bit_equal(again[k].pixels, batch[k].pixels));
    CHECK(again[k].spec.alpha == batch[k].spec.alpha);
  }

  CHECK_THROWS_AS(generate_synthetic(model, take_rows(images, {0}), 3, plan, RngStream(1)),
                  InsufficientDataError);
}
