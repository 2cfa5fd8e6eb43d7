#include "latentaug/augment.hpp"

#include <algorithm>

namespace latentaug {

Tensor interpolate(const Tensor& z1, const Tensor& z2, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("interpolate: alpha " + std::to_string(alpha) + " outside [0,1]");
  }
  if (!z1.same_shape(z2)) {
    throw DimensionError("interpolate: shapes " + shape_str(z1.shape()) + " and " +
                         shape_str(z2.shape()) + " differ");
  }
  if (alpha == 1.0) return z1;
  if (alpha == 0.0) return z2;
  bool equal = true;
  for (std::int64_t i = 0; i < z1.size() && equal; ++i) equal = z1[i] == z2[i];
  if (equal) return z1;
  const double beta = 1.0 - alpha;
  return Tensor(z1.shape(), alpha * z1.array() + beta * z2.array());
}

std::string to_string(ClassicalOp op) {
  switch (op) {
    case ClassicalOp::rot90: return "rot90";
    case ClassicalOp::rot180: return "rot180";
    case ClassicalOp::rot270: return "rot270";
    case ClassicalOp::flip_h: return "flip_h";
    case ClassicalOp::flip_v: return "flip_v";
  }
  throw ContractError("unknown classical op");
}

ClassicalOp classical_op_from_string(const std::string& s) {
  if (s == "rot90") return ClassicalOp::rot90;
  if (s == "rot180") return ClassicalOp::rot180;
  if (s == "rot270") return ClassicalOp::rot270;
  if (s == "flip_h") return ClassicalOp::flip_h;
  if (s == "flip_v") return ClassicalOp::flip_v;
  throw ParseError("unknown classical op '" + s + "'");
}

ImageBuffer classical_augment(const ImageBuffer& image, ClassicalOp op) {
  const std::int64_t h = image.height;
  const std::int64_t w = image.width;
  if ((op == ClassicalOp::rot90 || op == ClassicalOp::rot270) && h != w) {
    throw DimensionError("classical_augment: 90-degree rotations require a square image");
  }
  ImageBuffer out;
  out.channels = image.channels;
  out.pixels.resize(image.pixels.size());
  const bool swaps_dims = op == ClassicalOp::rot90 || op == ClassicalOp::rot270;
  out.width = swaps_dims ? h : w;
  out.height = swaps_dims ? w : h;
  for (std::int64_t y = 0; y < out.height; ++y) {
    for (std::int64_t x = 0; x < out.width; ++x) {
      std::int64_t sy = 0, sx = 0;
      switch (op) {
        case ClassicalOp::rot90:  // clockwise: out(y,x) = in(h-1-x, y)
          sy = h - 1 - x;
          sx = y;
          break;
        case ClassicalOp::rot180:
          sy = h - 1 - y;
          sx = w - 1 - x;
          break;
        case ClassicalOp::rot270:  // counterclockwise: out(y,x) = in(x, w-1-y)
          sy = x;
          sx = w - 1 - y;
          break;
        case ClassicalOp::flip_h:  // mirror columns
          sy = y;
          sx = w - 1 - x;
          break;
        case ClassicalOp::flip_v:  // mirror rows
          sy = h - 1 - y;
          sx = x;
          break;
      }
      for (std::int64_t c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

std::vector<SyntheticImage> generate_synthetic(const VaeModel& model, const Tensor& class_images,
                                               std::int64_t count, const AugmentPlan& plan,
                                               RngStream rng) {
  plan.validate();
  if (count < 0) throw DomainError("generate_synthetic: negative count");
  if (class_images.rank() != 2) throw DimensionError("generate_synthetic: images must be N x pixels");
  const std::int64_t n = class_images.shape()[0];
  if (n < 2) {
    throw InsufficientDataError("generate_synthetic: class " + std::to_string(model.class_label()) +
                                " has fewer than 2 images");
  }
  std::vector<SyntheticImage> out;
  if (count == 0) return out;
  out.reserve(static_cast<std::size_t>(count));

  NoGradScope guard;
  auto [mu, logvar] = model.encode(class_images);
  (void)logvar;  // interpolation runs on the posterior means

  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1)));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }

  RngStream pair_rng = rng.stream("pairs");
  RngStream alpha_rng = rng.stream("alpha");
  std::size_t cursor = pairs.size();  // forces a shuffle on first use
  while (static_cast<std::int64_t>(out.size()) < count) {
    if (cursor == pairs.size()) {
      pair_rng.shuffle(pairs);  // new pass without replacement
      cursor = 0;
    }
    const auto [i, j] = pairs[cursor++];
    InterpolationSpec spec;
    spec.alpha = alpha_rng.uniform(plan.alpha_lo, plan.alpha_hi);
    spec.i = i;
    spec.j = j;
    spec.validate();

    const Tensor z1 = take_rows(mu, {i});
    const Tensor z2 = take_rows(mu, {j});
    const Tensor z = interpolate(z1, z2, spec.alpha);
    const Tensor decoded = model.decode(z);
    out.push_back(SyntheticImage{decoded.reshaped({decoded.size()}), spec});
  }
  return out;
}

}  // namespace latentaug
