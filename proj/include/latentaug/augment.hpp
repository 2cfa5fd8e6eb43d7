#pragma once

#include <map>
#include <vector>

#include "latentaug/data.hpp"
#include "latentaug/vae.hpp"

namespace latentaug {

// Convex combination alpha*z1 + (1-alpha)*z2. The endpoints alpha in {0,1}
// and the case z1 == z2 return the corresponding input unchanged, bit for bit.
Tensor interpolate(const Tensor& z1, const Tensor& z2, double alpha);

struct InterpolationSpec {
  double alpha = 0.5;
  std::int64_t i = 0;  // parent indices into the class's image list, i != j
  std::int64_t j = 1;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("interpolation: alpha outside [0,1]");
    if (i == j) throw ContractError("interpolation: parent indices must differ");
  }
};

enum class ClassicalOp { rot90, rot180, rot270, flip_h, flip_v };

std::string to_string(ClassicalOp op);
ClassicalOp classical_op_from_string(const std::string& s);

// Pure pixel permutations; rot90/rot270 require square images.
ImageBuffer classical_augment(const ImageBuffer& image, ClassicalOp op);

struct AugmentPlan {
  std::map<int, int> synthetic_per_class;  // class -> count
  double alpha_lo = 0.2;
  double alpha_hi = 0.8;
  std::vector<ClassicalOp> classical_ops = {ClassicalOp::rot90, ClassicalOp::rot180,
                                            ClassicalOp::rot270, ClassicalOp::flip_h,
                                            ClassicalOp::flip_v};
  bool augment_synthetic = false;  // classical ops on synthetic images too
  std::uint64_t seed = 42;

  void validate() const {
    if (!(0.0 <= alpha_lo && alpha_lo <= alpha_hi && alpha_hi <= 1.0)) {
      throw DomainError("augment plan: need 0 <= alpha_lo <= alpha_hi <= 1");
    }
    for (const auto& [label, count] : synthetic_per_class) {
      if (count < 0) throw DomainError("augment plan: negative synthetic count");
    }
  }
};

struct SyntheticImage {
  Tensor pixels;  // flat, values in (0,1)
  InterpolationSpec spec;
};

// Produces `count` synthetic images for one class: parent pairs are drawn
// uniformly over distinct ordered pairs, cycling without replacement until
// the count is met; alpha is uniform in [alpha_lo, alpha_hi]; interpolation
// runs on the encoder's mu vectors and the result is decoded.
std::vector<SyntheticImage> generate_synthetic(const VaeModel& model, const Tensor& class_images,
                                               std::int64_t count, const AugmentPlan& plan,
                                               RngStream rng);

}  // namespace latentaug
