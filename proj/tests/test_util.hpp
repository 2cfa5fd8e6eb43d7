#pragma once

#include <vector>

#include "latentaug/autodiff.hpp"
#include "latentaug/rng.hpp"

namespace latentaug::testutil {

// Flattens a parameter group into a single rank-1 tensor.
inline Tensor pack_params(const std::vector<const Tensor*>& params) {
  std::int64_t total = 0;
  for (const Tensor* p : params) total += p->size();
  Tensor::Array data(total);
  std::int64_t offset = 0;
  for (const Tensor* p : params) {
    data.segment(offset, p->size()) = p->array();
    offset += p->size();
  }
  return Tensor({total}, std::move(data));
}

// Writes a flat tensor back into a parameter group (shapes preserved).
inline void unpack_params(const Tensor& flat, const std::vector<Tensor*>& params) {
  std::int64_t offset = 0;
  for (Tensor* p : params) {
    p->assign(flat.array().segment(offset, p->size()));
    offset += p->size();
  }
}

// Differentiable unpack: each parameter becomes a slice of `flat` on the
// active tape, so gradients w.r.t. the packed vector flow through the model.
inline void unpack_params_on_tape(const Tensor& flat, const std::vector<Tensor*>& params) {
  std::int64_t offset = 0;
  for (Tensor* p : params) {
    *p = reshape(slice(flat, offset, p->size()), p->shape());
    offset += p->size();
  }
}

inline Tensor random_tensor(const Shape& shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor::Array data(numel(shape));
  for (std::int64_t i = 0; i < data.size(); ++i) data[i] = rng.uniform(lo, hi);
  return Tensor(shape, std::move(data));
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace latentaug::testutil
