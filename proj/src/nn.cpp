#include "latentaug/nn.hpp"

#include <cmath>
#include <string>

namespace latentaug {

Tensor init_params(const Shape& shape, RngStream& rng) {
  if (shape.size() <= 1) {
    return Tensor::zeros(shape);  // bias
  }
  // Glorot uniform. For conv kernels (out, in, kh, kw) the receptive field
  // multiplies both fan counts.
  std::int64_t receptive = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
  const double fan_out = static_cast<double>(shape[0] * receptive);
  const double fan_in = static_cast<double>(shape[1] * receptive);
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor::Array data(numel(shape));
  for (std::int64_t i = 0; i < data.size(); ++i) data[i] = rng.uniform(-s, s);
  return Tensor(shape, std::move(data));
}

Tensor standard_normal(const Shape& shape, RngStream& rng) {
  Tensor::Array data(numel(shape));
  for (std::int64_t i = 0; i < data.size(); ++i) data[i] = rng.normal();
  return Tensor(shape, std::move(data));
}

DenseLayer DenseLayer::init(std::int64_t in_dim, std::int64_t out_dim, RngStream& rng) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("dense: dimensions must be positive");
  DenseLayer layer;
  layer.weights = init_params({out_dim, in_dim}, rng).set_grad_tracked(true);
  layer.bias = init_params({out_dim}, rng).set_grad_tracked(true);
  return layer;
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("dense_forward: input must be rank 2 (batch x in)");
  if (x.shape()[1] != layer.in_dim()) {
    throw DimensionError("dense_forward: input dim " + std::to_string(x.shape()[1]) +
                         " does not match layer in-dim " + std::to_string(layer.in_dim()));
  }
  return add(matmul(x, transpose(layer.weights)), layer.bias);
}

namespace {

struct ConvDims {
  std::int64_t batch, in_ch, h, w;
  std::int64_t out_ch, k, stride, pad;
  std::int64_t oh, ow;
  std::int64_t rows() const { return batch * oh * ow; }
  std::int64_t cols() const { return in_ch * k * k; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& kernels, std::int64_t stride) {
  if (x.rank() != 4) throw DimensionError("conv2d: input must be batch x ch x h x w");
  ConvDims d{};
  d.batch = x.shape()[0];
  d.in_ch = x.shape()[1];
  d.h = x.shape()[2];
  d.w = x.shape()[3];
  d.out_ch = kernels.shape()[0];
  d.k = kernels.shape()[2];
  d.stride = stride;
  d.pad = (d.k - 1) / 2;
  if (kernels.shape()[1] != d.in_ch) {
    throw DimensionError("conv2d: input has " + std::to_string(d.in_ch) + " channels, kernels expect " +
                         std::to_string(kernels.shape()[1]));
  }
  if (d.h < d.k || d.w < d.k) throw DimensionError("conv2d: image smaller than kernel");
  d.oh = (d.h + 2 * d.pad - d.k) / d.stride + 1;
  d.ow = (d.w + 2 * d.pad - d.k) / d.stride + 1;
  return d;
}

// Gathers padded input patches into a (batch*oh*ow) x (in_ch*k*k) matrix.
Tensor::Array im2col(const Tensor::Array& x, const ConvDims& d) {
  Tensor::Array m = Tensor::Array::Zero(d.rows() * d.cols());
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t oy = 0; oy < d.oh; ++oy) {
      for (std::int64_t ox = 0; ox < d.ow; ++ox) {
        const std::int64_t row = (b * d.oh + oy) * d.ow + ox;
        for (std::int64_t c = 0; c < d.in_ch; ++c) {
          for (std::int64_t ky = 0; ky < d.k; ++ky) {
            const std::int64_t iy = oy * d.stride - d.pad + ky;
            if (iy < 0 || iy >= d.h) continue;
            for (std::int64_t kx = 0; kx < d.k; ++kx) {
              const std::int64_t ix = ox * d.stride - d.pad + kx;
              if (ix < 0 || ix >= d.w) continue;
              const std::int64_t col = (c * d.k + ky) * d.k + kx;
              m[row * d.cols() + col] = x[((b * d.in_ch + c) * d.h + iy) * d.w + ix];
            }
          }
        }
      }
    }
  }
  return m;
}

// Scatter-add of column gradients back onto the padded input layout.
Tensor::Array col2im(const Tensor::Array& m, const ConvDims& d) {
  Tensor::Array x = Tensor::Array::Zero(d.batch * d.in_ch * d.h * d.w);
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t oy = 0; oy < d.oh; ++oy) {
      for (std::int64_t ox = 0; ox < d.ow; ++ox) {
        const std::int64_t row = (b * d.oh + oy) * d.ow + ox;
        for (std::int64_t c = 0; c < d.in_ch; ++c) {
          for (std::int64_t ky = 0; ky < d.k; ++ky) {
            const std::int64_t iy = oy * d.stride - d.pad + ky;
            if (iy < 0 || iy >= d.h) continue;
            for (std::int64_t kx = 0; kx < d.k; ++kx) {
              const std::int64_t ix = ox * d.stride - d.pad + kx;
              if (ix < 0 || ix >= d.w) continue;
              const std::int64_t col = (c * d.k + ky) * d.k + kx;
              x[((b * d.in_ch + c) * d.h + iy) * d.w + ix] += m[row * d.cols() + col];
            }
          }
        }
      }
    }
  }
  return x;
}

using MatMap = Eigen::Map<Tensor::RowMajorMatrix>;
using ConstMatMap = Eigen::Map<const Tensor::RowMajorMatrix>;

}  // namespace

Conv2dLayer Conv2dLayer::init(std::int64_t in_ch, std::int64_t out_ch, std::int64_t ksize,
                              std::int64_t stride, RngStream& rng) {
  if (ksize < 1 || ksize % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
  if (stride != 1 && stride != 2) throw DimensionError("conv2d: stride must be 1 or 2");
  Conv2dLayer layer;
  layer.kernels = init_params({out_ch, in_ch, ksize, ksize}, rng).set_grad_tracked(true);
  layer.bias = init_params({out_ch}, rng).set_grad_tracked(true);
  layer.stride = stride;
  return layer;
}

Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& x) {
  const ConvDims d = conv_dims(x, layer.kernels, layer.stride);
  const Tensor::Array cols = im2col(x.array(), d);

  // out_mat (rows x out_ch) = cols (rows x ckk) * kernels^T, plus bias.
  Tensor::Array out_mat(d.rows() * d.out_ch);
  {
    ConstMatMap m(cols.data(), d.rows(), d.cols());
    ConstMatMap kmat(layer.kernels.array().data(), d.out_ch, d.cols());
    MatMap(out_mat.data(), d.rows(), d.out_ch).noalias() = m * kmat.transpose();
    for (std::int64_t r = 0; r < d.rows(); ++r) {
      for (std::int64_t o = 0; o < d.out_ch; ++o) out_mat[r * d.out_ch + o] += layer.bias.array()[o];
    }
  }

  // Permute (b, oh, ow, o) rows into the batch x out_ch x oh x ow layout.
  Tensor::Array out_data(d.batch * d.out_ch * d.oh * d.ow);
  for (std::int64_t b = 0; b < d.batch; ++b) {
    for (std::int64_t oy = 0; oy < d.oh; ++oy) {
      for (std::int64_t ox = 0; ox < d.ow; ++ox) {
        const std::int64_t row = (b * d.oh + oy) * d.ow + ox;
        for (std::int64_t o = 0; o < d.out_ch; ++o) {
          out_data[((b * d.out_ch + o) * d.oh + oy) * d.ow + ox] = out_mat[row * d.out_ch + o];
        }
      }
    }
  }
  Tensor out({d.batch, d.out_ch, d.oh, d.ow}, std::move(out_data));

  detail::maybe_record(
      out, {&x, &layer.kernels, &layer.bias},
      [xv = x.array(), kv = layer.kernels.array(), d](const Tensor& u, const std::vector<bool>& needed) {
        std::vector<Tensor> g(3);
        // Un-permute upstream into (rows x out_ch).
        Tensor::Array u_mat(d.rows() * d.out_ch);
        for (std::int64_t b = 0; b < d.batch; ++b) {
          for (std::int64_t oy = 0; oy < d.oh; ++oy) {
            for (std::int64_t ox = 0; ox < d.ow; ++ox) {
              const std::int64_t row = (b * d.oh + oy) * d.ow + ox;
              for (std::int64_t o = 0; o < d.out_ch; ++o) {
                u_mat[row * d.out_ch + o] = u.array()[((b * d.out_ch + o) * d.oh + oy) * d.ow + ox];
              }
            }
          }
        }
        ConstMatMap umat(u_mat.data(), d.rows(), d.out_ch);
        if (needed[2]) {
          Tensor::Array db = umat.colwise().sum().transpose().array();
          g[2] = Tensor({d.out_ch}, std::move(db));
        }
        if (needed[0] || needed[1]) {
          const Tensor::Array cols = im2col(xv, d);
          ConstMatMap m(cols.data(), d.rows(), d.cols());
          if (needed[1]) {
            Tensor::Array dk(d.out_ch * d.cols());
            MatMap(dk.data(), d.out_ch, d.cols()).noalias() = umat.transpose() * m;
            g[1] = Tensor({d.out_ch, d.in_ch, d.k, d.k}, std::move(dk));
          }
          if (needed[0]) {
            ConstMatMap kmat(kv.data(), d.out_ch, d.cols());
            Tensor::Array dm(d.rows() * d.cols());
            MatMap(dm.data(), d.rows(), d.cols()).noalias() = umat * kmat;
            g[0] = Tensor({d.batch, d.in_ch, d.h, d.w}, col2im(dm, d));
          }
        }
        return g;
      });
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax: logits must be rank 2");
  const std::int64_t batch = logits.shape()[0];
  const std::int64_t classes = logits.shape()[1];
  Tensor::Array out(logits.size());
  for (std::int64_t r = 0; r < batch; ++r) {
    const std::int64_t base = r * classes;
    double m = logits.array()[base];
    for (std::int64_t j = 1; j < classes; ++j) m = std::max(m, logits.array()[base + j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < classes; ++j) {
      out[base + j] = std::exp(logits.array()[base + j] - m);
      denom += out[base + j];
    }
    for (std::int64_t j = 0; j < classes; ++j) out[base + j] /= denom;
  }
  return Tensor(logits.shape(), std::move(out));
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets_onehot) {
  if (logits.rank() != 2 || !logits.same_shape(targets_onehot)) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_str(logits.shape()) +
                         " and targets " + shape_str(targets_onehot.shape()) + " must be equal rank-2 shapes");
  }
  const std::int64_t batch = logits.shape()[0];
  const std::int64_t classes = logits.shape()[1];
  const Tensor probs = softmax(logits);
  double total = 0.0;
  for (std::int64_t r = 0; r < batch; ++r) {
    const std::int64_t base = r * classes;
    double m = logits.array()[base];
    for (std::int64_t j = 1; j < classes; ++j) m = std::max(m, logits.array()[base + j]);
    double lse = 0.0;
    for (std::int64_t j = 0; j < classes; ++j) lse += std::exp(logits.array()[base + j] - m);
    lse = m + std::log(lse);
    double dot = 0.0;
    for (std::int64_t j = 0; j < classes; ++j) dot += logits.array()[base + j] * targets_onehot.array()[base + j];
    total += lse - dot;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(batch));
  detail::maybe_record(
      out, {&logits, &targets_onehot},
      [p = probs.array(), y = targets_onehot.array(), z = logits.array(), shape = logits.shape(),
       batch](const Tensor& u, const std::vector<bool>& needed) {
        std::vector<Tensor> g(2);
        const double scale = u.value() / static_cast<double>(batch);
        if (needed[0]) g[0] = Tensor(shape, (p - y) * scale);
        if (needed[1]) g[1] = Tensor(shape, -z * scale);
        return g;
      });
  return out;
}

Tensor one_hot(const std::vector<int>& labels, std::int64_t num_classes) {
  Tensor::Array data = Tensor::Array::Zero(static_cast<std::int64_t>(labels.size()) * num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DataError("one_hot: label " + std::to_string(labels[i]) + " out of range [0, " +
                      std::to_string(num_classes) + ")");
    }
    data[static_cast<std::int64_t>(i) * num_classes + labels[i]] = 1.0;
  }
  return Tensor({static_cast<std::int64_t>(labels.size()), num_classes}, std::move(data));
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
  }
  if (state.m_.empty()) {
    state.m_.reserve(params.size());
    state.v_.reserve(params.size());
    for (const Tensor* p : params) {
      state.m_.push_back(Tensor::Array::Zero(p->size()));
      state.v_.push_back(Tensor::Array::Zero(p->size()));
    }
  }
  if (state.m_.size() != params.size()) {
    throw DimensionError("adam_step: parameter group size changed");
  }
  state.t_ += 1;
  const auto& cfg = state.config_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) {
      throw DimensionError("adam_step: grad shape " + shape_str(g.shape()) +
                           " does not match param shape " + shape_str(p.shape()));
    }
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g.array();
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.array().square();
    const Tensor::Array update = (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
    p.assign(p.array() - cfg.lr * update);
  }
}

Tensor take_rows(const Tensor& t, const std::vector<std::int64_t>& rows) {
  if (t.rank() != 2) throw DimensionError("take_rows: tensor must be rank 2");
  const std::int64_t cols = t.shape()[1];
  Tensor::Array data(static_cast<std::int64_t>(rows.size()) * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::int64_t r = rows[i];
    if (r < 0 || r >= t.shape()[0]) throw DimensionError("take_rows: row index out of range");
    data.segment(static_cast<std::int64_t>(i) * cols, cols) = t.array().segment(r * cols, cols);
  }
  return Tensor({static_cast<std::int64_t>(rows.size()), cols}, std::move(data));
}

}  // namespace latentaug
