#include "fetalchd/autodiff.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "fetalchd/errors.hpp"

namespace fetalchd::ad {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using ConstMapRow = Eigen::Map<const RowMat>;

int conv_out_dim(int in, int k, int stride, int padding, const char* axis) {
  const int span = in + 2 * padding - k;
  if (span < 0)
    throw std::invalid_argument(std::string("conv2d: kernel exceeds padded ") +
                                axis);
  if (span % stride != 0)
    throw std::invalid_argument(
        std::string("conv2d: non-integral output size along ") + axis);
  return span / stride + 1;
}

// Gathers the receptive fields of one sample into a [C*kH*kW, outH*outW]
// column matrix (zero padding).
void im2col(const Tensor& x, int n, int kh, int kw, int stride, int padding,
            int out_h, int out_w, RowMat& col) {
  const int channels = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  col.resize(channels * kh * kw, out_h * out_w);
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const int row = (c * kh + i) * kw + j;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - padding + i;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - padding + j;
            col(row, oh * out_w + ow) =
                (ih >= 0 && ih < in_h && iw >= 0 && iw < in_w)
                    ? x(n, c, ih, iw)
                    : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-adds a column-gradient matrix back onto one sample of dx.
void col2im_add(const RowMat& col, int n, int kh, int kw, int stride,
                int padding, int out_h, int out_w, Tensor& dx) {
  const int channels = dx.dim(1), in_h = dx.dim(2), in_w = dx.dim(3);
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const int row = (c * kh + i) * kw + j;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - padding + i;
          if (ih < 0 || ih >= in_h) continue;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - padding + j;
            if (iw < 0 || iw >= in_w) continue;
            dx(n, c, ih, iw) += col(row, oh * out_w + ow);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  v.assign(n, 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> data)
    : shape(std::move(s)), v(std::move(data)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  if (n != v.size())
    throw std::invalid_argument("Tensor: data length does not match shape");
}

int Tensor::numel() const { return static_cast<int>(v.size()); }

Tape::Node& Tape::node(NodeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw std::invalid_argument("Tape: node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw std::invalid_argument("Tape: node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

Tensor& Tape::grad_buffer(NodeId id) { return node(id).grad; }

NodeId Tape::push(Tensor value, std::function<void(Tape&, NodeId)> backprop) {
  Node n;
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = node(id);
  if (!n.grad_valid)
    throw std::logic_error("Tape::grad: backward() has not been run");
  return n.grad;
}

NodeId Tape::conv2d(NodeId input, NodeId kernel, NodeId bias, int stride,
                    int padding) {
  const Tensor& x = value(input);
  const Tensor& k = value(kernel);
  const Tensor& b = value(bias);
  if (x.rank() != 4 || k.rank() != 4)
    throw std::invalid_argument("conv2d: input and kernel must be 4-D");
  if (stride < 1 || padding < 0)
    throw std::invalid_argument("conv2d: bad stride/padding");
  const int batch = x.dim(0), channels = x.dim(1);
  const int filters = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != channels)
    throw std::invalid_argument("conv2d: channel mismatch");
  if (b.rank() != 1 || b.dim(0) != filters)
    throw std::invalid_argument("conv2d: bias must be [filters]");
  const int out_h = conv_out_dim(x.dim(2), kh, stride, padding, "height");
  const int out_w = conv_out_dim(x.dim(3), kw, stride, padding, "width");

  Tensor y({batch, filters, out_h, out_w});
  ConstMapRow kmat(k.v.data(), filters, channels * kh * kw);
  RowMat col;
  for (int n = 0; n < batch; ++n) {
    im2col(x, n, kh, kw, stride, padding, out_h, out_w, col);
    MapRow ymat(y.v.data() + static_cast<std::size_t>(n) * filters * out_h * out_w,
                filters, out_h * out_w);
    ymat.noalias() = kmat * col;
    for (int f = 0; f < filters; ++f) ymat.row(f).array() += b.v[f];
  }

  auto back = [input, kernel, bias, stride, padding, kh, kw, out_h,
               out_w](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv = t.value(input);
    const Tensor& kv = t.value(kernel);
    const int batch = xv.dim(0), channels = xv.dim(1);
    const int filters = kv.dim(0);
    Tensor& dx = t.grad_buffer(input);
    Tensor& dk = t.grad_buffer(kernel);
    Tensor& db = t.grad_buffer(bias);
    ConstMapRow kmat(kv.v.data(), filters, channels * kh * kw);
    MapRow dkmat(dk.v.data(), filters, channels * kh * kw);
    RowMat col, dcol;
    for (int n = 0; n < batch; ++n) {
      ConstMapRow gmat(
          g.v.data() + static_cast<std::size_t>(n) * filters * out_h * out_w,
          filters, out_h * out_w);
      im2col(xv, n, kh, kw, stride, padding, out_h, out_w, col);
      dkmat.noalias() += gmat * col.transpose();
      for (int f = 0; f < filters; ++f) db.v[f] += gmat.row(f).sum();
      dcol.resize(channels * kh * kw, out_h * out_w);
      dcol.noalias() = kmat.transpose() * gmat;
      col2im_add(dcol, n, kh, kw, stride, padding, out_h, out_w, dx);
    }
  };
  return push(std::move(y), back);
}

NodeId Tape::max_pool2d(NodeId input, int window, int stride) {
  const Tensor& x = value(input);
  if (x.rank() != 4) throw std::invalid_argument("max_pool2d: input must be 4-D");
  if (window < 1 || stride < 1)
    throw std::invalid_argument("max_pool2d: bad window/stride");
  if (window > x.dim(2) || window > x.dim(3))
    throw std::invalid_argument("max_pool2d: window exceeds spatial dims");
  const int out_h = conv_out_dim(x.dim(2), window, stride, 0, "height");
  const int out_w = conv_out_dim(x.dim(3), window, stride, 0, "width");
  const int batch = x.dim(0), channels = x.dim(1);

  Tensor y({batch, channels, out_h, out_w});
  // flat argmax per output element; ties resolve to the first index in
  // row-major window order
  auto argmax = std::make_shared<std::vector<std::size_t>>(
      static_cast<std::size_t>(y.numel()));
  std::size_t oi = 0;
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c)
      for (int oh = 0; oh < out_h; ++oh)
        for (int ow = 0; ow < out_w; ++ow, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (int i = 0; i < window; ++i)
            for (int j = 0; j < window; ++j) {
              const int ih = oh * stride + i, iw = ow * stride + j;
              const std::size_t idx =
                  ((static_cast<std::size_t>(n) * channels + c) * x.dim(2) +
                   ih) *
                      x.dim(3) +
                  iw;
              if (x.v[idx] > best) {
                best = x.v[idx];
                best_idx = idx;
              }
            }
          y.v[oi] = best;
          (*argmax)[oi] = best_idx;
        }

  auto back = [input, argmax](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < g.v.size(); ++i) dx.v[(*argmax)[i]] += g.v[i];
  };
  return push(std::move(y), back);
}

NodeId Tape::dense(NodeId input, NodeId weight, NodeId bias) {
  const Tensor& x = value(input);
  const Tensor& w = value(weight);
  const Tensor& b = value(bias);
  if (x.rank() != 2 || w.rank() != 2)
    throw std::invalid_argument("dense: input and weight must be 2-D");
  if (x.dim(1) != w.dim(0))
    throw std::invalid_argument("dense: inner dimensions disagree");
  if (b.rank() != 1 || b.dim(0) != w.dim(1))
    throw std::invalid_argument("dense: bias must be [out]");
  const int batch = x.dim(0), in = x.dim(1), out = w.dim(1);

  Tensor y({batch, out});
  ConstMapRow xm(x.v.data(), batch, in), wm(w.v.data(), in, out);
  MapRow ym(y.v.data(), batch, out);
  ym.noalias() = xm * wm;
  for (int n = 0; n < batch; ++n)
    for (int k = 0; k < out; ++k) y(n, k) += b.v[k];

  auto back = [input, weight, bias, batch, in, out](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    ConstMapRow gm(g.v.data(), batch, out);
    ConstMapRow xm(t.value(input).v.data(), batch, in);
    ConstMapRow wm(t.value(weight).v.data(), in, out);
    MapRow dxm(t.grad_buffer(input).v.data(), batch, in);
    MapRow dwm(t.grad_buffer(weight).v.data(), in, out);
    Tensor& db = t.grad_buffer(bias);
    dxm.noalias() += gm * wm.transpose();
    dwm.noalias() += xm.transpose() * gm;
    for (int n = 0; n < batch; ++n)
      for (int k = 0; k < out; ++k) db.v[k] += g(n, k);
  };
  return push(std::move(y), back);
}

NodeId Tape::relu(NodeId input) {
  const Tensor& x = value(input);
  Tensor y = x;
  for (double& val : y.v) val = std::max(val, 0.0);
  auto back = [input](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& xv = t.value(input);
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < g.v.size(); ++i)
      if (xv.v[i] > 0) dx.v[i] += g.v[i];
  };
  return push(std::move(y), back);
}

NodeId Tape::global_avg_pool(NodeId input) {
  const Tensor& x = value(input);
  if (x.rank() != 4)
    throw std::invalid_argument("global_avg_pool: input must be 4-D");
  const int batch = x.dim(0), channels = x.dim(1);
  const int spatial = x.dim(2) * x.dim(3);
  Tensor y({batch, channels});
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      double s = 0;
      const std::size_t base =
          (static_cast<std::size_t>(n) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i) s += x.v[base + i];
      y(n, c) = s / spatial;
    }
  auto back = [input, spatial](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    Tensor& dx = t.grad_buffer(input);
    const int channels = dx.dim(1);
    for (int n = 0; n < dx.dim(0); ++n)
      for (int c = 0; c < channels; ++c) {
        const double share =
            g(n, c) / spatial;
        const std::size_t base =
            (static_cast<std::size_t>(n) * channels + c) * spatial;
        for (int i = 0; i < spatial; ++i) dx.v[base + i] += share;
      }
  };
  return push(std::move(y), back);
}

NodeId Tape::softmax(NodeId logits) {
  const Tensor& x = value(logits);
  if (x.rank() != 2) throw std::invalid_argument("softmax: input must be 2-D");
  for (double val : x.v)
    if (std::isnan(val)) throw NumericError("softmax: NaN in logits");
  const int batch = x.dim(0), k = x.dim(1);
  Tensor y({batch, k});
  for (int n = 0; n < batch; ++n) {
    double mx = x(n, 0);
    for (int c = 1; c < k; ++c) mx = std::max(mx, x(n, c));
    double z = 0;
    for (int c = 0; c < k; ++c) {
      const double e = std::exp(x(n, c) - mx);
      y(n, c) = e;
      z += e;
    }
    for (int c = 0; c < k; ++c) y(n, c) /= z;
  }
  auto back = [logits, batch, k](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& yv = t.node(self).value;
    Tensor& dx = t.grad_buffer(logits);
    for (int n = 0; n < batch; ++n) {
      double dot = 0;
      for (int c = 0; c < k; ++c) dot += g(n, c) * yv(n, c);
      for (int c = 0; c < k; ++c) dx(n, c) += yv(n, c) * (g(n, c) - dot);
    }
  };
  return push(std::move(y), back);
}

NodeId Tape::cross_entropy(NodeId probs, Tensor one_hot) {
  const Tensor& p = value(probs);
  if (p.rank() != 2 || !p.same_shape(one_hot))
    throw std::invalid_argument("cross_entropy: probs/targets shape mismatch");
  const int batch = p.dim(0), k = p.dim(1);
  for (int n = 0; n < batch; ++n) {
    double row = 0;
    for (int c = 0; c < k; ++c) {
      const double t = one_hot(n, c);
      if (t != 0.0 && t != 1.0)
        throw std::invalid_argument("cross_entropy: targets must be one-hot");
      row += t;
    }
    if (row != 1.0)
      throw std::invalid_argument("cross_entropy: targets must be one-hot");
  }
  Tensor y({batch});
  for (int n = 0; n < batch; ++n) {
    double loss = 0;
    for (int c = 0; c < k; ++c)
      if (one_hot(n, c) != 0.0)
        loss -= std::log(std::max(p(n, c), kProbFloor));
    y(n) = loss;
  }
  auto targets = std::make_shared<Tensor>(std::move(one_hot));
  auto back = [probs, targets, batch, k](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& pv = t.value(probs);
    Tensor& dp = t.grad_buffer(probs);
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < k; ++c)
        if ((*targets)(n, c) != 0.0 && pv(n, c) > kProbFloor)
          dp(n, c) -= g(n) / pv(n, c);
  };
  return push(std::move(y), back);
}

NodeId Tape::scale(NodeId input, double factor) {
  Tensor y = value(input);
  for (double& val : y.v) val *= factor;
  auto back = [input, factor](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < g.v.size(); ++i) dx.v[i] += factor * g.v[i];
  };
  return push(std::move(y), back);
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& xa = value(a);
  const Tensor& xb = value(b);
  if (!xa.same_shape(xb)) throw std::invalid_argument("add: shape mismatch");
  Tensor y = xa;
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += xb.v[i];
  auto back = [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    Tensor& da = t.grad_buffer(a);
    Tensor& db = t.grad_buffer(b);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      da.v[i] += g.v[i];
      db.v[i] += g.v[i];
    }
  };
  return push(std::move(y), back);
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& xa = value(a);
  const Tensor& xb = value(b);
  if (!xa.same_shape(xb)) throw std::invalid_argument("mul: shape mismatch");
  Tensor y = xa;
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= xb.v[i];
  auto back = [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    Tensor& da = t.grad_buffer(a);
    Tensor& db = t.grad_buffer(b);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      da.v[i] += g.v[i] * vb.v[i];
      db.v[i] += g.v[i] * va.v[i];
    }
  };
  return push(std::move(y), back);
}

NodeId Tape::sum(NodeId input) {
  const Tensor& x = value(input);
  double s = 0;
  for (double val : x.v) s += val;
  auto back = [input](Tape& t, NodeId self) {
    const double g = t.node(self).grad.v[0];
    Tensor& dx = t.grad_buffer(input);
    for (double& val : dx.v) val += g;
  };
  return push(Tensor::scalar(s), back);
}

NodeId Tape::weighted_sum(NodeId input, Tensor weights) {
  const Tensor& x = value(input);
  if (!x.same_shape(weights))
    throw std::invalid_argument("weighted_sum: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < x.v.size(); ++i) s += weights.v[i] * x.v[i];
  auto w = std::make_shared<Tensor>(std::move(weights));
  auto back = [input, w](Tape& t, NodeId self) {
    const double g = t.node(self).grad.v[0];
    Tensor& dx = t.grad_buffer(input);
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += g * w->v[i];
  };
  return push(Tensor::scalar(s), back);
}

void Tape::backward(NodeId loss) {
  const Node& ln = node(loss);
  if (ln.value.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.shape);
    n.grad_valid = true;
  }
  nodes_[static_cast<std::size_t>(loss)].grad.v[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backprop) n.backprop(*this, id);
  }
}

void sgd_momentum_step(std::vector<Tensor>& params,
                       const std::vector<Tensor>& grads,
                       std::vector<Tensor>& velocity, double lr,
                       double momentum) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_momentum_step: params/grads length mismatch");
  if (velocity.empty()) {
    velocity.reserve(params.size());
    for (const Tensor& p : params) velocity.emplace_back(p.shape);
  }
  if (velocity.size() != params.size())
    throw std::invalid_argument("sgd_momentum_step: bad velocity state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(velocity[i]))
      throw std::invalid_argument("sgd_momentum_step: shape mismatch");
    for (std::size_t j = 0; j < params[i].v.size(); ++j) {
      velocity[i].v[j] = momentum * velocity[i].v[j] + grads[i].v[j];
      params[i].v[j] -= lr * velocity[i].v[j];
    }
  }
}

}  // namespace fetalchd::ad
