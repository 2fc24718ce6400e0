#pragma once

#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "beatnet/errors.hpp"
#include "beatnet/kernels.hpp"

// Reverse-mode autodiff over dense tensors. Ops run their forward kernel
// immediately and, when a tape is recording, push a closure that knows how to
// route the output gradient back to the inputs. backward() replays those
// closures newest-first. Templated on the element type: the network trains in
// float, the finite-difference tests instantiate double.

namespace beatnet::autodiff {

template <typename T>
struct TensorStorage {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // allocated lazily, only while requires_grad
  bool requires_grad = false;
};

// Shared handle to one tensor. Copies alias the same storage, which is what
// lets tape closures see gradients accumulated after they were recorded.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : s_(std::make_shared<TensorStorage<T>>()) {
    size_t n = 1;
    for (int d : shape) {
      if (d <= 0)
        throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
      n *= static_cast<size_t>(d);
    }
    s_->shape = std::move(shape);
    s_->values.assign(n, T(0));
    s_->requires_grad = requires_grad;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values,
                     bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (values.size() != t.numel())
      throw ShapeError("tensor data has " + std::to_string(values.size()) +
                       " values, shape wants " + std::to_string(t.numel()));
    t.s_->values = std::move(values);
    return t;
  }

  static Tensor scalar(T v) {
    Tensor t;
    t.s_ = std::make_shared<TensorStorage<T>>();
    t.s_->values.assign(1, v);
    return t;
  }

  bool defined() const { return static_cast<bool>(s_); }
  const std::vector<int>& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int dim(int i) const { return s_->shape[static_cast<size_t>(i)]; }
  size_t numel() const { return s_->values.size(); }

  T* data() { return s_->values.data(); }
  const T* data() const { return s_->values.data(); }
  std::vector<T>& values() { return s_->values; }
  const std::vector<T>& values() const { return s_->values; }

  T item() const {
    if (numel() != 1)
      throw ShapeError("item() on a tensor with " + std::to_string(numel()) + " elements");
    return s_->values[0];
  }

  bool requires_grad() const { return s_ && s_->requires_grad; }

  void set_requires_grad(bool on) {
    s_->requires_grad = on;
    if (!on) s_->grad.clear();
  }

  // Gradient accumulator; null until something flowed into it.
  T* grad() { return s_->grad.empty() ? nullptr : s_->grad.data(); }
  const T* grad() const { return s_->grad.empty() ? nullptr : s_->grad.data(); }

  void ensure_grad() {
    if (s_->grad.empty()) s_->grad.assign(s_->values.size(), T(0));
  }

  void zero_grad() {
    std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  std::shared_ptr<TensorStorage<T>> s_;
};

template <typename T>
std::string shape_str(const Tensor<T>& t) {
  std::string s = "[";
  for (int i = 0; i < t.rank(); ++i) {
    if (i) s += ", ";
    s += std::to_string(t.dim(i));
  }
  return s + "]";
}

// Records one closure per differentiable op, in execution order.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and replays every node once, newest first.
  // Gradients accumulate, so a second call without zeroing doubles them.
  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1)
      throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss));
    if (!loss.requires_grad())
      throw ValueError("backward: loss does not depend on any tensor that requires grad");
    loss.ensure_grad();
    loss.zero_grad();
    loss.grad()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <typename T>
inline bool want_tape(const Tape<T>* tape, bool any_requires) {
  return tape != nullptr && any_requires;
}

}  // namespace detail

// Same-length 1-D convolution (cross-correlation, zero padding of k/2 per
// side). x is [ci, len] or [n, ci, len]; w is [co, ci, k] with odd k; b is
// [co].
template <typename T>
Tensor<T> conv1d_same(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                      const Tensor<T>& b) {
  if (w.rank() != 3)
    throw ShapeError("conv1d_same: kernel must be [out_ch, in_ch, k], got " + shape_str(w));
  const int co = w.dim(0), ci = w.dim(1), ks = w.dim(2);
  if (ks % 2 == 0)
    throw ShapeError("conv1d_same: kernel width must be odd, got " + std::to_string(ks));
  if (b.rank() != 1 || b.dim(0) != co)
    throw ShapeError("conv1d_same: bias shape " + shape_str(b) + " does not match " +
                     std::to_string(co) + " output channels");
  const bool batched = x.rank() == 3;
  if (!batched && x.rank() != 2)
    throw ShapeError("conv1d_same: input must be [ch, len] or [batch, ch, len], got " +
                     shape_str(x));
  const int n = batched ? x.dim(0) : 1;
  const int xci = batched ? x.dim(1) : x.dim(0);
  const int len = batched ? x.dim(2) : x.dim(1);
  if (xci != ci)
    throw ShapeError("conv1d_same: input has " + std::to_string(xci) +
                     " channels, kernel wants " + std::to_string(ci));

  Tensor<T> y(batched ? std::vector<int>{n, co, len} : std::vector<int>{co, len});
  kernels::conv1d_forward(n, ci, co, len, ks, x.data(), w.data(), b.data(), y.data());

  if (detail::want_tape(tape, x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, wc = w, bc = b, yc = y;
    tape->record([xc, wc, bc, yc, n, ci, co, len, ks]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      if (xc.requires_grad()) {
        xc.ensure_grad();
        kernels::conv1d_backward_input(n, ci, co, len, ks, gy, wc.data(), xc.grad());
      }
      if (wc.requires_grad()) {
        wc.ensure_grad();
        kernels::conv1d_backward_weight(n, ci, co, len, ks, gy, xc.data(), wc.grad());
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        kernels::conv1d_backward_bias(n, co, len, gy, bc.grad());
      }
    });
  }
  return y;
}

// x is [din] or [n, din]; w is [dout, din]; b is [dout].
template <typename T>
Tensor<T> fully_connected(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& b) {
  if (w.rank() != 2)
    throw ShapeError("fully_connected: weights must be [out, in], got " + shape_str(w));
  const int dout = w.dim(0), din = w.dim(1);
  if (b.rank() != 1 || b.dim(0) != dout)
    throw ShapeError("fully_connected: bias shape " + shape_str(b) + " does not match " +
                     std::to_string(dout) + " outputs");
  const bool batched = x.rank() == 2;
  if (!batched && x.rank() != 1)
    throw ShapeError("fully_connected: input must be [in] or [batch, in], got " +
                     shape_str(x));
  const int n = batched ? x.dim(0) : 1;
  const int xdin = batched ? x.dim(1) : x.dim(0);
  if (xdin != din)
    throw ShapeError("fully_connected: input width " + std::to_string(xdin) +
                     " does not match weight width " + std::to_string(din));

  Tensor<T> y(batched ? std::vector<int>{n, dout} : std::vector<int>{dout});
  kernels::fc_forward(n, din, dout, x.data(), w.data(), b.data(), y.data());

  if (detail::want_tape(tape, x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, wc = w, bc = b, yc = y;
    tape->record([xc, wc, bc, yc, n, din, dout]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      if (xc.requires_grad()) {
        xc.ensure_grad();
        kernels::fc_backward_input(n, din, dout, gy, wc.data(), xc.grad());
      }
      if (wc.requires_grad()) {
        wc.ensure_grad();
        kernels::fc_backward_weight(n, din, dout, gy, xc.data(), wc.grad());
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        kernels::fc_backward_bias(n, dout, gy, bc.grad());
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  kernels::relu_forward(x.numel(), x.data(), y.data());
  if (detail::want_tape(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      xc.ensure_grad();
      kernels::relu_backward(xc.numel(), xc.data(), gy, xc.grad());
    });
  }
  return y;
}

template <typename T>
Tensor<T> residual_add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("residual_add: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  Tensor<T> y(a.shape());
  kernels::add_forward(a.numel(), a.data(), b.data(), y.data());
  if (detail::want_tape(tape, a.requires_grad() || b.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, yc = y;
    tape->record([ac, bc, yc]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      if (ac.requires_grad()) {
        ac.ensure_grad();
        kernels::accumulate(ac.numel(), gy, ac.grad());
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        kernels::accumulate(bc.numel(), gy, bc.grad());
      }
    });
  }
  return y;
}

// x is [c, len] or [n, c, len]; output length (len - size) / stride + 1.
template <typename T>
Tensor<T> maxpool1d(Tape<T>* tape, const Tensor<T>& x, int size, int stride) {
  const bool batched = x.rank() == 3;
  if (!batched && x.rank() != 2)
    throw ShapeError("maxpool1d: input must be [ch, len] or [batch, ch, len], got " +
                     shape_str(x));
  if (size < 1 || stride < 1)
    throw ShapeError("maxpool1d: window " + std::to_string(size) + " stride " +
                     std::to_string(stride) + " must both be positive");
  const int n = batched ? x.dim(0) : 1;
  const int c = batched ? x.dim(1) : x.dim(0);
  const int len = batched ? x.dim(2) : x.dim(1);
  if (len < size)
    throw ShapeError("maxpool1d: input length " + std::to_string(len) +
                     " is shorter than the window " + std::to_string(size));
  const int ol = (len - size) / stride + 1;

  Tensor<T> y(batched ? std::vector<int>{n, c, ol} : std::vector<int>{c, ol});
  auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(n) * c * ol);
  kernels::maxpool_forward(n, c, len, size, stride, x.data(), y.data(), arg->data());

  if (detail::want_tape(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc, arg, n, c, len, size, stride]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      xc.ensure_grad();
      kernels::maxpool_backward(n, c, len, size, stride, gy, arg->data(), xc.grad());
    });
  }
  return y;
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, std::vector<int> shape) {
  Tensor<T> y(std::move(shape));
  if (y.numel() != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x) + " as " + shape_str(y));
  std::memcpy(y.data(), x.data(), x.numel() * sizeof(T));
  if (detail::want_tape(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      xc.ensure_grad();
      kernels::accumulate(xc.numel(), gy, xc.grad());
    });
  }
  return y;
}

template <typename T>
Tensor<T> reduce_sum(Tape<T>* tape, const Tensor<T>& x) {
  Tensor<T> y = Tensor<T>::scalar(kernels::lane_sum(x.data(), static_cast<int>(x.numel())));
  if (detail::want_tape(tape, x.requires_grad())) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape->record([xc, yc]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      xc.ensure_grad();
      T* gx = xc.grad();
      const T g = gy[0];
      for (size_t i = 0; i < xc.numel(); ++i) gx[i] += g;
    });
  }
  return y;
}

namespace detail {

template <typename T>
Tensor<T> softmax_xent_impl(Tape<T>* tape, const Tensor<T>& logits,
                            std::vector<int> labels, int n, int k) {
  for (int i = 0; i < n; ++i)
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= k)
      throw ValueError("softmax_cross_entropy: label " +
                       std::to_string(labels[static_cast<size_t>(i)]) +
                       " out of range for " + std::to_string(k) + " classes");

  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(n) * k);
  auto labs = std::make_shared<std::vector<int>>(std::move(labels));
  T mean_loss = 0;
  kernels::softmax_xent_forward(n, k, logits.data(), labs->data(), probs->data(),
                                &mean_loss);
  Tensor<T> loss = Tensor<T>::scalar(mean_loss);

  if (want_tape(tape, logits.requires_grad())) {
    loss.set_requires_grad(true);
    Tensor<T> lc = logits, yc = loss;
    tape->record([lc, yc, probs, labs, n, k]() mutable {
      const T* gy = yc.grad();
      if (!gy) return;
      lc.ensure_grad();
      kernels::softmax_xent_backward(n, k, probs->data(), labs->data(), gy[0] / T(n),
                                     lc.grad());
    });
  }
  return loss;
}

}  // namespace detail

// Mean cross entropy of softmax(logits) against integer labels. logits is
// [n, k] with n labels.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw ShapeError("softmax_cross_entropy: logits must be [batch, classes], got " +
                     shape_str(logits));
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<size_t>(n) != labels.size())
    throw ShapeError("softmax_cross_entropy: " + std::to_string(n) + " rows vs " +
                     std::to_string(labels.size()) + " labels");
  return detail::softmax_xent_impl(tape, logits, labels, n, k);
}

// Single-sample form: logits is [k].
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits, int label) {
  if (logits.rank() != 1)
    throw ShapeError("softmax_cross_entropy: logits must be [classes], got " +
                     shape_str(logits));
  return detail::softmax_xent_impl(tape, logits, std::vector<int>{label}, 1,
                                   logits.dim(0));
}

}  // namespace beatnet::autodiff
