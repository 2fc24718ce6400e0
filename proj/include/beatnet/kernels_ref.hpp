#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

// Plain serial kernels, written as directly as possible from the math. They
// are the baseline the OpenMP kernels in kernels.hpp are tested and
// benchmarked against, and are never used on a hot path.
//
// Layout conventions shared with kernels.hpp:
//   signals  x[n][c][t]   row-major, n batch, c channel, t time
//   kernels  w[o][c][k]   o output channel, k tap
//   fc       w[o][i]      o output unit, i input unit
// Convolutions are cross-correlations (no kernel flip) with zero padding of
// k/2 on both sides, so output length equals input length.

namespace beatnet::kernels::ref {

template <typename T>
void conv1d_forward(int n, int ci, int co, int len, int ks, const T* x, const T* w,
                    const T* b, T* y) {
  const int pad = ks / 2;
  for (int in = 0; in < n; ++in)
    for (int o = 0; o < co; ++o)
      for (int t = 0; t < len; ++t) {
        T acc = b[o];
        for (int c = 0; c < ci; ++c)
          for (int k = 0; k < ks; ++k) {
            const int src = t + k - pad;
            if (src >= 0 && src < len)
              acc += w[(static_cast<size_t>(o) * ci + c) * ks + k] *
                     x[(static_cast<size_t>(in) * ci + c) * len + src];
          }
        y[(static_cast<size_t>(in) * co + o) * len + t] = acc;
      }
}

template <typename T>
void conv1d_backward_input(int n, int ci, int co, int len, int ks, const T* dy,
                           const T* w, T* dx) {
  const int pad = ks / 2;
  for (int in = 0; in < n; ++in)
    for (int c = 0; c < ci; ++c)
      for (int j = 0; j < len; ++j) {
        T acc = 0;
        for (int o = 0; o < co; ++o)
          for (int k = 0; k < ks; ++k) {
            const int t = j - k + pad;
            if (t >= 0 && t < len)
              acc += w[(static_cast<size_t>(o) * ci + c) * ks + k] *
                     dy[(static_cast<size_t>(in) * co + o) * len + t];
          }
        dx[(static_cast<size_t>(in) * ci + c) * len + j] += acc;
      }
}

template <typename T>
void conv1d_backward_weight(int n, int ci, int co, int len, int ks, const T* dy,
                            const T* x, T* dw) {
  const int pad = ks / 2;
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int k = 0; k < ks; ++k) {
        T acc = 0;
        for (int in = 0; in < n; ++in)
          for (int t = 0; t < len; ++t) {
            const int src = t + k - pad;
            if (src >= 0 && src < len)
              acc += dy[(static_cast<size_t>(in) * co + o) * len + t] *
                     x[(static_cast<size_t>(in) * ci + c) * len + src];
          }
        dw[(static_cast<size_t>(o) * ci + c) * ks + k] += acc;
      }
}

template <typename T>
void conv1d_backward_bias(int n, int co, int len, const T* dy, T* db) {
  for (int o = 0; o < co; ++o) {
    T acc = 0;
    for (int in = 0; in < n; ++in)
      for (int t = 0; t < len; ++t) acc += dy[(static_cast<size_t>(in) * co + o) * len + t];
    db[o] += acc;
  }
}

template <typename T>
void fc_forward(int n, int din, int dout, const T* x, const T* w, const T* b, T* y) {
  for (int in = 0; in < n; ++in)
    for (int o = 0; o < dout; ++o) {
      T acc = b[o];
      for (int i = 0; i < din; ++i)
        acc += w[static_cast<size_t>(o) * din + i] * x[static_cast<size_t>(in) * din + i];
      y[static_cast<size_t>(in) * dout + o] = acc;
    }
}

template <typename T>
void fc_backward_input(int n, int din, int dout, const T* dy, const T* w, T* dx) {
  for (int in = 0; in < n; ++in)
    for (int i = 0; i < din; ++i) {
      T acc = 0;
      for (int o = 0; o < dout; ++o)
        acc += w[static_cast<size_t>(o) * din + i] * dy[static_cast<size_t>(in) * dout + o];
      dx[static_cast<size_t>(in) * din + i] += acc;
    }
}

template <typename T>
void fc_backward_weight(int n, int din, int dout, const T* dy, const T* x, T* dw) {
  for (int o = 0; o < dout; ++o)
    for (int i = 0; i < din; ++i) {
      T acc = 0;
      for (int in = 0; in < n; ++in)
        acc += dy[static_cast<size_t>(in) * dout + o] * x[static_cast<size_t>(in) * din + i];
      dw[static_cast<size_t>(o) * din + i] += acc;
    }
}

template <typename T>
void fc_backward_bias(int n, int dout, const T* dy, T* db) {
  for (int o = 0; o < dout; ++o) {
    T acc = 0;
    for (int in = 0; in < n; ++in) acc += dy[static_cast<size_t>(in) * dout + o];
    db[o] += acc;
  }
}

template <typename T>
void relu_forward(size_t count, const T* x, T* y) {
  for (size_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// Subgradient 0 at exactly 0.
template <typename T>
void relu_backward(size_t count, const T* x, const T* dy, T* dx) {
  for (size_t i = 0; i < count; ++i)
    if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void add_forward(size_t count, const T* a, const T* b, T* y) {
  for (size_t i = 0; i < count; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void accumulate(size_t count, const T* src, T* dst) {
  for (size_t i = 0; i < count; ++i) dst[i] += src[i];
}

// Window max; ties go to the lowest index. arg stores the in-window offset of
// the winner for the backward pass.
template <typename T>
void maxpool_forward(int n, int c, int len, int size, int stride, const T* x, T* y,
                     int* arg) {
  const int ol = (len - size) / stride + 1;
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch) {
      const T* row = x + (static_cast<size_t>(in) * c + ch) * len;
      T* out = y + (static_cast<size_t>(in) * c + ch) * ol;
      int* a = arg + (static_cast<size_t>(in) * c + ch) * ol;
      for (int j = 0; j < ol; ++j) {
        int best = 0;
        T bv = row[j * stride];
        for (int k = 1; k < size; ++k) {
          const T v = row[j * stride + k];
          if (v > bv) {
            bv = v;
            best = k;
          }
        }
        out[j] = bv;
        a[j] = best;
      }
    }
}

template <typename T>
void maxpool_backward(int n, int c, int len, int size, int stride, const T* dy,
                      const int* arg, T* dx) {
  const int ol = (len - size) / stride + 1;
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch) {
      const T* g = dy + (static_cast<size_t>(in) * c + ch) * ol;
      const int* a = arg + (static_cast<size_t>(in) * c + ch) * ol;
      T* out = dx + (static_cast<size_t>(in) * c + ch) * len;
      for (int j = 0; j < ol; ++j) out[j * stride + a[j]] += g[j];
    }
}

// Max-subtraction stabilized softmax + cross entropy, averaged over the
// batch. probs holds the full softmax for the backward pass.
template <typename T>
void softmax_xent_forward(int n, int k, const T* logits, const int* labels, T* probs,
                          T* mean_loss) {
  T total = 0;
  for (int in = 0; in < n; ++in) {
    const T* row = logits + static_cast<size_t>(in) * k;
    T* p = probs + static_cast<size_t>(in) * k;
    T m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    T z = 0;
    for (int j = 0; j < k; ++j) {
      p[j] = std::exp(row[j] - m);
      z += p[j];
    }
    for (int j = 0; j < k; ++j) p[j] /= z;
    total += std::log(z) - (row[labels[in]] - m);
  }
  *mean_loss = total / static_cast<T>(n);
}

// d(mean loss)/d(logit) = (softmax - onehot) / n, scaled by the upstream
// gradient of the loss scalar.
template <typename T>
void softmax_xent_backward(int n, int k, const T* probs, const int* labels, T scale,
                           T* dlogits) {
  for (int in = 0; in < n; ++in) {
    const T* p = probs + static_cast<size_t>(in) * k;
    T* d = dlogits + static_cast<size_t>(in) * k;
    for (int j = 0; j < k; ++j) d[j] += scale * (p[j] - (j == labels[in] ? T(1) : T(0)));
  }
}

}  // namespace beatnet::kernels::ref
