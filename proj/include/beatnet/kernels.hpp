#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

// OpenMP kernels behind the autodiff ops. The contract that keeps training
// runs reproducible:
//
//  * threads only ever split work across disjoint output elements, and
//  * the accumulation order within one output element is fixed,
//
// so results are bit-identical for any thread count, including the serial
// fallback behind the runtime switch below. Per output element these loops
// run the same accumulation order as kernels_ref.hpp; the weight/bias
// gradient reductions instead use a lane-blocked order (so they can
// vectorize without -ffast-math) and agree with the reference to rounding.

namespace beatnet::kernels {

// Runtime switch between OpenMP and single-thread execution of the same loop
// nests. On by default; flipping it never changes numeric results.
bool parallel_enabled();
void set_parallel_enabled(bool on);

// Worker threads the next parallel region will use (1 when disabled).
int thread_count();
// Caps the OpenMP team size; no-op when built without OpenMP.
void set_thread_count(int n);

struct ScopedSerial {
  bool prev;
  ScopedSerial() : prev(parallel_enabled()) { set_parallel_enabled(false); }
  ~ScopedSerial() { set_parallel_enabled(prev); }
  ScopedSerial(const ScopedSerial&) = delete;
  ScopedSerial& operator=(const ScopedSerial&) = delete;
};

// Below this many elements a parallel region costs more than it saves.
inline constexpr size_t kElementwiseGrain = 4096;

inline constexpr int kLanes = 8;

// Dot product with kLanes independent accumulators combined in a fixed
// order. Vectorizes under strict FP semantics and is reproducible because
// the order never depends on thread count.
template <typename T>
inline T lane_dot(const T* a, const T* b, int m) {
  T lanes[kLanes] = {};
  int i = 0;
  for (; i + kLanes <= m; i += kLanes)
    for (int l = 0; l < kLanes; ++l) lanes[l] += a[i + l] * b[i + l];
  T acc = 0;
  for (int l = 0; l < kLanes; ++l) acc += lanes[l];
  for (; i < m; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
inline T lane_sum(const T* a, int m) {
  T lanes[kLanes] = {};
  int i = 0;
  for (; i + kLanes <= m; i += kLanes)
    for (int l = 0; l < kLanes; ++l) lanes[l] += a[i + l];
  T acc = 0;
  for (int l = 0; l < kLanes; ++l) acc += lanes[l];
  for (; i < m; ++i) acc += a[i];
  return acc;
}

// Same layout conventions as kernels_ref.hpp. The (c, k) accumulation order
// per output element matches the reference exactly; the loop is shaped as a
// shifted axpy over t so it vectorizes.
template <typename T>
void conv1d_forward(int n, int ci, int co, int len, int ks, const T* x, const T* w,
                    const T* b, T* y) {
  const int pad = ks / 2;
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
  for (int in = 0; in < n; ++in)
    for (int o = 0; o < co; ++o) {
      T* yrow = y + (static_cast<size_t>(in) * co + o) * len;
      for (int t = 0; t < len; ++t) yrow[t] = b[o];
      for (int c = 0; c < ci; ++c) {
        const T* xrow = x + (static_cast<size_t>(in) * ci + c) * len;
        for (int k = 0; k < ks; ++k) {
          const T wv = w[(static_cast<size_t>(o) * ci + c) * ks + k];
          const int shift = k - pad;
          const int t0 = std::max(0, -shift);
          const int t1 = std::min(len, len - shift);
          const T* xs = xrow + shift;
          for (int t = t0; t < t1; ++t) yrow[t] += wv * xs[t];
        }
      }
    }
}

template <typename T>
void conv1d_backward_input(int n, int ci, int co, int len, int ks, const T* dy,
                           const T* w, T* dx) {
  const int pad = ks / 2;
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
  for (int in = 0; in < n; ++in)
    for (int c = 0; c < ci; ++c) {
      T* dxrow = dx + (static_cast<size_t>(in) * ci + c) * len;
      for (int o = 0; o < co; ++o) {
        const T* dyrow = dy + (static_cast<size_t>(in) * co + o) * len;
        for (int k = 0; k < ks; ++k) {
          const T wv = w[(static_cast<size_t>(o) * ci + c) * ks + k];
          const int shift = pad - k;
          const int j0 = std::max(0, -shift);
          const int j1 = std::min(len, len - shift);
          const T* ds = dyrow + shift;
          for (int j = j0; j < j1; ++j) dxrow[j] += wv * ds[j];
        }
      }
    }
}

template <typename T>
void conv1d_backward_weight(int n, int ci, int co, int len, int ks, const T* dy,
                            const T* x, T* dw) {
  const int pad = ks / 2;
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int k = 0; k < ks; ++k) {
        const int shift = k - pad;
        const int t0 = std::max(0, -shift);
        const int t1 = std::min(len, len - shift);
        T acc = 0;
        if (t1 > t0)
          for (int in = 0; in < n; ++in) {
            const T* dyrow = dy + (static_cast<size_t>(in) * co + o) * len;
            const T* xrow = x + (static_cast<size_t>(in) * ci + c) * len + shift;
            acc += lane_dot(dyrow + t0, xrow + t0, t1 - t0);
          }
        dw[(static_cast<size_t>(o) * ci + c) * ks + k] += acc;
      }
}

template <typename T>
void conv1d_backward_bias(int n, int co, int len, const T* dy, T* db) {
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (int o = 0; o < co; ++o) {
    T acc = 0;
    for (int in = 0; in < n; ++in)
      acc += lane_sum(dy + (static_cast<size_t>(in) * co + o) * len, len);
    db[o] += acc;
  }
}

template <typename T>
void fc_forward(int n, int din, int dout, const T* x, const T* w, const T* b, T* y) {
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
  for (int in = 0; in < n; ++in)
    for (int o = 0; o < dout; ++o) {
      const T* xrow = x + static_cast<size_t>(in) * din;
      const T* wrow = w + static_cast<size_t>(o) * din;
      T acc = b[o];
      for (int i = 0; i < din; ++i) acc += wrow[i] * xrow[i];
      y[static_cast<size_t>(in) * dout + o] = acc;
    }
}

template <typename T>
void fc_backward_input(int n, int din, int dout, const T* dy, const T* w, T* dx) {
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
  for (int in = 0; in < n; ++in)
    for (int i = 0; i < din; ++i) {
      const T* dyrow = dy + static_cast<size_t>(in) * dout;
      T acc = 0;
      for (int o = 0; o < dout; ++o) acc += w[static_cast<size_t>(o) * din + i] * dyrow[o];
      dx[static_cast<size_t>(in) * din + i] += acc;
    }
}

template <typename T>
void fc_backward_weight(int n, int din, int dout, const T* dy, const T* x, T* dw) {
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
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
#pragma omp parallel for schedule(static) if (parallel_enabled())
  for (int o = 0; o < dout; ++o) {
    T acc = 0;
    for (int in = 0; in < n; ++in) acc += dy[static_cast<size_t>(in) * dout + o];
    db[o] += acc;
  }
}

template <typename T>
void relu_forward(size_t count, const T* x, T* y) {
  const long long m = static_cast<long long>(count);
#pragma omp parallel for schedule(static) if (parallel_enabled() && count > kElementwiseGrain)
  for (long long i = 0; i < m; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(size_t count, const T* x, const T* dy, T* dx) {
  const long long m = static_cast<long long>(count);
#pragma omp parallel for schedule(static) if (parallel_enabled() && count > kElementwiseGrain)
  for (long long i = 0; i < m; ++i)
    if (x[i] > T(0)) dx[i] += dy[i];
}

template <typename T>
void add_forward(size_t count, const T* a, const T* b, T* y) {
  const long long m = static_cast<long long>(count);
#pragma omp parallel for schedule(static) if (parallel_enabled() && count > kElementwiseGrain)
  for (long long i = 0; i < m; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void accumulate(size_t count, const T* src, T* dst) {
  const long long m = static_cast<long long>(count);
#pragma omp parallel for schedule(static) if (parallel_enabled() && count > kElementwiseGrain)
  for (long long i = 0; i < m; ++i) dst[i] += src[i];
}

template <typename T>
void maxpool_forward(int n, int c, int len, int size, int stride, const T* x, T* y,
                     int* arg) {
  const int ol = (len - size) / stride + 1;
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
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

// Windows overlap when stride < size, so scatter within one (n, ch) row runs
// serially; rows themselves are disjoint.
template <typename T>
void maxpool_backward(int n, int c, int len, int size, int stride, const T* dy,
                      const int* arg, T* dx) {
  const int ol = (len - size) / stride + 1;
#pragma omp parallel for collapse(2) schedule(static) if (parallel_enabled())
  for (int in = 0; in < n; ++in)
    for (int ch = 0; ch < c; ++ch) {
      const T* g = dy + (static_cast<size_t>(in) * c + ch) * ol;
      const int* a = arg + (static_cast<size_t>(in) * c + ch) * ol;
      T* out = dx + (static_cast<size_t>(in) * c + ch) * len;
      for (int j = 0; j < ol; ++j) out[j * stride + a[j]] += g[j];
    }
}

// Rows are independent; the batch mean is summed serially in row order so the
// total never depends on thread count.
template <typename T>
void softmax_xent_forward(int n, int k, const T* logits, const int* labels, T* probs,
                          T* mean_loss) {
  std::vector<T> row_loss(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) if (parallel_enabled() && n > 1)
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
    row_loss[in] = std::log(z) - (row[labels[in]] - m);
  }
  T total = 0;
  for (int in = 0; in < n; ++in) total += row_loss[in];
  *mean_loss = total / static_cast<T>(n);
}

template <typename T>
void softmax_xent_backward(int n, int k, const T* probs, const int* labels, T scale,
                           T* dlogits) {
#pragma omp parallel for schedule(static) if (parallel_enabled() && n > 1)
  for (int in = 0; in < n; ++in) {
    const T* p = probs + static_cast<size_t>(in) * k;
    T* d = dlogits + static_cast<size_t>(in) * k;
    for (int j = 0; j < k; ++j) d[j] += scale * (p[j] - (j == labels[in] ? T(1) : T(0)));
  }
}

}  // namespace beatnet::kernels
