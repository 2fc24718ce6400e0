#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beatnet/kernels.hpp"
#include "beatnet/kernels_ref.hpp"
#include "beatnet/rng.hpp"

// Times the OpenMP kernels against the serial reference on network-shaped
// workloads and reports the speedups, plus a max-difference column as a
// sanity check that both paths compute the same thing.

namespace {

using beatnet::Rng;
namespace k = beatnet::kernels;

std::vector<float> random_vec(Rng& rng, size_t n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

template <typename Fn>
double time_ms(int repeat, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeat; ++r) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / repeat;
}

struct Row {
  const char* name;
  double ref_ms;
  double serial_ms;
  double omp_ms;
  double diff;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-22s %10s %12s %9s %9s %9s %12s\n", "kernel", "ref ms", "serial ms",
              "omp ms", "ref/ser", "ser/omp", "max |diff|");
  for (const Row& r : rows)
    std::printf("%-22s %10.3f %12.3f %9.3f %8.2fx %8.2fx %12.3g\n", r.name, r.ref_ms,
                r.serial_ms, r.omp_ms, r.ref_ms / r.serial_ms, r.serial_ms / r.omp_ms,
                r.diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark the OpenMP kernels against the serial reference"};
  int batch = 64;
  int channels = 32;
  int len = 187;
  int ks = 5;
  int repeat = 20;
  int threads = 0;
  app.add_option("--batch", batch, "batch size")->capture_default_str();
  app.add_option("--channels", channels, "channel count")->capture_default_str();
  app.add_option("--len", len, "signal length")->capture_default_str();
  app.add_option("--kernel", ks, "conv kernel width")->capture_default_str();
  app.add_option("--repeat", repeat, "timing repetitions")->capture_default_str();
  app.add_option("--threads", threads, "cap OpenMP worker threads")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  if (threads > 0) k::set_thread_count(threads);
  std::printf("batch %d, channels %d, len %d, kernel %d, %d threads\n\n", batch, channels,
              len, ks, k::thread_count());

  Rng rng(7);
  const int n = batch, c = channels;
  const auto x = random_vec(rng, static_cast<size_t>(n) * c * len);
  const auto w = random_vec(rng, static_cast<size_t>(c) * c * ks);
  const auto b = random_vec(rng, static_cast<size_t>(c));
  const auto dy = random_vec(rng, static_cast<size_t>(n) * c * len);

  std::vector<float> y_ref(x.size()), y_opt(x.size());
  std::vector<float> dx_ref(x.size()), dx_opt(x.size());
  std::vector<float> dw_ref(w.size()), dw_opt(w.size());

  std::vector<Row> rows;

  {
    const double ref = time_ms(repeat, [&] {
      k::ref::conv1d_forward(n, c, c, len, ks, x.data(), w.data(), b.data(), y_ref.data());
    });
    k::set_parallel_enabled(false);
    const double ser = time_ms(repeat, [&] {
      k::conv1d_forward(n, c, c, len, ks, x.data(), w.data(), b.data(), y_opt.data());
    });
    k::set_parallel_enabled(true);
    const double omp = time_ms(repeat, [&] {
      k::conv1d_forward(n, c, c, len, ks, x.data(), w.data(), b.data(), y_opt.data());
    });
    rows.push_back({"conv1d_forward", ref, ser, omp, max_abs_diff(y_ref, y_opt)});
  }

  {
    const double ref = time_ms(repeat, [&] {
      std::memset(dx_ref.data(), 0, dx_ref.size() * sizeof(float));
      k::ref::conv1d_backward_input(n, c, c, len, ks, dy.data(), w.data(), dx_ref.data());
    });
    k::set_parallel_enabled(false);
    const double ser = time_ms(repeat, [&] {
      std::memset(dx_opt.data(), 0, dx_opt.size() * sizeof(float));
      k::conv1d_backward_input(n, c, c, len, ks, dy.data(), w.data(), dx_opt.data());
    });
    k::set_parallel_enabled(true);
    const double omp = time_ms(repeat, [&] {
      std::memset(dx_opt.data(), 0, dx_opt.size() * sizeof(float));
      k::conv1d_backward_input(n, c, c, len, ks, dy.data(), w.data(), dx_opt.data());
    });
    rows.push_back({"conv1d_backward_input", ref, ser, omp, max_abs_diff(dx_ref, dx_opt)});
  }

  {
    const double ref = time_ms(repeat, [&] {
      std::memset(dw_ref.data(), 0, dw_ref.size() * sizeof(float));
      k::ref::conv1d_backward_weight(n, c, c, len, ks, dy.data(), x.data(), dw_ref.data());
    });
    k::set_parallel_enabled(false);
    const double ser = time_ms(repeat, [&] {
      std::memset(dw_opt.data(), 0, dw_opt.size() * sizeof(float));
      k::conv1d_backward_weight(n, c, c, len, ks, dy.data(), x.data(), dw_opt.data());
    });
    k::set_parallel_enabled(true);
    const double omp = time_ms(repeat, [&] {
      std::memset(dw_opt.data(), 0, dw_opt.size() * sizeof(float));
      k::conv1d_backward_weight(n, c, c, len, ks, dy.data(), x.data(), dw_opt.data());
    });
    rows.push_back({"conv1d_backward_weight", ref, ser, omp, max_abs_diff(dw_ref, dw_opt)});
  }

  {
    const int din = 64, dout = 32;
    const auto fx = random_vec(rng, static_cast<size_t>(n) * din);
    const auto fw = random_vec(rng, static_cast<size_t>(dout) * din);
    const auto fb = random_vec(rng, static_cast<size_t>(dout));
    std::vector<float> fy_ref(static_cast<size_t>(n) * dout), fy_opt(fy_ref.size());
    const int rep = repeat * 50;
    const double ref = time_ms(rep, [&] {
      k::ref::fc_forward(n, din, dout, fx.data(), fw.data(), fb.data(), fy_ref.data());
    });
    k::set_parallel_enabled(false);
    const double ser = time_ms(rep, [&] {
      k::fc_forward(n, din, dout, fx.data(), fw.data(), fb.data(), fy_opt.data());
    });
    k::set_parallel_enabled(true);
    const double omp = time_ms(rep, [&] {
      k::fc_forward(n, din, dout, fx.data(), fw.data(), fb.data(), fy_opt.data());
    });
    rows.push_back({"fc_forward", ref, ser, omp, max_abs_diff(fy_ref, fy_opt)});
  }

  print_rows(rows);
  return 0;
}
