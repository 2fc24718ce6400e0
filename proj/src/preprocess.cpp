#include "beatnet/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "beatnet/errors.hpp"
#include "beatnet/kernels.hpp"

namespace beatnet {

std::vector<float> resample_to_target(const std::vector<float>& x, double fs_in) {
  if (fs_in <= 0.0) throw ValueError("resample: sampling rate must be positive");
  if (x.empty()) return {};
  const double ratio = fs_in / kTargetRateHz;
  const auto out_len = static_cast<size_t>(
      std::floor(static_cast<double>(x.size()) * kTargetRateHz / fs_in));
  std::vector<float> out(out_len);
  const size_t last = x.size() - 1;
  for (size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    size_t lo = static_cast<size_t>(pos);
    if (lo >= last) {
      out[i] = x[last];
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    out[i] = static_cast<float>(x[lo] + (x[lo + 1] - x[lo]) * frac);
  }
  return out;
}

std::vector<std::vector<float>> split_windows(const std::vector<float>& x) {
  std::vector<std::vector<float>> out;
  const size_t full = x.size() / kWindowSamples;
  out.reserve(full);
  for (size_t w = 0; w < full; ++w)
    out.emplace_back(x.begin() + static_cast<ptrdiff_t>(w * kWindowSamples),
                     x.begin() + static_cast<ptrdiff_t>((w + 1) * kWindowSamples));
  return out;
}

std::vector<float> normalize_window(const std::vector<float>& w) {
  const auto [lo_it, hi_it] = std::minmax_element(w.begin(), w.end());
  const float lo = *lo_it, hi = *hi_it;
  if (hi <= lo) throw ValueError("normalize: constant window has no amplitude range");
  std::vector<float> out(w.size());
  const float inv = 1.0f / (hi - lo);
  for (size_t i = 0; i < w.size(); ++i) out[i] = (w[i] - lo) * inv;
  return out;
}

std::vector<int> find_r_peaks(const std::vector<float>& w) {
  std::vector<int> merged;
  const int n = static_cast<int>(w.size());
  for (int i = 1; i + 1 < n; ++i) {
    const bool rising = w[i] - w[i - 1] > 0.0f;
    const bool falling_next = w[i + 1] - w[i] <= 0.0f;
    if (!(rising && falling_next) || w[i] < kPeakThreshold) continue;
    if (!merged.empty() && i - merged.back() < kPeakMergeRadius) {
      if (w[i] > w[merged.back()]) merged.back() = i;
    } else {
      merged.push_back(i);
    }
  }
  return merged;
}

std::optional<double> nominal_period(const std::vector<int>& peaks) {
  if (peaks.size() < 2) return std::nullopt;
  std::vector<int> rr(peaks.size() - 1);
  for (size_t i = 0; i + 1 < peaks.size(); ++i) rr[i] = peaks[i + 1] - peaks[i];
  std::sort(rr.begin(), rr.end());
  const size_t m = rr.size();
  if (m % 2 == 1) return static_cast<double>(rr[m / 2]);
  return (static_cast<double>(rr[m / 2 - 1]) + static_cast<double>(rr[m / 2])) / 2.0;
}

std::vector<Beat> extract_beats(const std::vector<float>& window, int64_t window_start,
                                int window_index, const std::vector<int>& peaks,
                                double period, const std::string& subject) {
  const int part = static_cast<int>(std::llround(kBeatPeriodFactor * period));
  std::vector<Beat> out;
  if (part < 1) return out;
  out.reserve(peaks.size());
  const int n = static_cast<int>(window.size());
  for (size_t pi = 0; pi < peaks.size(); ++pi) {
    const int p = peaks[pi];
    Beat b;
    const int avail = std::min({part, n - p, kBeatLength});
    for (int i = 0; i < avail; ++i) b.samples[static_cast<size_t>(i)] = window[static_cast<size_t>(p + i)];
    // the tail beyond avail stays zero
    b.peak_index = p;
    b.abs_peak_index = window_start + p;
    b.subject = subject;
    b.id = subject + ":w" + std::to_string(window_index) + ":p" + std::to_string(pi);
    out.push_back(std::move(b));
  }
  return out;
}

PreprocessStats& PreprocessStats::operator+=(const PreprocessStats& o) {
  windows += o.windows;
  windows_constant += o.windows_constant;
  windows_few_peaks += o.windows_few_peaks;
  beats += o.beats;
  beats_unlabeled += o.beats_unlabeled;
  beats_unmapped += o.beats_unmapped;
  return *this;
}

std::vector<Beat> extract_record_beats(const std::vector<float>& signal, double fs_in,
                                       const std::string& subject, PreprocessStats* stats) {
  const std::vector<float> rs = resample_to_target(signal, fs_in);
  const std::vector<std::vector<float>> windows = split_windows(rs);
  const int nw = static_cast<int>(windows.size());

  std::vector<std::vector<Beat>> per_window(windows.size());
  std::vector<PreprocessStats> per_stats(windows.size());

#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && nw > 1)
  for (int wi = 0; wi < nw; ++wi) {
    PreprocessStats& st = per_stats[static_cast<size_t>(wi)];
    st.windows = 1;
    const std::vector<float>& raw = windows[static_cast<size_t>(wi)];
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    if (*hi <= *lo) {
      st.windows_constant = 1;
      continue;
    }
    const std::vector<float> norm = normalize_window(raw);
    const std::vector<int> peaks = find_r_peaks(norm);
    const std::optional<double> period = nominal_period(peaks);
    if (!period) {
      st.windows_few_peaks = 1;
      continue;
    }
    per_window[static_cast<size_t>(wi)] =
        extract_beats(norm, static_cast<int64_t>(wi) * kWindowSamples, wi, peaks, *period,
                      subject);
    st.beats = static_cast<int64_t>(per_window[static_cast<size_t>(wi)].size());
  }

  std::vector<Beat> beats;
  for (int wi = 0; wi < nw; ++wi) {
    if (stats) *stats += per_stats[static_cast<size_t>(wi)];
    for (Beat& b : per_window[static_cast<size_t>(wi)]) beats.push_back(std::move(b));
  }
  return beats;
}

std::vector<wfdb::AnnotationEvent> rescale_annotations(
    const std::vector<wfdb::AnnotationEvent>& events, double fs_in) {
  if (fs_in <= 0.0) throw ValueError("rescale_annotations: sampling rate must be positive");
  std::vector<wfdb::AnnotationEvent> out;
  out.reserve(events.size());
  for (const wfdb::AnnotationEvent& e : events) {
    const double t = static_cast<double>(e.sample) * kTargetRateHz / fs_in;
    out.push_back({static_cast<int64_t>(std::llround(t)), e.symbol});
  }
  return out;
}

std::vector<Beat> label_beats(const std::vector<Beat>& beats,
                              const std::vector<wfdb::AnnotationEvent>& events,
                              PreprocessStats* stats) {
  std::vector<wfdb::AnnotationEvent> sorted = events;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const wfdb::AnnotationEvent& a, const wfdb::AnnotationEvent& b) {
                     return a.sample < b.sample;
                   });
  std::vector<Beat> out;
  out.reserve(beats.size());
  for (const Beat& b : beats) {
    // First event at or after the peak; the one before may be closer. Ties go
    // to the earlier event.
    const auto it = std::lower_bound(
        sorted.begin(), sorted.end(), b.abs_peak_index,
        [](const wfdb::AnnotationEvent& e, int64_t t) { return e.sample < t; });
    const wfdb::AnnotationEvent* best = nullptr;
    int64_t best_dist = 0;
    if (it != sorted.begin()) {
      best = &*(it - 1);
      best_dist = b.abs_peak_index - best->sample;
    }
    if (it != sorted.end()) {
      const int64_t d = it->sample - b.abs_peak_index;
      if (!best || d < best_dist) {
        best = &*it;
        best_dist = d;
      }
    }
    if (!best || best_dist > kLabelToleranceSamples) {
      if (stats) ++stats->beats_unlabeled;
      continue;
    }
    const std::optional<wfdb::Aami> cls = wfdb::map_symbol_to_class(best->symbol);
    if (!cls) {
      if (stats) ++stats->beats_unmapped;
      continue;
    }
    Beat labeled = b;
    labeled.label = static_cast<int>(*cls);
    out.push_back(std::move(labeled));
  }
  return out;
}

std::vector<Beat> label_beats_uniform(std::vector<Beat> beats, int label) {
  for (Beat& b : beats) b.label = label;
  return beats;
}

}  // namespace beatnet
