#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "beatnet/beat.hpp"
#include "beatnet/wfdb.hpp"

// Turns one ECG channel into fixed-length beats: resample to 125 Hz, cut
// into 10 s windows, min-max normalize, find R-peak candidates, estimate the
// beat period as the median R-R interval, then cut [peak, peak + 1.2 T) and
// pad or truncate to 187 samples.

namespace beatnet {

inline constexpr int kTargetRateHz = 125;
inline constexpr int kWindowSamples = 1250;           // 10 s
inline constexpr float kPeakThreshold = 0.9f;         // on the normalized window
inline constexpr int kPeakMergeRadius = 31;           // 0.25 s refractory
inline constexpr double kBeatPeriodFactor = 1.2;
inline constexpr int kLabelToleranceSamples = 19;     // 0.15 s

// Linear interpolation onto a 125 Hz grid; output index i reads input time
// i * fs_in / 125. Output length is floor(len * 125 / fs_in).
std::vector<float> resample_to_target(const std::vector<float>& x, double fs_in);

// Non-overlapping full windows; a short tail is discarded.
std::vector<std::vector<float>> split_windows(const std::vector<float>& x);

// Min-max to [0, 1]. Throws ValueError on a constant window.
std::vector<float> normalize_window(const std::vector<float>& w);

// Local maxima (rise then non-rise) at or above the threshold, with
// candidates closer than kPeakMergeRadius merged keeping the larger value.
std::vector<int> find_r_peaks(const std::vector<float>& w);

// Median R-R interval in samples; nullopt with fewer than two peaks.
std::optional<double> nominal_period(const std::vector<int>& peaks);

// Cuts one beat per peak. window_index and subject feed the beat ids.
std::vector<Beat> extract_beats(const std::vector<float>& window, int64_t window_start,
                                int window_index, const std::vector<int>& peaks,
                                double period, const std::string& subject);

// Per-record bookkeeping: what was dropped and why.
struct PreprocessStats {
  int64_t windows = 0;
  int64_t windows_constant = 0;    // flat signal, skipped
  int64_t windows_few_peaks = 0;   // fewer than two peaks, no period estimate
  int64_t beats = 0;
  int64_t beats_unlabeled = 0;     // no annotation within tolerance
  int64_t beats_unmapped = 0;      // nearest annotation has no AAMI class
  PreprocessStats& operator+=(const PreprocessStats& o);
};

// The full signal-to-beats path for one channel already in physical units.
// Windows are independent, so they are processed in parallel; the returned
// order is by window then by peak regardless of thread count.
std::vector<Beat> extract_record_beats(const std::vector<float>& signal, double fs_in,
                                       const std::string& subject, PreprocessStats* stats);

// Rescales native-rate annotation times onto the 125 Hz timeline.
std::vector<wfdb::AnnotationEvent> rescale_annotations(
    const std::vector<wfdb::AnnotationEvent>& events, double fs_in);

// Labels each beat with the AAMI class of the nearest annotation within
// kLabelToleranceSamples (ties to the earlier event). Beats with nothing in
// range, or whose nearest annotation has no AAMI class, are dropped and
// counted. events must be on the 125 Hz timeline.
std::vector<Beat> label_beats(const std::vector<Beat>& beats,
                              const std::vector<wfdb::AnnotationEvent>& events,
                              PreprocessStats* stats);

// Applies one binary label (PTB: HC = 0, MI = 1) to every beat.
std::vector<Beat> label_beats_uniform(std::vector<Beat> beats, int label);

}  // namespace beatnet
