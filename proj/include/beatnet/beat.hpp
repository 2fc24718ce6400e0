#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace beatnet {

// Every beat the pipeline produces is exactly this long: 1.5 s at 125 Hz,
// zero-padded on the right when the raw segment is shorter.
inline constexpr int kBeatLength = 187;

// The two label spaces the models are trained in.
enum class Task { Arrhythmia, Mi };

constexpr int n_classes(Task t) { return t == Task::Arrhythmia ? 5 : 2; }

// Class names in label-index order.
const std::array<const char*, 5>& arrhythmia_class_names();
const std::array<const char*, 2>& mi_class_names();

const char* class_name(Task t, int label);

// One fixed-length heartbeat segment, normalized to [0, 1].
struct Beat {
  std::array<float, kBeatLength> samples{};
  int peak_index = 0;        // R-peak offset inside the source window
  int64_t abs_peak_index = 0;  // R-peak position on the 125 Hz record timeline
  std::optional<int> label;  // class index in the owning dataset's task
  std::string subject;       // record or patient the beat came from
  std::string id;            // stable identity, e.g. "100:w3:p12"
};

}  // namespace beatnet
