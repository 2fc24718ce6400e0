#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "beatnet/beat.hpp"
#include "beatnet/errors.hpp"

// Confusion-matrix evaluation, per-class precision/recall, the MI summary
// metrics, and embedding export.

namespace beatnet {

struct EvalReport {
  int n_classes = 0;
  int64_t n = 0;
  std::vector<int64_t> confusion;  // row = true class, column = predicted

  explicit EvalReport(int k = 0)
      : n_classes(k), confusion(static_cast<size_t>(k) * static_cast<size_t>(k), 0) {}

  int64_t& at(int truth, int pred) {
    return confusion[static_cast<size_t>(truth) * n_classes + pred];
  }
  int64_t at(int truth, int pred) const {
    return confusion[static_cast<size_t>(truth) * n_classes + pred];
  }

  int64_t row_total(int truth) const;
  int64_t col_total(int pred) const;

  double accuracy() const;
  // 0 when the denominator is empty.
  double precision(int c) const;
  double recall(int c) const;
  double macro_precision() const;
  double macro_recall() const;
};

// MI summary with class 1 (MI) as the positive class.
struct MiMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

MiMetrics report_mi_metrics(const EvalReport& report);

void write_report_text(const EvalReport& report, Task task, std::ostream& os);
void write_report_csv(const EvalReport& report, Task task, std::ostream& os);
void write_report_files(const EvalReport& report, Task task, const std::string& text_path,
                        const std::string& csv_path);

// Batched argmax evaluation. Ties pick the lowest class index. Works for any
// model with n_classes(), config().input_length and predict_batch().
template <class Model>
EvalReport evaluate(const Model& model, const std::vector<Beat>& beats) {
  const int k = model.n_classes();
  EvalReport report(k);
  if (beats.empty()) return report;

  constexpr int kChunk = 512;
  std::vector<float> x(static_cast<size_t>(kChunk) * kBeatLength);
  std::vector<float> probs(static_cast<size_t>(kChunk) * k);
  for (size_t at = 0; at < beats.size(); at += kChunk) {
    const int m = static_cast<int>(std::min<size_t>(kChunk, beats.size() - at));
    for (int i = 0; i < m; ++i) {
      const Beat& b = beats[at + static_cast<size_t>(i)];
      if (!b.label || *b.label < 0 || *b.label >= k)
        throw ValueError("beat '" + b.id + "' has a missing or out-of-range label");
      std::copy(b.samples.begin(), b.samples.end(),
                x.begin() + static_cast<size_t>(i) * kBeatLength);
    }
    model.predict_batch(x.data(), m, probs.data());
    for (int i = 0; i < m; ++i) {
      const float* row = probs.data() + static_cast<size_t>(i) * k;
      int arg = 0;
      for (int j = 1; j < k; ++j)
        if (row[j] > row[arg]) arg = j;
      ++report.at(*beats[at + static_cast<size_t>(i)].label, arg);
      ++report.n;
    }
  }
  return report;
}

// CSV with one row per beat: embedding values then the label.
template <class Model>
void export_embeddings(const Model& model, const std::vector<Beat>& beats,
                       const std::string& path);

// The implementation lives in eval.cpp via this untemplated core.
void export_embeddings_impl(const std::vector<Beat>& beats, const float* embeddings,
                            int dim, const std::string& path);

template <class Model>
void export_embeddings(const Model& model, const std::vector<Beat>& beats,
                       const std::string& path) {
  const int dim = model.embedding_dim();
  std::vector<float> e(beats.size() * static_cast<size_t>(dim));
  std::vector<float> x(beats.size() * static_cast<size_t>(kBeatLength));
  for (size_t i = 0; i < beats.size(); ++i)
    std::copy(beats[i].samples.begin(), beats[i].samples.end(),
              x.begin() + i * kBeatLength);
  if (!beats.empty())
    model.embed_batch(x.data(), static_cast<int>(beats.size()), e.data());
  export_embeddings_impl(beats, e.data(), dim, path);
}

}  // namespace beatnet
