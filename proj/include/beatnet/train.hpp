#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "beatnet/beat.hpp"
#include "beatnet/errors.hpp"
#include "beatnet/model.hpp"
#include "beatnet/rng.hpp"

// Minibatch training: Adam with a stepped exponential learning-rate decay,
// oversampling-based class balancing, and the dataset splits both tasks use.

namespace beatnet {

enum class BalanceMode { Oversample, Duplicate, None };
enum class SplitPolicy { IntraPatient, InterPatient };

const char* to_string(BalanceMode m);
const char* to_string(SplitPolicy p);
BalanceMode balance_mode_from_string(const std::string& s);
SplitPolicy split_policy_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_factor = 0.75;
  long long decay_interval = 10000;  // iterations between decays
  int batch_size = 128;
  long long max_iterations = 30000;
  long long log_every = 100;
  uint64_t seed = 1;
  BalanceMode balance = BalanceMode::Oversample;
  SplitPolicy split_policy = SplitPolicy::IntraPatient;

  void validate() const;
};

// learning_rate * decay_factor^floor(iteration / decay_interval).
double lr_schedule(const TrainConfig& cfg, long long iteration);

// One Adam update on a flat parameter array. t is the 1-based step count
// already including this step. Throws DivergenceError (iteration -1; callers
// that know the iteration rethrow with it) on a non-finite gradient.
template <typename T>
void adam_update(size_t count, T* p, const T* g, T* m, T* v, long long t, T lr, T beta1,
                 T beta2, T eps) {
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
  for (size_t i = 0; i < count; ++i) {
    const T gi = g[i];
    if (!std::isfinite(gi))
      throw DivergenceError(-1, "non-finite gradient at element " + std::to_string(i));
    m[i] = beta1 * m[i] + (T(1) - beta1) * gi;
    v[i] = beta2 * v[i] + (T(1) - beta2) * gi * gi;
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// Adam state over a parameter list. Parameters whose gradient never flowed
// (frozen, or unused this step) are left untouched.
class Adam {
 public:
  Adam(std::vector<NamedParam> params, const TrainConfig& cfg);

  void zero_grad();
  void step(double lr, long long iteration);
  long long t() const { return t_; }
  const std::vector<NamedParam>& params() const { return params_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<float>> m_, v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

// Oversamples every minority class to the majority count by drawing
// duplicates with replacement. Oversample mode also scales each duplicate's
// amplitude by a uniform [0.9, 1.1] factor, clipped back to [0, 1]. The
// original beats always pass through unchanged.
std::vector<Beat> balance_classes(const std::vector<Beat>& beats, uint64_t seed,
                                  BalanceMode mode, int n_classes);

struct DatasetSplit {
  std::vector<Beat> train;
  std::vector<Beat> test;
  std::vector<int64_t> train_counts;
  std::vector<int64_t> test_counts;
  std::string policy;  // human-readable description of what was applied
};

// MIT-BIH protocol: per class, up to `quota` beats go to the test set while
// at least `reserve` stay behind for training. A class with fewer than
// `reserve` beats makes the protocol impossible and throws. InterPatient
// moves whole subjects into the test set until every class quota is covered.
DatasetSplit make_mitbih_split(const std::vector<Beat>& beats, uint64_t seed,
                               SplitPolicy policy, int quota = 819, int reserve = 50);

// PTB protocol: stratified train fraction per class (default 80/20).
// InterPatient stratifies over subjects instead of beats.
DatasetSplit make_ptb_split(const std::vector<Beat>& beats, uint64_t seed,
                            SplitPolicy policy, double train_fraction = 0.8);

struct HistoryRow {
  long long iteration;  // completed iterations at the time of the row
  double lr;
  double loss;      // mean batch loss since the previous row
  double accuracy;  // mean batch accuracy since the previous row
};

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows);

// Runs the minibatch loop over any model exposing logits(tape, x),
// trainable_params() and n_classes(). Batch composition is a seeded shuffle
// replayed identically for a given config, so runs are reproducible.
template <class Model>
class Trainer {
 public:
  Trainer(Model& model, std::vector<Beat> train_beats, const TrainConfig& cfg)
      : model_(model),
        beats_(std::move(train_beats)),
        cfg_(cfg),
        rng_(cfg.seed),
        adam_(model.trainable_params(), cfg) {
    cfg_.validate();
    if (beats_.empty()) throw ValueError("training set is empty");
    for (const Beat& b : beats_)
      if (!b.label || *b.label < 0 || *b.label >= model_.n_classes())
        throw ValueError("beat '" + b.id + "' has a missing or out-of-range label");
    order_.resize(beats_.size());
    std::iota(order_.begin(), order_.end(), size_t{0});
    cursor_ = order_.size();  // forces a shuffle before the first batch
  }

  long long iteration() const { return iter_; }
  const std::vector<HistoryRow>& history() const { return history_; }

  // One minibatch: forward, loss, backward, Adam. Returns the batch loss.
  double step() {
    const int len = kBeatLength;
    const int bs = static_cast<int>(
        std::min<size_t>(static_cast<size_t>(cfg_.batch_size), beats_.size()));
    TensorF x({bs, 1, len});
    std::vector<int> labels(static_cast<size_t>(bs));
    for (int i = 0; i < bs; ++i) {
      if (cursor_ >= order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
      }
      const Beat& b = beats_[order_[cursor_++]];
      std::copy(b.samples.begin(), b.samples.end(),
                x.data() + static_cast<size_t>(i) * len);
      labels[static_cast<size_t>(i)] = *b.label;
    }

    TapeF tape;
    const TensorF logits = model_.logits(&tape, x);
    TensorF loss = autodiff::softmax_cross_entropy(&tape, logits, labels);
    const double loss_v = static_cast<double>(loss.item());
    if (!std::isfinite(loss_v))
      throw DivergenceError(iter_, "non-finite loss at iteration " + std::to_string(iter_));

    int correct = 0;
    const int k = model_.n_classes();
    for (int i = 0; i < bs; ++i) {
      const float* row = logits.data() + static_cast<size_t>(i) * k;
      int arg = 0;
      for (int j = 1; j < k; ++j)
        if (row[j] > row[arg]) arg = j;
      if (arg == labels[static_cast<size_t>(i)]) ++correct;
    }

    adam_.zero_grad();
    tape.backward(loss);
    adam_.step(lr_schedule(cfg_, iter_), iter_);

    interval_loss_ += loss_v;
    interval_correct_ += correct;
    interval_total_ += bs;
    ++interval_steps_;
    ++iter_;
    if (iter_ % cfg_.log_every == 0) flush_history_row();
    return loss_v;
  }

  void run(long long iterations) {
    for (long long i = 0; i < iterations; ++i) step();
    if (interval_steps_ > 0) flush_history_row();
  }

  // Convenience for the overfit checks: stops early once `streak` successive
  // batches are fully correct. Returns the iterations actually run.
  long long run_until_fit(long long max_iterations, int streak = 3) {
    int hits = 0;
    long long done = 0;
    while (done < max_iterations) {
      const long long before_correct = interval_correct_;
      const long long before_total = interval_total_;
      step();
      ++done;
      const bool all = interval_total_ - before_total > 0 &&
                       interval_correct_ - before_correct == interval_total_ - before_total;
      hits = all ? hits + 1 : 0;
      if (hits >= streak) break;
    }
    if (interval_steps_ > 0) flush_history_row();
    return done;
  }

 private:
  void flush_history_row() {
    history_.push_back({iter_, lr_schedule(cfg_, iter_ - 1),
                        interval_loss_ / static_cast<double>(interval_steps_),
                        static_cast<double>(interval_correct_) /
                            static_cast<double>(interval_total_)});
    interval_loss_ = 0.0;
    interval_correct_ = 0;
    interval_total_ = 0;
    interval_steps_ = 0;
  }

  Model& model_;
  std::vector<Beat> beats_;
  TrainConfig cfg_;
  Rng rng_;
  Adam adam_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
  long long iter_ = 0;
  std::vector<HistoryRow> history_;
  double interval_loss_ = 0.0;
  long long interval_correct_ = 0;
  long long interval_total_ = 0;
  long long interval_steps_ = 0;
};

}  // namespace beatnet
