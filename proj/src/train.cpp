#include "beatnet/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "beatnet/dataset.hpp"

namespace beatnet {

const char* to_string(BalanceMode m) {
  switch (m) {
    case BalanceMode::Oversample: return "oversample";
    case BalanceMode::Duplicate: return "duplicate";
    case BalanceMode::None: return "none";
  }
  return "?";
}

const char* to_string(SplitPolicy p) {
  return p == SplitPolicy::IntraPatient ? "intra" : "inter";
}

BalanceMode balance_mode_from_string(const std::string& s) {
  if (s == "oversample") return BalanceMode::Oversample;
  if (s == "duplicate") return BalanceMode::Duplicate;
  if (s == "none") return BalanceMode::None;
  throw UsageError("unknown balance mode '" + s + "' (oversample, duplicate or none)");
}

SplitPolicy split_policy_from_string(const std::string& s) {
  if (s == "intra") return SplitPolicy::IntraPatient;
  if (s == "inter") return SplitPolicy::InterPatient;
  throw UsageError("unknown split policy '" + s + "' (intra or inter)");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ValueError("learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ValueError("Adam betas must lie in [0, 1)");
  if (epsilon <= 0.0) throw ValueError("Adam epsilon must be positive");
  if (decay_factor <= 0.0 || decay_factor > 1.0)
    throw ValueError("decay factor must lie in (0, 1]");
  if (decay_interval < 1) throw ValueError("decay interval must be at least 1");
  if (batch_size < 1) throw ValueError("batch size must be at least 1");
  if (max_iterations < 0) throw ValueError("iteration count cannot be negative");
  if (log_every < 1) throw ValueError("log interval must be at least 1");
}

double lr_schedule(const TrainConfig& cfg, long long iteration) {
  const long long steps = iteration / cfg.decay_interval;
  return cfg.learning_rate * std::pow(cfg.decay_factor, static_cast<double>(steps));
}

Adam::Adam(std::vector<NamedParam> params, const TrainConfig& cfg)
    : params_(std::move(params)), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.epsilon) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const NamedParam& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void Adam::zero_grad() {
  for (NamedParam& p : params_) p.tensor.zero_grad();
}

void Adam::step(double lr, long long iteration) {
  ++t_;
  for (size_t i = 0; i < params_.size(); ++i) {
    NamedParam& p = params_[i];
    const float* g = p.tensor.grad();
    if (!g) continue;
    try {
      adam_update(p.tensor.numel(), p.tensor.data(), g, m_[i].data(), v_[i].data(), t_,
                  static_cast<float>(lr), static_cast<float>(beta1_),
                  static_cast<float>(beta2_), static_cast<float>(eps_));
    } catch (const DivergenceError&) {
      throw DivergenceError(iteration, "non-finite gradient in '" + p.name +
                                           "' at iteration " + std::to_string(iteration));
    }
  }
}

std::vector<Beat> balance_classes(const std::vector<Beat>& beats, uint64_t seed,
                                  BalanceMode mode, int n_classes) {
  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(n_classes));
  for (size_t i = 0; i < beats.size(); ++i) {
    const Beat& b = beats[i];
    if (!b.label || *b.label < 0 || *b.label >= n_classes)
      throw ValueError("beat '" + b.id + "' has a missing or out-of-range label");
    by_class[static_cast<size_t>(*b.label)].push_back(i);
  }
  for (int c = 0; c < n_classes; ++c)
    if (by_class[static_cast<size_t>(c)].empty())
      throw ValueError(std::string("cannot balance: class ") + std::to_string(c) +
                       " has no beats");

  std::vector<Beat> out = beats;
  if (mode == BalanceMode::None) return out;

  size_t target = 0;
  for (const auto& v : by_class) target = std::max(target, v.size());

  Rng rng(seed);
  for (int c = 0; c < n_classes; ++c) {
    const std::vector<size_t>& pool = by_class[static_cast<size_t>(c)];
    const size_t need = target - pool.size();
    for (size_t j = 0; j < need; ++j) {
      Beat b = beats[pool[static_cast<size_t>(rng.below(pool.size()))]];
      if (mode == BalanceMode::Oversample) {
        const float scale = static_cast<float>(rng.uniform(0.9, 1.1));
        for (float& s : b.samples) s = std::clamp(s * scale, 0.0f, 1.0f);
      }
      b.id += "#dup" + std::to_string(j);
      out.push_back(std::move(b));
    }
  }
  return out;
}

namespace {

// Deterministic assembly: membership is decided per index, then beats keep
// their original order within each side.
DatasetSplit assemble_split(const std::vector<Beat>& beats, const std::vector<bool>& to_test,
                            int n_classes, std::string policy) {
  DatasetSplit split;
  for (size_t i = 0; i < beats.size(); ++i)
    (to_test[i] ? split.test : split.train).push_back(beats[i]);
  split.train_counts = count_classes(split.train, n_classes);
  split.test_counts = count_classes(split.test, n_classes);
  split.policy = std::move(policy);
  return split;
}

std::vector<std::vector<size_t>> group_by_class(const std::vector<Beat>& beats,
                                                int n_classes) {
  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(n_classes));
  for (size_t i = 0; i < beats.size(); ++i) {
    const Beat& b = beats[i];
    if (!b.label || *b.label < 0 || *b.label >= n_classes)
      throw ValueError("beat '" + b.id + "' has a missing or out-of-range label");
    by_class[static_cast<size_t>(*b.label)].push_back(i);
  }
  return by_class;
}

}  // namespace

DatasetSplit make_mitbih_split(const std::vector<Beat>& beats, uint64_t seed,
                               SplitPolicy policy, int quota, int reserve) {
  const int k = 5;
  const std::vector<std::vector<size_t>> by_class = group_by_class(beats, k);
  for (int c = 0; c < k; ++c)
    if (static_cast<int>(by_class[static_cast<size_t>(c)].size()) < reserve)
      throw ValueError(std::string("class ") + arrhythmia_class_names()[static_cast<size_t>(c)] +
                       " has only " + std::to_string(by_class[static_cast<size_t>(c)].size()) +
                       " beats; the test protocol needs at least " + std::to_string(reserve));

  std::vector<bool> to_test(beats.size(), false);
  Rng rng(seed);

  if (policy == SplitPolicy::IntraPatient) {
    for (int c = 0; c < k; ++c) {
      std::vector<size_t> pool = by_class[static_cast<size_t>(c)];
      rng.shuffle(pool);
      // Up to `quota` test beats, never dipping into the training reserve.
      const size_t take = std::min<size_t>(static_cast<size_t>(quota),
                                           pool.size() - static_cast<size_t>(reserve));
      for (size_t j = 0; j < take; ++j) to_test[pool[j]] = true;
    }
    return assemble_split(beats, to_test, k,
                          "intra-patient, per-class quota " + std::to_string(quota));
  }

  // Inter-patient: whole subjects move to the test side until every class
  // quota is covered (or no subject can be moved without draining a class
  // below its training reserve).
  std::map<std::string, std::vector<size_t>> by_subject;
  for (size_t i = 0; i < beats.size(); ++i) by_subject[beats[i].subject].push_back(i);
  std::vector<std::string> subjects;
  for (const auto& [s, _] : by_subject) subjects.push_back(s);
  rng.shuffle(subjects);

  std::vector<int64_t> total(static_cast<size_t>(k), 0);
  for (int c = 0; c < k; ++c) total[static_cast<size_t>(c)] =
      static_cast<int64_t>(by_class[static_cast<size_t>(c)].size());
  std::vector<int64_t> in_test(static_cast<size_t>(k), 0);

  for (const std::string& s : subjects) {
    bool wanted = false;
    std::vector<int64_t> adds(static_cast<size_t>(k), 0);
    for (size_t i : by_subject[s]) ++adds[static_cast<size_t>(*beats[i].label)];
    for (int c = 0; c < k; ++c)
      if (adds[static_cast<size_t>(c)] > 0 && in_test[static_cast<size_t>(c)] < quota)
        wanted = true;
    if (!wanted) continue;
    bool safe = true;
    for (int c = 0; c < k; ++c)
      if (total[static_cast<size_t>(c)] - in_test[static_cast<size_t>(c)] -
              adds[static_cast<size_t>(c)] <
          reserve)
        safe = false;
    if (!safe) continue;
    for (size_t i : by_subject[s]) to_test[i] = true;
    for (int c = 0; c < k; ++c) in_test[static_cast<size_t>(c)] += adds[static_cast<size_t>(c)];
    bool done = true;
    for (int c = 0; c < k; ++c)
      if (in_test[static_cast<size_t>(c)] < quota &&
          total[static_cast<size_t>(c)] - static_cast<int64_t>(reserve) >
              in_test[static_cast<size_t>(c)])
        done = false;
    if (done) break;
  }
  return assemble_split(beats, to_test, k,
                        "inter-patient, per-class quota " + std::to_string(quota));
}

DatasetSplit make_ptb_split(const std::vector<Beat>& beats, uint64_t seed,
                            SplitPolicy policy, double train_fraction) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ValueError("train fraction must lie strictly between 0 and 1");
  const int k = 2;
  const std::vector<std::vector<size_t>> by_class = group_by_class(beats, k);
  for (int c = 0; c < k; ++c)
    if (by_class[static_cast<size_t>(c)].empty())
      throw ValueError(std::string("class ") + mi_class_names()[static_cast<size_t>(c)] +
                       " has no beats; cannot stratify the split");

  std::vector<bool> to_test(beats.size(), false);
  Rng rng(seed);

  if (policy == SplitPolicy::IntraPatient) {
    for (int c = 0; c < k; ++c) {
      std::vector<size_t> pool = by_class[static_cast<size_t>(c)];
      rng.shuffle(pool);
      const auto take_train = static_cast<size_t>(
          std::llround(train_fraction * static_cast<double>(pool.size())));
      for (size_t j = take_train; j < pool.size(); ++j) to_test[pool[j]] = true;
    }
    return assemble_split(beats, to_test, k, "intra-patient, stratified 80/20");
  }

  // Inter-patient: stratify whole subjects by the class of their beats.
  std::map<std::string, std::vector<size_t>> by_subject;
  for (size_t i = 0; i < beats.size(); ++i) by_subject[beats[i].subject].push_back(i);
  std::vector<std::vector<std::string>> subjects_by_class(static_cast<size_t>(k));
  for (const auto& [s, members] : by_subject)
    subjects_by_class[static_cast<size_t>(*beats[members.front()].label)].push_back(s);
  for (int c = 0; c < k; ++c) {
    std::vector<std::string>& subs = subjects_by_class[static_cast<size_t>(c)];
    if (subs.empty())
      throw ValueError(std::string("class ") + mi_class_names()[static_cast<size_t>(c)] +
                       " has no subjects; cannot stratify the split");
    rng.shuffle(subs);
    const auto take_train = static_cast<size_t>(
        std::llround(train_fraction * static_cast<double>(subs.size())));
    for (size_t j = take_train; j < subs.size(); ++j)
      for (size_t i : by_subject[subs[j]]) to_test[i] = true;
  }
  return assemble_split(beats, to_test, k, "inter-patient, stratified 80/20 by subject");
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "iteration,lr,loss,accuracy\n";
  char buf[128];
  for (const HistoryRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", r.iteration, r.lr, r.loss,
                  r.accuracy);
    f << buf;
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

}  // namespace beatnet
