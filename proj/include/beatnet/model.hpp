#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "beatnet/autodiff.hpp"

// The beat classifier: a 1-D residual conv stack shared by both tasks, a
// three-layer FC head for the five arrhythmia classes, and a detachable
// two-class head trained on top of the frozen stack for MI detection.

namespace beatnet {

using TensorF = autodiff::Tensor<float>;
using TapeF = autodiff::Tape<float>;

struct NetConfig {
  int input_length = 187;
  int channels = 32;      // conv width everywhere in the stack
  int kernel = 5;
  int residual_blocks = 5;
  int pool_size = 5;
  int pool_stride = 2;
  int fc_width = 32;
  int n_classes = 5;

  // Temporal length after each residual block; throws ValueError if any
  // stage gets shorter than the pool window.
  std::vector<int> stage_lengths() const;
  int embedding_dim() const;  // channels * final stage length
  uint64_t fingerprint() const;

  bool operator==(const NetConfig&) const = default;
};

struct NamedParam {
  std::string name;
  TensorF tensor;
};

class ArrhythmiaNet {
 public:
  explicit ArrhythmiaNet(const NetConfig& cfg = {});

  // Glorot-uniform weights, zero biases, in registry order from one stream.
  void init_params(uint64_t seed);

  const NetConfig& config() const { return cfg_; }

  // Conv stem and FC layers with weights; the class head does not count.
  int weight_layer_count() const;
  size_t parameter_count() const;

  std::vector<NamedParam>& params() { return registry_; }
  const std::vector<NamedParam>& params() const { return registry_; }
  std::vector<NamedParam> trainable_params() const;

  // [n, 1, len] or [1, len] input, normalized beats. Records on the tape
  // when one is given and something requires gradients.
  TensorF logits(TapeF* tape, const TensorF& x) const;

  // The flattened conv-stack output the MI head trains on.
  TensorF embed_tensor(TapeF* tape, const TensorF& x) const;

  int n_classes() const { return cfg_.n_classes; }
  int embedding_dim() const { return cfg_.embedding_dim(); }

  // Softmax probabilities, one row per beat. beats is n * input_length.
  void predict_batch(const float* beats, int n, float* probs) const;
  std::vector<float> predict(const float* beat) const;

  void embed_batch(const float* beats, int n, float* embeddings) const;

  // FNV-1a over all parameter bytes in registry order.
  uint64_t param_hash() const;

  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

 private:
  void build();

  NetConfig cfg_;
  TensorF stem_w_, stem_b_;
  struct Block {
    TensorF c1w, c1b, c2w, c2b;
  };
  std::vector<Block> blocks_;
  TensorF fc1_w_, fc1_b_, fc2_w_, fc2_b_, head_w_, head_b_;
  std::vector<NamedParam> registry_;
  bool frozen_ = false;
};

// Two-class head over a frozen ArrhythmiaNet conv stack. Only the head's six
// tensors train; gradients never reach the backbone.
class MiNet {
 public:
  explicit MiNet(ArrhythmiaNet backbone);

  void init_head(uint64_t seed);

  const ArrhythmiaNet& backbone() const { return backbone_; }
  const NetConfig& config() const { return backbone_.config(); }

  std::vector<NamedParam>& head_params() { return registry_; }
  const std::vector<NamedParam>& head_params() const { return registry_; }
  std::vector<NamedParam> trainable_params() const { return registry_; }

  TensorF logits(TapeF* tape, const TensorF& x) const;

  static constexpr int kClasses = 2;
  int n_classes() const { return kClasses; }
  int embedding_dim() const { return backbone_.embedding_dim(); }

  void predict_batch(const float* beats, int n, float* probs) const;
  void embed_batch(const float* beats, int n, float* e) const {
    backbone_.embed_batch(beats, n, e);
  }

  uint64_t backbone_hash() const { return backbone_.param_hash(); }
  uint64_t head_hash() const;

 private:
  ArrhythmiaNet backbone_;
  TensorF fc1_w_, fc1_b_, fc2_w_, fc2_b_, out_w_, out_b_;
  std::vector<NamedParam> registry_;
};

// In-place stable softmax over one row.
void softmax_row(float* row, int k);

// Checkpoint container: magic, version, model kind, architecture fields and
// fingerprint, iteration/seed metadata, named tensors, trailing CRC-32.
// Distinct failures throw CheckpointError with the matching kind.
struct CheckpointMeta {
  uint64_t iterations = 0;
  uint64_t seed = 0;
};

enum class ModelKind : uint32_t { Arrhythmia = 0, MiTransfer = 1 };

void save_checkpoint(const std::string& path, const ArrhythmiaNet& net,
                     const CheckpointMeta& meta);
void save_checkpoint(const std::string& path, const MiNet& net, const CheckpointMeta& meta);

ModelKind peek_checkpoint_kind(const std::string& path);

// expected, when given, must match the stored architecture exactly or the
// load is rejected with Kind::FingerprintMismatch.
ArrhythmiaNet load_arrhythmia(const std::string& path, CheckpointMeta* meta = nullptr,
                              const std::optional<NetConfig>& expected = std::nullopt);
MiNet load_mi(const std::string& path, CheckpointMeta* meta = nullptr,
              const std::optional<NetConfig>& expected = std::nullopt);

// The conv stack from either checkpoint kind, ready to freeze under a new
// MI head.
ArrhythmiaNet load_backbone(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace beatnet
