#include "beatnet/model.hpp"

#include <cmath>
#include <cstring>

#include "beatnet/digest.hpp"
#include "beatnet/errors.hpp"
#include "beatnet/rng.hpp"

namespace beatnet {

std::vector<int> NetConfig::stage_lengths() const {
  if (input_length < 1 || channels < 1 || kernel < 1 || residual_blocks < 0 ||
      pool_size < 1 || pool_stride < 1 || fc_width < 1 || n_classes < 2)
    throw ValueError("network config has a non-positive dimension");
  std::vector<int> lengths;
  int len = input_length;
  for (int b = 0; b < residual_blocks; ++b) {
    if (len < pool_size)
      throw ValueError("stage " + std::to_string(b + 1) + " input length " +
                       std::to_string(len) + " is shorter than the pool window " +
                       std::to_string(pool_size));
    len = (len - pool_size) / pool_stride + 1;
    lengths.push_back(len);
  }
  return lengths;
}

int NetConfig::embedding_dim() const {
  const std::vector<int> lengths = stage_lengths();
  return channels * (lengths.empty() ? input_length : lengths.back());
}

uint64_t NetConfig::fingerprint() const {
  const int32_t fields[8] = {input_length, channels,  kernel,   residual_blocks,
                             pool_size,    pool_stride, fc_width, n_classes};
  return fnv1a64(fields, sizeof(fields));
}

namespace {

void glorot_fill(Rng& rng, TensorF& w, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (float& v : w.values()) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

ArrhythmiaNet::ArrhythmiaNet(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.stage_lengths();  // validates the geometry up front
  build();
}

void ArrhythmiaNet::build() {
  const int c = cfg_.channels, k = cfg_.kernel, fw = cfg_.fc_width;
  stem_w_ = TensorF({c, 1, k}, true);
  stem_b_ = TensorF({c}, true);
  registry_.push_back({"stem.w", stem_w_});
  registry_.push_back({"stem.b", stem_b_});
  blocks_.resize(static_cast<size_t>(cfg_.residual_blocks));
  for (int bi = 0; bi < cfg_.residual_blocks; ++bi) {
    Block& blk = blocks_[static_cast<size_t>(bi)];
    blk.c1w = TensorF({c, c, k}, true);
    blk.c1b = TensorF({c}, true);
    blk.c2w = TensorF({c, c, k}, true);
    blk.c2b = TensorF({c}, true);
    const std::string p = "block" + std::to_string(bi + 1) + ".";
    registry_.push_back({p + "conv1.w", blk.c1w});
    registry_.push_back({p + "conv1.b", blk.c1b});
    registry_.push_back({p + "conv2.w", blk.c2w});
    registry_.push_back({p + "conv2.b", blk.c2b});
  }
  const int emb = cfg_.embedding_dim();
  fc1_w_ = TensorF({fw, emb}, true);
  fc1_b_ = TensorF({fw}, true);
  fc2_w_ = TensorF({fw, fw}, true);
  fc2_b_ = TensorF({fw}, true);
  head_w_ = TensorF({cfg_.n_classes, fw}, true);
  head_b_ = TensorF({cfg_.n_classes}, true);
  registry_.push_back({"fc1.w", fc1_w_});
  registry_.push_back({"fc1.b", fc1_b_});
  registry_.push_back({"fc2.w", fc2_w_});
  registry_.push_back({"fc2.b", fc2_b_});
  registry_.push_back({"head.w", head_w_});
  registry_.push_back({"head.b", head_b_});
}

void ArrhythmiaNet::init_params(uint64_t seed) {
  Rng rng(seed);
  for (NamedParam& p : registry_) {
    if (p.name.ends_with(".w")) {
      int fan_in, fan_out;
      if (p.tensor.rank() == 3) {
        fan_out = p.tensor.dim(0) * p.tensor.dim(2);
        fan_in = p.tensor.dim(1) * p.tensor.dim(2);
      } else {
        fan_out = p.tensor.dim(0);
        fan_in = p.tensor.dim(1);
      }
      glorot_fill(rng, p.tensor, fan_in, fan_out);
    } else {
      std::fill(p.tensor.values().begin(), p.tensor.values().end(), 0.0f);
    }
  }
}

int ArrhythmiaNet::weight_layer_count() const { return 1 + 2 * cfg_.residual_blocks + 2; }

size_t ArrhythmiaNet::parameter_count() const {
  size_t n = 0;
  for (const NamedParam& p : registry_) n += p.tensor.numel();
  return n;
}

std::vector<NamedParam> ArrhythmiaNet::trainable_params() const {
  std::vector<NamedParam> out;
  for (const NamedParam& p : registry_)
    if (p.tensor.requires_grad()) out.push_back(p);
  return out;
}

TensorF ArrhythmiaNet::embed_tensor(TapeF* tape, const TensorF& x) const {
  using namespace autodiff;
  const bool batched = x.rank() == 3;
  if (!batched && x.rank() != 2)
    throw ShapeError("net input must be [batch, 1, len] or [1, len], got " + shape_str(x));
  const int len = batched ? x.dim(2) : x.dim(1);
  if (len != cfg_.input_length)
    throw ShapeError("net input length " + std::to_string(len) + " does not match " +
                     std::to_string(cfg_.input_length));

  TensorF h = conv1d_same(tape, x, stem_w_, stem_b_);
  for (const Block& blk : blocks_) {
    TensorF skip = h;
    h = relu(tape, conv1d_same(tape, h, blk.c1w, blk.c1b));
    h = conv1d_same(tape, h, blk.c2w, blk.c2b);
    h = residual_add(tape, h, skip);
    h = relu(tape, h);
    h = maxpool1d(tape, h, cfg_.pool_size, cfg_.pool_stride);
  }
  const int flat = cfg_.embedding_dim();
  return reshape(tape, h,
                 batched ? std::vector<int>{x.dim(0), flat} : std::vector<int>{flat});
}

TensorF ArrhythmiaNet::logits(TapeF* tape, const TensorF& x) const {
  using namespace autodiff;
  TensorF h = embed_tensor(tape, x);
  h = relu(tape, fully_connected(tape, h, fc1_w_, fc1_b_));
  h = relu(tape, fully_connected(tape, h, fc2_w_, fc2_b_));
  return fully_connected(tape, h, head_w_, head_b_);
}

void softmax_row(float* row, int k) {
  float m = row[0];
  for (int i = 1; i < k; ++i) m = std::max(m, row[i]);
  float z = 0.0f;
  for (int i = 0; i < k; ++i) {
    row[i] = std::exp(row[i] - m);
    z += row[i];
  }
  for (int i = 0; i < k; ++i) row[i] /= z;
}

namespace {

constexpr int kInferenceChunk = 256;

TensorF batch_tensor(const float* beats, int n, int len) {
  TensorF x({n, 1, len});
  std::memcpy(x.data(), beats, static_cast<size_t>(n) * len * sizeof(float));
  return x;
}

}  // namespace

void ArrhythmiaNet::predict_batch(const float* beats, int n, float* probs) const {
  const int len = cfg_.input_length;
  for (int at = 0; at < n; at += kInferenceChunk) {
    const int m = std::min(kInferenceChunk, n - at);
    const TensorF lg = logits(nullptr, batch_tensor(beats + static_cast<size_t>(at) * len, m, len));
    for (int i = 0; i < m; ++i) {
      float* row = probs + static_cast<size_t>(at + i) * cfg_.n_classes;
      std::memcpy(row, lg.data() + static_cast<size_t>(i) * cfg_.n_classes,
                  static_cast<size_t>(cfg_.n_classes) * sizeof(float));
      softmax_row(row, cfg_.n_classes);
    }
  }
}

std::vector<float> ArrhythmiaNet::predict(const float* beat) const {
  std::vector<float> probs(static_cast<size_t>(cfg_.n_classes));
  predict_batch(beat, 1, probs.data());
  return probs;
}

void ArrhythmiaNet::embed_batch(const float* beats, int n, float* embeddings) const {
  const int len = cfg_.input_length;
  const int emb = cfg_.embedding_dim();
  for (int at = 0; at < n; at += kInferenceChunk) {
    const int m = std::min(kInferenceChunk, n - at);
    const TensorF e =
        embed_tensor(nullptr, batch_tensor(beats + static_cast<size_t>(at) * len, m, len));
    std::memcpy(embeddings + static_cast<size_t>(at) * emb, e.data(),
                static_cast<size_t>(m) * emb * sizeof(float));
  }
}

uint64_t ArrhythmiaNet::param_hash() const {
  Fnv64 h;
  for (const NamedParam& p : registry_)
    h.update(p.tensor.data(), p.tensor.numel() * sizeof(float));
  return h.value();
}

void ArrhythmiaNet::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (NamedParam& p : registry_) p.tensor.set_requires_grad(!frozen);
}

MiNet::MiNet(ArrhythmiaNet backbone) : backbone_(std::move(backbone)) {
  backbone_.set_frozen(true);
  const int emb = backbone_.embedding_dim();
  const int fw = backbone_.config().fc_width;
  fc1_w_ = TensorF({fw, emb}, true);
  fc1_b_ = TensorF({fw}, true);
  fc2_w_ = TensorF({fw, fw}, true);
  fc2_b_ = TensorF({fw}, true);
  out_w_ = TensorF({kClasses, fw}, true);
  out_b_ = TensorF({kClasses}, true);
  registry_.push_back({"mi.fc1.w", fc1_w_});
  registry_.push_back({"mi.fc1.b", fc1_b_});
  registry_.push_back({"mi.fc2.w", fc2_w_});
  registry_.push_back({"mi.fc2.b", fc2_b_});
  registry_.push_back({"mi.out.w", out_w_});
  registry_.push_back({"mi.out.b", out_b_});
}

void MiNet::init_head(uint64_t seed) {
  Rng rng(seed);
  for (NamedParam& p : registry_) {
    if (p.name.ends_with(".w")) {
      glorot_fill(rng, p.tensor, p.tensor.dim(1), p.tensor.dim(0));
    } else {
      std::fill(p.tensor.values().begin(), p.tensor.values().end(), 0.0f);
    }
  }
}

TensorF MiNet::logits(TapeF* tape, const TensorF& x) const {
  using namespace autodiff;
  // The backbone is frozen, so nothing below the head records on the tape.
  TensorF h = backbone_.embed_tensor(tape, x);
  h = relu(tape, fully_connected(tape, h, fc1_w_, fc1_b_));
  h = relu(tape, fully_connected(tape, h, fc2_w_, fc2_b_));
  return fully_connected(tape, h, out_w_, out_b_);
}

void MiNet::predict_batch(const float* beats, int n, float* probs) const {
  const int len = config().input_length;
  for (int at = 0; at < n; at += kInferenceChunk) {
    const int m = std::min(kInferenceChunk, n - at);
    const TensorF lg = logits(nullptr, batch_tensor(beats + static_cast<size_t>(at) * len, m, len));
    for (int i = 0; i < m; ++i) {
      float* row = probs + static_cast<size_t>(at + i) * kClasses;
      std::memcpy(row, lg.data() + static_cast<size_t>(i) * kClasses,
                  static_cast<size_t>(kClasses) * sizeof(float));
      softmax_row(row, kClasses);
    }
  }
}

uint64_t MiNet::head_hash() const {
  Fnv64 h;
  for (const NamedParam& p : registry_)
    h.update(p.tensor.data(), p.tensor.numel() * sizeof(float));
  return h.value();
}

}  // namespace beatnet
