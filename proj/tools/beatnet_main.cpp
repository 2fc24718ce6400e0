#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "beatnet/dataset.hpp"
#include "beatnet/digest.hpp"
#include "beatnet/errors.hpp"
#include "beatnet/eval.hpp"
#include "beatnet/kernels.hpp"
#include "beatnet/model.hpp"
#include "beatnet/train.hpp"
#include "beatnet/version.hpp"

namespace {

using namespace beatnet;
namespace fs = std::filesystem;

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Everything a training-style run can tune. CLI flags override config-file
// keys, which override these defaults.
struct HyperOpts {
  TrainConfig cfg;
  int test_quota = 819;
  int train_reserve = 50;
  double train_fraction = 0.8;
  std::string balance = "oversample";
  std::string split_policy = "intra";
};

struct HyperFlags {
  CLI::Option* lr = nullptr;
  CLI::Option* decay_factor = nullptr;
  CLI::Option* decay_interval = nullptr;
  CLI::Option* beta1 = nullptr;
  CLI::Option* beta2 = nullptr;
  CLI::Option* epsilon = nullptr;
  CLI::Option* batch_size = nullptr;
  CLI::Option* iterations = nullptr;
  CLI::Option* log_every = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* balance = nullptr;
  CLI::Option* split_policy = nullptr;
  CLI::Option* test_quota = nullptr;
  CLI::Option* train_reserve = nullptr;
  CLI::Option* train_fraction = nullptr;
};

HyperFlags add_hyper_flags(CLI::App* cmd, HyperOpts& h) {
  HyperFlags f;
  f.lr = cmd->add_option("--lr", h.cfg.learning_rate, "initial Adam learning rate")
             ->capture_default_str();
  f.decay_factor =
      cmd->add_option("--decay-factor", h.cfg.decay_factor, "learning-rate decay factor")
          ->capture_default_str();
  f.decay_interval = cmd->add_option("--decay-interval", h.cfg.decay_interval,
                                     "iterations between decays")
                         ->capture_default_str();
  f.beta1 = cmd->add_option("--beta1", h.cfg.beta1, "Adam beta1")->capture_default_str();
  f.beta2 = cmd->add_option("--beta2", h.cfg.beta2, "Adam beta2")->capture_default_str();
  f.epsilon = cmd->add_option("--epsilon", h.cfg.epsilon, "Adam epsilon")
                  ->capture_default_str();
  f.batch_size = cmd->add_option("--batch-size", h.cfg.batch_size, "minibatch size")
                     ->capture_default_str();
  f.iterations =
      cmd->add_option("--iterations", h.cfg.max_iterations, "training iterations")
          ->capture_default_str();
  f.log_every = cmd->add_option("--log-every", h.cfg.log_every,
                                "iterations between history rows")
                    ->capture_default_str();
  f.seed = cmd->add_option("--seed", h.cfg.seed, "seed for init, shuffling and splits")
               ->capture_default_str();
  f.balance = cmd->add_option("--balance", h.balance,
                              "class balancing: oversample, duplicate or none")
                  ->capture_default_str();
  f.split_policy =
      cmd->add_option("--split-policy", h.split_policy, "dataset split: intra or inter")
          ->capture_default_str();
  f.test_quota = cmd->add_option("--test-quota", h.test_quota,
                                 "per-class test beats (arrhythmia protocol)")
                     ->capture_default_str();
  f.train_reserve = cmd->add_option("--train-reserve", h.train_reserve,
                                    "per-class beats kept for training (arrhythmia protocol)")
                        ->capture_default_str();
  f.train_fraction = cmd->add_option("--train-fraction", h.train_fraction,
                                     "train share of the stratified split (transfer)")
                         ->capture_default_str();
  return f;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    if constexpr (std::is_same_v<T, double>) return std::stod(value);
    else if constexpr (std::is_same_v<T, uint64_t>) return std::stoull(value);
    else return static_cast<T>(std::stoll(value));
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' has a bad value '" + value + "'");
  }
}

// Config-file keys fill in only what the command line did not set.
void apply_config_file(const std::string& path, const HyperFlags& f, HyperOpts& h) {
  const std::map<std::string, std::string> kv = read_config(path);
  for (const auto& [key, value] : kv) {
    if (key == "learning_rate") {
      if (!f.lr->count()) h.cfg.learning_rate = parse_number<double>(key, value);
    } else if (key == "decay_factor") {
      if (!f.decay_factor->count()) h.cfg.decay_factor = parse_number<double>(key, value);
    } else if (key == "decay_interval") {
      if (!f.decay_interval->count())
        h.cfg.decay_interval = parse_number<long long>(key, value);
    } else if (key == "beta1") {
      if (!f.beta1->count()) h.cfg.beta1 = parse_number<double>(key, value);
    } else if (key == "beta2") {
      if (!f.beta2->count()) h.cfg.beta2 = parse_number<double>(key, value);
    } else if (key == "epsilon") {
      if (!f.epsilon->count()) h.cfg.epsilon = parse_number<double>(key, value);
    } else if (key == "batch_size") {
      if (!f.batch_size->count()) h.cfg.batch_size = parse_number<int>(key, value);
    } else if (key == "iterations") {
      if (!f.iterations->count()) h.cfg.max_iterations = parse_number<long long>(key, value);
    } else if (key == "log_every") {
      if (!f.log_every->count()) h.cfg.log_every = parse_number<long long>(key, value);
    } else if (key == "seed") {
      if (!f.seed->count()) h.cfg.seed = parse_number<uint64_t>(key, value);
    } else if (key == "balance") {
      if (!f.balance->count()) h.balance = value;
    } else if (key == "split_policy") {
      if (!f.split_policy->count()) h.split_policy = value;
    } else if (key == "test_quota") {
      if (!f.test_quota->count()) h.test_quota = parse_number<int>(key, value);
    } else if (key == "train_reserve") {
      if (!f.train_reserve->count()) h.train_reserve = parse_number<int>(key, value);
    } else if (key == "train_fraction") {
      if (!f.train_fraction->count()) h.train_fraction = parse_number<double>(key, value);
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

void finish_hyper(HyperOpts& h) {
  h.cfg.balance = balance_mode_from_string(h.balance);
  h.cfg.split_policy = split_policy_from_string(h.split_policy);
  h.cfg.validate();
}

std::string counts_to_string(const std::vector<int64_t>& counts, Task task) {
  std::string s;
  for (size_t c = 0; c < counts.size(); ++c) {
    if (c) s += ",";
    s += class_name(task, static_cast<int>(c));
    s += ":";
    s += std::to_string(counts[c]);
  }
  return s;
}

void start_manifest(RunManifest& m, const char* command, uint64_t seed) {
  m.add("tool", std::string(kToolName) + " " + kVersion);
  m.add("command", command);
  m.add("seed", static_cast<int64_t>(seed));
  m.add("threads", kernels::thread_count());
}

void add_hyper_entries(RunManifest& m, const HyperOpts& h) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", h.cfg.learning_rate);
  m.add("learning_rate", buf);
  std::snprintf(buf, sizeof(buf), "%.9g", h.cfg.decay_factor);
  m.add("decay_factor", buf);
  m.add("decay_interval", h.cfg.decay_interval);
  std::snprintf(buf, sizeof(buf), "%.9g", h.cfg.beta1);
  m.add("beta1", buf);
  std::snprintf(buf, sizeof(buf), "%.9g", h.cfg.beta2);
  m.add("beta2", buf);
  std::snprintf(buf, sizeof(buf), "%.9g", h.cfg.epsilon);
  m.add("epsilon", buf);
  m.add("batch_size", h.cfg.batch_size);
  m.add("iterations", h.cfg.max_iterations);
  m.add("log_every", h.cfg.log_every);
  m.add("balance", to_string(h.cfg.balance));
  m.add("split_policy", to_string(h.cfg.split_policy));
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
}

// Runs the loop and echoes each history row as it completes.
template <class Model>
void run_training_loop(Trainer<Model>& trainer, long long iterations) {
  size_t printed = 0;
  char buf[160];
  for (long long i = 0; i < iterations; ++i) {
    trainer.step();
    while (printed < trainer.history().size()) {
      const HistoryRow& r = trainer.history()[printed++];
      std::snprintf(buf, sizeof(buf), "iter %lld  lr %.6g  loss %.6g  acc %.4f",
                    r.iteration, r.lr, r.loss, r.accuracy);
      std::cout << buf << std::endl;
    }
  }
}

int run_ingest(const std::string& records_dir, const std::string& out) {
  WallTimer total;
  const auto records = find_records(records_dir);
  if (records.empty())
    throw ValueError("no .hea records found under '" + records_dir + "'");

  IngestReport rep;
  const std::vector<Beat> beats = ingest_records(records, &rep);
  ensure_out_dir(out);
  const std::string csv = (fs::path(out) / "beats.csv").string();
  write_beats_csv(csv, beats);

  RunManifest m;
  start_manifest(m, "ingest", 0);
  m.add("records_dir", records_dir);
  m.add("records_found", static_cast<int64_t>(records.size()));
  m.add("records_used", rep.records_used);
  m.add("records_skipped", static_cast<int64_t>(rep.skipped.size()));
  for (size_t i = 0; i < rep.skipped.size(); ++i)
    m.add("skipped." + std::to_string(i), rep.skipped[i]);
  m.add("task", rep.task == Task::Arrhythmia ? "arrhythmia" : "mi");
  m.add("windows", rep.stats.windows);
  m.add("windows_constant", rep.stats.windows_constant);
  m.add("windows_few_peaks", rep.stats.windows_few_peaks);
  m.add("beats_extracted", rep.stats.beats);
  m.add("beats_unlabeled", rep.stats.beats_unlabeled);
  m.add("beats_unmapped", rep.stats.beats_unmapped);
  m.add("beats_written", static_cast<int64_t>(beats.size()));
  m.add("class_counts", counts_to_string(rep.class_counts, rep.task));
  m.add_file("output.beats", csv);
  m.add("wall_ms.total", total.ms());
  m.add("status", "ok");
  m.write((fs::path(out) / "ingest_manifest.txt").string());

  std::cout << "ingested " << rep.records_used << "/" << records.size() << " records, "
            << beats.size() << " labeled beats (" << counts_to_string(rep.class_counts, rep.task)
            << ")\n";
  for (const std::string& s : rep.skipped) std::cout << "skipped " << s << "\n";
  std::cout << "wrote " << csv << "\n";
  return 0;
}

int run_train(const std::string& data, const std::string& out, const HyperOpts& h) {
  WallTimer total;
  const BeatDataset ds = read_beats_csv(data, Task::Arrhythmia);
  std::cout << "loaded " << ds.beats.size() << " beats ("
            << counts_to_string(ds.class_counts, Task::Arrhythmia) << ")\n";

  const DatasetSplit split = make_mitbih_split(ds.beats, h.cfg.seed, h.cfg.split_policy,
                                               h.test_quota, h.train_reserve);
  std::cout << "split " << split.policy << ": train "
            << counts_to_string(split.train_counts, Task::Arrhythmia) << ", test "
            << counts_to_string(split.test_counts, Task::Arrhythmia) << "\n";

  const std::vector<Beat> train_set =
      balance_classes(split.train, h.cfg.seed, h.cfg.balance, 5);
  std::cout << "training on " << train_set.size() << " beats after "
            << to_string(h.cfg.balance) << " balancing\n";

  ArrhythmiaNet net;
  net.init_params(h.cfg.seed);

  WallTimer train_timer;
  Trainer<ArrhythmiaNet> trainer(net, train_set, h.cfg);
  run_training_loop(trainer, h.cfg.max_iterations);
  const int64_t train_ms = train_timer.ms();

  ensure_out_dir(out);
  const std::string ckpt = (fs::path(out) / "model.ckpt").string();
  save_checkpoint(ckpt, net, {static_cast<uint64_t>(trainer.iteration()), h.cfg.seed});
  const std::string hist = (fs::path(out) / "history.csv").string();
  write_history_csv(hist, trainer.history());

  WallTimer eval_timer;
  const EvalReport report = evaluate(net, split.test);
  const std::string report_txt = (fs::path(out) / "report.txt").string();
  const std::string report_csv = (fs::path(out) / "report.csv").string();
  write_report_files(report, Task::Arrhythmia, report_txt, report_csv);

  char buf[96];
  std::snprintf(buf, sizeof(buf), "test accuracy %.4f over %lld beats", report.accuracy(),
                static_cast<long long>(report.n));
  std::cout << buf << "\n";

  RunManifest m;
  start_manifest(m, "train", h.cfg.seed);
  add_hyper_entries(m, h);
  m.add("test_quota", h.test_quota);
  m.add("train_reserve", h.train_reserve);
  m.add("split", split.policy);
  m.add("train_counts", counts_to_string(split.train_counts, Task::Arrhythmia));
  m.add("test_counts", counts_to_string(split.test_counts, Task::Arrhythmia));
  m.add("train_beats_after_balance", static_cast<int64_t>(train_set.size()));
  m.add("iterations_run", trainer.iteration());
  m.add("param_hash", hex64(net.param_hash()));
  std::snprintf(buf, sizeof(buf), "%.9g", report.accuracy());
  m.add("test_accuracy", buf);
  m.add_file("input.beats", data);
  m.add_file("output.checkpoint", ckpt);
  m.add_file("output.history", hist);
  m.add_file("output.report_text", report_txt);
  m.add_file("output.report_csv", report_csv);
  m.add("wall_ms.train", train_ms);
  m.add("wall_ms.eval", eval_timer.ms());
  m.add("wall_ms.total", total.ms());
  m.add("status", "ok");
  m.write((fs::path(out) / "train_manifest.txt").string());
  return 0;
}

int run_transfer(const std::string& backbone_path, const std::string& data,
                 const std::string& out, const HyperOpts& h) {
  WallTimer total;
  CheckpointMeta backbone_meta;
  ArrhythmiaNet backbone = load_backbone(backbone_path, &backbone_meta);
  MiNet net(std::move(backbone));
  net.init_head(h.cfg.seed);
  const uint64_t frozen_hash = net.backbone_hash();

  const BeatDataset ds = read_beats_csv(data, Task::Mi);
  std::cout << "loaded " << ds.beats.size() << " beats ("
            << counts_to_string(ds.class_counts, Task::Mi) << ")\n";

  const DatasetSplit split =
      make_ptb_split(ds.beats, h.cfg.seed, h.cfg.split_policy, h.train_fraction);
  std::cout << "split " << split.policy << ": train "
            << counts_to_string(split.train_counts, Task::Mi) << ", test "
            << counts_to_string(split.test_counts, Task::Mi) << "\n";

  const std::vector<Beat> train_set =
      balance_classes(split.train, h.cfg.seed, h.cfg.balance, 2);
  std::cout << "training head on " << train_set.size() << " beats after "
            << to_string(h.cfg.balance) << " balancing\n";

  WallTimer train_timer;
  Trainer<MiNet> trainer(net, train_set, h.cfg);
  run_training_loop(trainer, h.cfg.max_iterations);
  const int64_t train_ms = train_timer.ms();

  if (net.backbone_hash() != frozen_hash)
    throw Error("frozen backbone changed during transfer training");

  ensure_out_dir(out);
  const std::string ckpt = (fs::path(out) / "mi_model.ckpt").string();
  save_checkpoint(ckpt, net, {static_cast<uint64_t>(trainer.iteration()), h.cfg.seed});
  const std::string hist = (fs::path(out) / "history.csv").string();
  write_history_csv(hist, trainer.history());

  const EvalReport report = evaluate(net, split.test);
  const std::string report_txt = (fs::path(out) / "report.txt").string();
  const std::string report_csv = (fs::path(out) / "report.csv").string();
  write_report_files(report, Task::Mi, report_txt, report_csv);

  const MiMetrics mm = report_mi_metrics(report);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "test accuracy %.4f, MI precision %.4f, MI recall %.4f",
                mm.accuracy, mm.precision, mm.recall);
  std::cout << buf << "\n";

  RunManifest m;
  start_manifest(m, "transfer", h.cfg.seed);
  add_hyper_entries(m, h);
  std::snprintf(buf, sizeof(buf), "%.9g", h.train_fraction);
  m.add("train_fraction", buf);
  m.add("split", split.policy);
  m.add("train_counts", counts_to_string(split.train_counts, Task::Mi));
  m.add("test_counts", counts_to_string(split.test_counts, Task::Mi));
  m.add("train_beats_after_balance", static_cast<int64_t>(train_set.size()));
  m.add("iterations_run", trainer.iteration());
  m.add("backbone_hash", hex64(frozen_hash));
  m.add("backbone_hash_after", hex64(net.backbone_hash()));
  m.add("head_hash", hex64(net.head_hash()));
  std::snprintf(buf, sizeof(buf), "%.9g", mm.accuracy);
  m.add("test_accuracy", buf);
  std::snprintf(buf, sizeof(buf), "%.9g", mm.precision);
  m.add("mi_precision", buf);
  std::snprintf(buf, sizeof(buf), "%.9g", mm.recall);
  m.add("mi_recall", buf);
  m.add_file("input.backbone", backbone_path);
  m.add_file("input.beats", data);
  m.add_file("output.checkpoint", ckpt);
  m.add_file("output.history", hist);
  m.add_file("output.report_text", report_txt);
  m.add_file("output.report_csv", report_csv);
  m.add("wall_ms.train", train_ms);
  m.add("wall_ms.total", total.ms());
  m.add("status", "ok");
  m.write((fs::path(out) / "transfer_manifest.txt").string());
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& out) {
  WallTimer total;
  const ModelKind kind = peek_checkpoint_kind(ckpt);
  EvalReport report;
  Task task;
  CheckpointMeta meta;
  if (kind == ModelKind::Arrhythmia) {
    task = Task::Arrhythmia;
    const ArrhythmiaNet net = load_arrhythmia(ckpt, &meta);
    report = evaluate(net, read_beats_csv(data, task).beats);
  } else {
    task = Task::Mi;
    const MiNet net = load_mi(ckpt, &meta);
    report = evaluate(net, read_beats_csv(data, task).beats);
  }

  ensure_out_dir(out);
  const std::string report_txt = (fs::path(out) / "report.txt").string();
  const std::string report_csv = (fs::path(out) / "report.csv").string();
  write_report_files(report, task, report_txt, report_csv);
  write_report_text(report, task, std::cout);

  RunManifest m;
  start_manifest(m, "eval", meta.seed);
  m.add("model_kind", kind == ModelKind::Arrhythmia ? "arrhythmia" : "mi-transfer");
  m.add("checkpoint_iterations", static_cast<int64_t>(meta.iterations));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", report.accuracy());
  m.add("accuracy", buf);
  m.add("samples", report.n);
  m.add_file("input.checkpoint", ckpt);
  m.add_file("input.beats", data);
  m.add_file("output.report_text", report_txt);
  m.add_file("output.report_csv", report_csv);
  m.add("wall_ms.total", total.ms());
  m.add("status", "ok");
  m.write((fs::path(out) / "eval_manifest.txt").string());
  return 0;
}

int run_embed(const std::string& ckpt, const std::string& data, const std::string& out) {
  WallTimer total;
  const ModelKind kind = peek_checkpoint_kind(ckpt);
  const Task task = kind == ModelKind::Arrhythmia ? Task::Arrhythmia : Task::Mi;
  CheckpointMeta meta;
  const ArrhythmiaNet net = load_backbone(ckpt, &meta);
  const BeatDataset ds = read_beats_csv(data, task);

  ensure_out_dir(out);
  const std::string emb = (fs::path(out) / "embeddings.csv").string();
  export_embeddings(net, ds.beats, emb);
  std::cout << "wrote " << ds.beats.size() << " embeddings of width " << net.embedding_dim()
            << " to " << emb << "\n";

  RunManifest m;
  start_manifest(m, "embed", meta.seed);
  m.add("model_kind", kind == ModelKind::Arrhythmia ? "arrhythmia" : "mi-transfer");
  m.add("embedding_dim", net.embedding_dim());
  m.add("beats", static_cast<int64_t>(ds.beats.size()));
  m.add_file("input.checkpoint", ckpt);
  m.add_file("input.beats", data);
  m.add_file("output.embeddings", emb);
  m.add("wall_ms.total", total.ms());
  m.add("status", "ok");
  m.write((fs::path(out) / "embed_manifest.txt").string());
  return 0;
}

int run_info(const std::string& ckpt) {
  const ModelKind kind = peek_checkpoint_kind(ckpt);
  CheckpointMeta meta;
  std::cout << "checkpoint: " << ckpt << "\n";
  if (kind == ModelKind::Arrhythmia) {
    const ArrhythmiaNet net = load_arrhythmia(ckpt, &meta);
    const NetConfig& c = net.config();
    std::cout << "kind: arrhythmia classifier (" << c.n_classes << " classes)\n"
              << "input length: " << c.input_length << "\n"
              << "channels: " << c.channels << ", kernel: " << c.kernel << ", blocks: "
              << c.residual_blocks << "\n"
              << "weight layers: " << net.weight_layer_count() << "\n"
              << "embedding dim: " << net.embedding_dim() << "\n"
              << "parameters: " << net.parameter_count() << "\n"
              << "param hash: " << hex64(net.param_hash()) << "\n";
  } else {
    const MiNet net = load_mi(ckpt, &meta);
    size_t head_params = 0;
    for (const NamedParam& p : net.head_params()) head_params += p.tensor.numel();
    std::cout << "kind: MI transfer model (2 classes)\n"
              << "backbone parameters: " << net.backbone().parameter_count() << " (frozen)\n"
              << "head parameters: " << head_params << "\n"
              << "embedding dim: " << net.embedding_dim() << "\n"
              << "backbone hash: " << hex64(net.backbone_hash()) << "\n"
              << "head hash: " << hex64(net.head_hash()) << "\n";
  }
  std::cout << "trained iterations: " << meta.iterations << "\n"
            << "seed: " << meta.seed << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG heartbeat classification: WFDB ingest, residual conv training, "
               "MI transfer, evaluation"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap OpenMP worker threads (0 = library default)")
      ->capture_default_str();
  bool serial = false;
  app.add_flag("--serial", serial, "run every kernel single-threaded");

  std::string records_dir, out_dir, data_path, ckpt_path, backbone_path, config_path;

  CLI::App* ingest = app.add_subcommand("ingest", "parse WFDB records into a beat CSV");
  ingest->add_option("--records", records_dir, "directory searched recursively for .hea files")
      ->required();
  ingest->add_option("--out", out_dir, "output directory")->required();

  HyperOpts train_h;
  CLI::App* train = app.add_subcommand("train", "train the arrhythmia classifier");
  train->add_option("--data", data_path, "beat CSV from ingest")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--config", config_path, "key = value config file");
  const HyperFlags train_f = add_hyper_flags(train, train_h);

  HyperOpts transfer_h;
  CLI::App* transfer =
      app.add_subcommand("transfer", "train the MI head on a frozen backbone");
  transfer->add_option("--backbone", backbone_path, "checkpoint holding the conv stack")
      ->required();
  transfer->add_option("--data", data_path, "beat CSV from ingest")->required();
  transfer->add_option("--out", out_dir, "output directory")->required();
  transfer->add_option("--config", config_path, "key = value config file");
  const HyperFlags transfer_f = add_hyper_flags(transfer, transfer_h);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a beat CSV");
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "beat CSV")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* embed = app.add_subcommand("embed", "export conv-stack embeddings for a beat CSV");
  embed->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  embed->add_option("--data", data_path, "beat CSV")->required();
  embed->add_option("--out", out_dir, "output directory")->required();

  CLI::App* info = app.add_subcommand("info", "describe a checkpoint");
  info->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (serial) beatnet::kernels::set_parallel_enabled(false);
  if (threads > 0) beatnet::kernels::set_thread_count(threads);

  try {
    if (app.got_subcommand(ingest)) return run_ingest(records_dir, out_dir);
    if (app.got_subcommand(train)) {
      if (!config_path.empty()) apply_config_file(config_path, train_f, train_h);
      finish_hyper(train_h);
      return run_train(data_path, out_dir, train_h);
    }
    if (app.got_subcommand(transfer)) {
      if (!config_path.empty()) apply_config_file(config_path, transfer_f, transfer_h);
      finish_hyper(transfer_h);
      return run_transfer(backbone_path, data_path, out_dir, transfer_h);
    }
    if (app.got_subcommand(eval_cmd)) return run_eval(ckpt_path, data_path, out_dir);
    if (app.got_subcommand(embed)) return run_embed(ckpt_path, data_path, out_dir);
    if (app.got_subcommand(info)) return run_info(ckpt_path);
  } catch (const beatnet::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const beatnet::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 1;
  } catch (const beatnet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
