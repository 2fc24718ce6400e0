#include "beatnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "beatnet/digest.hpp"
#include "beatnet/errors.hpp"

namespace beatnet {

void write_beats_csv(const std::string& path, const std::vector<Beat>& beats) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  char num[40];
  std::string line;
  for (const Beat& b : beats) {
    if (!b.label)
      throw ValueError("beat '" + b.id + "' has no label; only labeled beats are written");
    line.clear();
    line += b.id;
    for (float s : b.samples) {
      std::snprintf(num, sizeof(num), ",%.9g", static_cast<double>(s));
      line += num;
    }
    std::snprintf(num, sizeof(num), ",%d\n", *b.label);
    line += num;
    f << line;
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

namespace {

float parse_float_field(const char* a, const char* b, const std::string& path, size_t line_no) {
  float v = 0.0f;
  auto [p, ec] = std::from_chars(a, b, v);
  if (ec != std::errc() || p != b)
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad float '" +
                     std::string(a, b) + "'");
  return v;
}

}  // namespace

BeatDataset read_beats_csv(const std::string& path, Task task) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  BeatDataset ds;
  ds.task = task;
  const int k = n_classes(task);

  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;

    std::vector<std::pair<size_t, size_t>> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.emplace_back(start, i - start);
        start = i + 1;
      }
    }
    const size_t nf = fields.size();
    if (nf != kBeatLength + 1 && nf != kBeatLength + 2)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(kBeatLength + 1) + " or " +
                       std::to_string(kBeatLength + 2) + " fields, got " +
                       std::to_string(nf));
    const size_t first_sample = nf == kBeatLength + 2 ? 1 : 0;

    Beat b;
    if (first_sample == 1)
      b.id = line.substr(fields[0].first, fields[0].second);
    else
      b.id = "row" + std::to_string(line_no);
    for (int i = 0; i < kBeatLength; ++i) {
      const auto [at, len] = fields[first_sample + static_cast<size_t>(i)];
      b.samples[static_cast<size_t>(i)] =
          parse_float_field(line.data() + at, line.data() + at + len, path, line_no);
    }
    const auto [lat, llen] = fields.back();
    int label = 0;
    auto [p, ec] = std::from_chars(line.data() + lat, line.data() + lat + llen, label);
    if (ec != std::errc() || p != line.data() + lat + llen)
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad label '" +
                       line.substr(lat, llen) + "'");
    if (label < 0 || label >= k)
      throw ValueError(path + ":" + std::to_string(line_no) + ": label " +
                       std::to_string(label) + " out of range for " + std::to_string(k) +
                       " classes");
    b.label = label;
    const size_t colon = b.id.find(':');
    b.subject = colon == std::string::npos ? b.id : b.id.substr(0, colon);
    ds.beats.push_back(std::move(b));
  }
  ds.class_counts = count_classes(ds.beats, k);
  return ds;
}

std::vector<int64_t> count_classes(const std::vector<Beat>& beats, int n_classes) {
  std::vector<int64_t> counts(static_cast<size_t>(n_classes), 0);
  for (const Beat& b : beats) {
    if (!b.label) throw ValueError("beat '" + b.id + "' has no label");
    if (*b.label < 0 || *b.label >= n_classes)
      throw ValueError("beat '" + b.id + "' label " + std::to_string(*b.label) +
                       " out of range for " + std::to_string(n_classes) + " classes");
    ++counts[static_cast<size_t>(*b.label)];
  }
  return counts;
}

std::vector<std::pair<std::string, std::string>> find_records(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::exists(root)) throw IoError("record directory '" + root + "' does not exist");
  std::vector<std::string> headers;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".hea")
      headers.push_back(entry.path().string());
  std::sort(headers.begin(), headers.end());

  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(headers.size());
  for (const std::string& h : headers) {
    const fs::path p(h);
    const std::string prefix = (p.parent_path() / p.stem()).string();
    const fs::path rel = fs::relative(p, root);
    std::string subject;
    if (rel.has_parent_path() && !rel.parent_path().empty())
      subject = rel.parent_path().begin()->string();
    else
      subject = p.stem().string();
    out.emplace_back(prefix, subject);
  }
  return out;
}

std::vector<Beat> ingest_records(
    const std::vector<std::pair<std::string, std::string>>& records, IngestReport* report) {
  std::vector<Beat> all;
  std::optional<Task> task;
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  for (const auto& [prefix, subject] : records) {
    const std::string name = std::filesystem::path(prefix).filename().string();
    const wfdb::SignalRecord rec = wfdb::read_record(prefix);
    const std::optional<int> lead = wfdb::find_lead2(rec.header);
    if (!lead) {
      rep.skipped.push_back(name + ": no lead II channel");
      continue;
    }

    Task record_task;
    std::vector<Beat> labeled;
    if (wfdb::has_annotations(prefix)) {
      record_task = Task::Arrhythmia;
      if (task && *task != record_task)
        throw ValueError("record " + name +
                         " has beat annotations but earlier records were diagnosis-labeled");
      std::vector<Beat> beats = extract_record_beats(
          rec.channels[static_cast<size_t>(*lead)], rec.header.sampling_frequency, subject,
          &rep.stats);
      const auto events =
          rescale_annotations(wfdb::read_annotations(prefix), rec.header.sampling_frequency);
      labeled = label_beats(beats, events, &rep.stats);
    } else {
      const std::optional<wfdb::PtbClass> cls = wfdb::ptb_class_from_header(rec.header);
      if (!cls) {
        rep.skipped.push_back(name + ": no annotations and no usable diagnosis comment");
        continue;
      }
      record_task = Task::Mi;
      if (task && *task != record_task)
        throw ValueError("record " + name +
                         " is diagnosis-labeled but earlier records had beat annotations");
      std::vector<Beat> beats = extract_record_beats(
          rec.channels[static_cast<size_t>(*lead)], rec.header.sampling_frequency, subject,
          &rep.stats);
      labeled = label_beats_uniform(std::move(beats), static_cast<int>(*cls));
    }

    task = record_task;
    ++rep.records_used;
    for (Beat& b : labeled) all.push_back(std::move(b));
  }

  if (all.empty()) throw ValueError("ingest produced no labeled beats");
  rep.task = *task;
  rep.class_counts = count_classes(all, n_classes(*task));
  return all;
}

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string raw;
  size_t line_no = 0;
  auto trim = [](const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(is, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ParseError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void RunManifest::add(const std::string& key, const std::string& value) {
  entries.emplace_back(key, value);
}

void RunManifest::add(const std::string& key, int64_t value) {
  entries.emplace_back(key, std::to_string(value));
}

void RunManifest::add_file(const std::string& key, const std::string& path) {
  entries.emplace_back(key + ".path", path);
  entries.emplace_back(key + ".fnv64", hex64(fnv1a64_file(path)));
}

void RunManifest::write(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
  if (!f) throw IoError("short write to '" + path + "'");
}

}  // namespace beatnet
