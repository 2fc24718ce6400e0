#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "beatnet/beat.hpp"
#include "beatnet/preprocess.hpp"

// Beat CSV files, run manifests and the key=value config format. A beat row
// is:
//
//   id,s0,...,s186,label
//
// with floats printed at %.9g so binary32 values round-trip exactly. Readers
// also accept rows without the leading id column.

namespace beatnet {

void write_beats_csv(const std::string& path, const std::vector<Beat>& beats);

struct BeatDataset {
  Task task = Task::Arrhythmia;
  std::vector<Beat> beats;
  std::vector<int64_t> class_counts;  // indexed by label
};

// Validates every label against the task's class count.
BeatDataset read_beats_csv(const std::string& path, Task task);

std::vector<int64_t> count_classes(const std::vector<Beat>& beats, int n_classes);

// Ingest: record discovery plus the full parse/extract/label path.

// All *.hea files under root (searched recursively), as (path prefix,
// subject) pairs in sorted path order. The subject is the first directory
// component below root, or the record name for flat layouts.
std::vector<std::pair<std::string, std::string>> find_records(const std::string& root);

struct IngestReport {
  Task task = Task::Arrhythmia;
  PreprocessStats stats;
  std::vector<int64_t> class_counts;
  std::vector<std::string> skipped;  // "record: reason" lines
  int64_t records_used = 0;
};

// Reads every record, extracts beats and labels them: records with a .atr
// annotation file get per-beat AAMI labels, records with a usable "Reason
// for admission" comment get one binary label. Mixing the two kinds in one
// ingest is an error. Records without lead II or without a usable label
// source are skipped and listed in the report.
std::vector<Beat> ingest_records(const std::vector<std::pair<std::string, std::string>>& records,
                                 IngestReport* report);

// key = value pairs, one per line; '#' starts a comment. Later keys win.
std::map<std::string, std::string> read_config(const std::string& path);
std::map<std::string, std::string> parse_config(const std::string& text);

// Ordered key = value lines; the record of one CLI run.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, int64_t value);
  void add_file(const std::string& key, const std::string& path);  // path + fnv64
  void write(const std::string& path) const;
};

}  // namespace beatnet
