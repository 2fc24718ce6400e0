#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "beatnet/errors.hpp"

// Readers for the PhysioBank flavor of WFDB records: text .hea headers,
// signal files in formats 212 and 16, and MIT .atr annotation files. Only
// what the MIT-BIH arrhythmia and PTB diagnostic databases actually use is
// supported; anything else is rejected with a typed error rather than
// guessed at.

namespace beatnet::wfdb {

struct SignalSpec {
  std::string file;         // signal file the samples live in
  int format = 0;           // 212 or 16
  double adc_gain = 200.0;  // ADC units per physical unit
  int baseline = 0;         // ADC value corresponding to 0 physical units
  std::string units = "mV";
  int adc_zero = 0;
  std::string description;  // lead name, e.g. "MLII"
};

struct RecordHeader {
  std::string record_name;
  double sampling_frequency = 0.0;
  int64_t n_samples = 0;  // per signal; 0 means "infer from file size"
  std::vector<SignalSpec> signals;
  std::vector<std::string> comments;  // '#' lines, marker stripped
};

// Parses .hea text. Throws ParseError/FormatError naming the offending line.
RecordHeader parse_header(const std::string& text);

// Format 212: two 12-bit two's-complement samples packed into 3 bytes.
// Returns exactly n samples in file order (channel-interleaved for
// multi-signal files); throws FormatError if bytes run short.
std::vector<int> decode_format212(const std::vector<uint8_t>& bytes, size_t n);

// Format 16: little-endian int16, channel-interleaved.
std::vector<int> decode_format16(const std::vector<uint8_t>& bytes, size_t n);

// One annotation: a sample index on the record's native timeline plus the
// MIT single-character symbol.
struct AnnotationEvent {
  int64_t sample;
  char symbol;
};

// Decodes the MIT annotation byte stream (.atr). Event times are stored as
// deltas; SKIP/NUM/SUB/CHN/AUX modifiers are consumed and discarded.
std::vector<AnnotationEvent> parse_annotations(const std::vector<uint8_t>& bytes);

// AAMI EC57 beat classes in label-index order N, S, V, F, Q.
enum class Aami { N = 0, S = 1, V = 2, F = 3, Q = 4 };

// MIT symbol to AAMI class; nullopt for non-beat or unmapped symbols.
std::optional<Aami> map_symbol_to_class(char symbol);

// A fully decoded record: header plus per-channel physical-unit samples,
// calibrated as (adc - baseline) / gain.
struct SignalRecord {
  RecordHeader header;
  std::vector<std::vector<float>> channels;
};

// Reads <path_prefix>.hea and the signal file(s) it names (resolved relative
// to the header's directory).
SignalRecord read_record(const std::string& path_prefix);

// Reads <path_prefix>.atr.
std::vector<AnnotationEvent> read_annotations(const std::string& path_prefix);
bool has_annotations(const std::string& path_prefix);

// Index of the lead II channel (named MLII, II or "i i", case-insensitive);
// nullopt when the record has none.
std::optional<int> find_lead2(const RecordHeader& header);

// PTB diagnosis taken from the "Reason for admission" header comment.
enum class PtbClass { Hc = 0, Mi = 1 };
std::optional<PtbClass> ptb_class_from_header(const RecordHeader& header);

}  // namespace beatnet::wfdb
