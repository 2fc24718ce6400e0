#include "beatnet/wfdb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace beatnet::wfdb {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

long long parse_int(const std::string& tok, int line_no, const char* what) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(std::string("header line ") + std::to_string(line_no) + ": bad " +
                     what + " '" + tok + "'");
  return v;
}

double parse_num(const std::string& tok, int line_no, const char* what) {
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(std::string("header line ") + std::to_string(line_no) + ": bad " +
                     what + " '" + tok + "'");
  return v;
}

std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

// The attributes token is gain, optionally "(baseline)" and "/units", e.g.
// "200(1024)/mV". A gain of 0 means "uncalibrated"; the WFDB default of 200
// is substituted.
void parse_gain_token(const std::string& tok, int line_no, SignalSpec* spec,
                      bool* saw_baseline) {
  std::string rest = tok;
  const size_t slash = rest.find('/');
  if (slash != std::string::npos) {
    spec->units = rest.substr(slash + 1);
    rest = rest.substr(0, slash);
  }
  const size_t open = rest.find('(');
  if (open != std::string::npos) {
    const size_t close = rest.find(')', open);
    if (close == std::string::npos)
      throw ParseError("header line " + std::to_string(line_no) +
                       ": unterminated baseline in '" + tok + "'");
    spec->baseline = static_cast<int>(
        parse_int(rest.substr(open + 1, close - open - 1), line_no, "baseline"));
    *saw_baseline = true;
    rest = rest.substr(0, open);
  }
  const double gain = rest.empty() ? 0.0 : parse_num(rest, line_no, "ADC gain");
  spec->adc_gain = gain == 0.0 ? 200.0 : gain;
}

SignalSpec parse_signal_line(const std::string& line, int line_no) {
  const std::vector<std::string> tok = split_ws(line);
  if (tok.size() < 2)
    throw ParseError("header line " + std::to_string(line_no) +
                     ": signal spec needs at least a file name and a format");
  SignalSpec spec;
  spec.file = tok[0];

  // Format modifiers (xN frame skew etc.) never occur in the supported
  // databases, so a non-numeric tail is rejected rather than ignored.
  long long fmt = 0;
  auto [p, ec] = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), fmt);
  if (ec != std::errc() || p != tok[1].data() + tok[1].size())
    throw FormatError("header line " + std::to_string(line_no) + ": bad format token '" +
                      tok[1] + "'");
  if (fmt != 212 && fmt != 16)
    throw FormatError("header line " + std::to_string(line_no) +
                      ": unsupported signal format " + std::to_string(fmt) +
                      " (only 212 and 16 are handled)");
  spec.format = static_cast<int>(fmt);

  bool saw_baseline = false;
  if (tok.size() > 2) parse_gain_token(tok[2], line_no, &spec, &saw_baseline);
  if (tok.size() > 4) spec.adc_zero = static_cast<int>(parse_int(tok[4], line_no, "ADC zero"));
  if (!saw_baseline) spec.baseline = spec.adc_zero;
  if (tok.size() > 8) {
    std::string desc = tok[8];
    for (size_t i = 9; i < tok.size(); ++i) desc += " " + tok[i];
    spec.description = desc;
  }
  return spec;
}

}  // namespace

RecordHeader parse_header(const std::string& text) {
  RecordHeader hd;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  bool have_record_line = false;
  size_t want_signals = 0;

  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      hd.comments.push_back(trim(line.substr(1)));
      continue;
    }
    if (!have_record_line) {
      const std::vector<std::string> tok = split_ws(line);
      if (tok.size() < 2)
        throw ParseError("header line " + std::to_string(line_no) +
                         ": record line needs a name and a signal count");
      if (tok[0].find('/') != std::string::npos)
        throw ParseError("header line " + std::to_string(line_no) +
                         ": multi-segment records are not supported");
      hd.record_name = tok[0];
      const long long n_sig = parse_int(tok[1], line_no, "signal count");
      if (n_sig < 1)
        throw ParseError("header line " + std::to_string(line_no) + ": record declares " +
                         std::to_string(n_sig) + " signals");
      want_signals = static_cast<size_t>(n_sig);
      if (tok.size() > 2) {
        // May carry a counter frequency after '/'.
        const std::string fs_tok = tok[2].substr(0, tok[2].find('/'));
        hd.sampling_frequency = parse_num(fs_tok, line_no, "sampling frequency");
      } else {
        hd.sampling_frequency = 250.0;
      }
      if (hd.sampling_frequency <= 0.0)
        throw ParseError("header line " + std::to_string(line_no) +
                         ": sampling frequency must be positive");
      if (tok.size() > 3) {
        hd.n_samples = parse_int(tok[3], line_no, "sample count");
        if (hd.n_samples < 0)
          throw ParseError("header line " + std::to_string(line_no) +
                           ": negative sample count");
      }
      have_record_line = true;
      continue;
    }
    if (hd.signals.size() < want_signals) hd.signals.push_back(parse_signal_line(line, line_no));
  }

  if (!have_record_line) throw ParseError("header has no record line");
  if (hd.signals.size() < want_signals)
    throw ParseError("header declares " + std::to_string(want_signals) +
                     " signals but specifies only " + std::to_string(hd.signals.size()));
  return hd;
}

std::vector<int> decode_format212(const std::vector<uint8_t>& bytes, size_t n) {
  const size_t need = (n / 2) * 3 + (n % 2 ? 2 : 0);
  if (bytes.size() < need)
    throw FormatError("format 212: " + std::to_string(n) + " samples need " +
                      std::to_string(need) + " bytes, stream has " +
                      std::to_string(bytes.size()));
  std::vector<int> out;
  out.reserve(n);
  size_t i = 0;
  while (out.size() + 2 <= n) {
    const int b0 = bytes[i], b1 = bytes[i + 1], b2 = bytes[i + 2];
    i += 3;
    int s0 = ((b1 & 0x0F) << 8) | b0;
    int s1 = ((b1 & 0xF0) << 4) | b2;
    if (s0 & 0x800) s0 -= 0x1000;
    if (s1 & 0x800) s1 -= 0x1000;
    out.push_back(s0);
    out.push_back(s1);
  }
  if (out.size() < n) {
    int s0 = ((bytes[i + 1] & 0x0F) << 8) | bytes[i];
    if (s0 & 0x800) s0 -= 0x1000;
    out.push_back(s0);
  }
  return out;
}

std::vector<int> decode_format16(const std::vector<uint8_t>& bytes, size_t n) {
  if (bytes.size() < n * 2)
    throw FormatError("format 16: " + std::to_string(n) + " samples need " +
                      std::to_string(n * 2) + " bytes, stream has " +
                      std::to_string(bytes.size()));
  std::vector<int> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const uint16_t u = static_cast<uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    out.push_back(static_cast<int16_t>(u));
  }
  return out;
}

namespace {

// MIT annotation codes 1..41; 0 marks codes with no symbol.
constexpr char kCodeSymbol[64] = {
    0,   'N', 'L', 'R', 'a', 'V', 'F', 'J', 'A', 'S', 'E', 'j', '/', 'Q', '~', 0,
    '|', 0,   's', 'T', '*', 'D', '"', '=', 'p', 'B', '^', 't', '+', 'u', '?', '!',
    '[', ']', 'e', 'n', '@', 'x', 'f', '(', ')', 'r', 0,   0,   0,   0,   0,   0,
    0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0,   0};

constexpr int kSkip = 59, kNum = 60, kSub = 61, kChn = 62, kAux = 63;

}  // namespace

std::vector<AnnotationEvent> parse_annotations(const std::vector<uint8_t>& bytes) {
  std::vector<AnnotationEvent> out;
  int64_t time = 0;
  size_t i = 0;
  while (true) {
    if (i + 2 > bytes.size())
      throw FormatError("annotation stream ends without a terminating zero word");
    const uint16_t word = static_cast<uint16_t>(bytes[i] | (bytes[i + 1] << 8));
    i += 2;
    if (word == 0) break;
    const int code = (word >> 10) & 0x3F;
    const int payload = word & 0x3FF;
    switch (code) {
      case kSkip: {
        // Long interval: 4 extra bytes, high 16 bits first (PDP-11 order).
        if (i + 4 > bytes.size())
          throw FormatError("annotation stream truncated inside a SKIP interval");
        const uint16_t hi = static_cast<uint16_t>(bytes[i] | (bytes[i + 1] << 8));
        const uint16_t lo = static_cast<uint16_t>(bytes[i + 2] | (bytes[i + 3] << 8));
        i += 4;
        time += static_cast<int32_t>((static_cast<uint32_t>(hi) << 16) | lo);
        break;
      }
      case kNum:
      case kSub:
      case kChn:
        break;  // payload is a counter value, not a time delta
      case kAux: {
        const size_t adv = static_cast<size_t>(payload) + (payload & 1);
        if (i + adv > bytes.size())
          throw FormatError("annotation stream truncated inside an AUX string");
        i += adv;
        break;
      }
      default: {
        time += payload;
        const char sym = kCodeSymbol[code];
        if (sym != 0) out.push_back({time, sym});
        break;
      }
    }
  }
  return out;
}

std::optional<Aami> map_symbol_to_class(char symbol) {
  switch (symbol) {
    case 'N':
    case 'L':
    case 'R':
    case 'e':
    case 'j':
      return Aami::N;
    case 'A':
    case 'a':
    case 'J':
    case 'S':
      return Aami::S;
    case 'V':
    case 'E':
      return Aami::V;
    case 'F':
      return Aami::F;
    case '/':
    case 'f':
    case 'Q':
      return Aami::Q;
    default:
      return std::nullopt;
  }
}

SignalRecord read_record(const std::string& path_prefix) {
  std::ifstream f(path_prefix + ".hea");
  if (!f) throw IoError("cannot open '" + path_prefix + ".hea'");
  std::stringstream ss;
  ss << f.rdbuf();

  SignalRecord rec;
  rec.header = parse_header(ss.str());
  const RecordHeader& hd = rec.header;
  rec.channels.assign(hd.signals.size(), {});

  const std::filesystem::path dir = std::filesystem::path(path_prefix).parent_path();

  // Signals are grouped by the file that holds them; samples within one file
  // are interleaved across its signals.
  std::vector<std::string> file_order;
  for (const SignalSpec& s : hd.signals)
    if (std::find(file_order.begin(), file_order.end(), s.file) == file_order.end())
      file_order.push_back(s.file);

  for (const std::string& file : file_order) {
    std::vector<size_t> members;
    int format = 0;
    for (size_t si = 0; si < hd.signals.size(); ++si) {
      if (hd.signals[si].file != file) continue;
      if (!members.empty() && hd.signals[si].format != format)
        throw FormatError("record " + hd.record_name + ": signal file '" + file +
                          "' mixes formats");
      format = hd.signals[si].format;
      members.push_back(si);
    }

    const std::vector<uint8_t> bytes = read_bytes((dir / file).string());
    const size_t nsig = members.size();
    size_t total;
    if (hd.n_samples > 0) {
      total = static_cast<size_t>(hd.n_samples) * nsig;
    } else if (format == 212) {
      total = (bytes.size() / 3) * 2;
      total -= total % nsig;
    } else {
      total = bytes.size() / 2;
      total -= total % nsig;
    }

    const std::vector<int> raw = format == 212 ? decode_format212(bytes, total)
                                               : decode_format16(bytes, total);
    const size_t per_signal = total / nsig;
    for (size_t m = 0; m < nsig; ++m) {
      const SignalSpec& spec = hd.signals[members[m]];
      std::vector<float>& ch = rec.channels[members[m]];
      ch.resize(per_signal);
      for (size_t t = 0; t < per_signal; ++t)
        ch[t] = static_cast<float>((raw[t * nsig + m] - spec.baseline) / spec.adc_gain);
    }
  }
  return rec;
}

std::vector<AnnotationEvent> read_annotations(const std::string& path_prefix) {
  return parse_annotations(read_bytes(path_prefix + ".atr"));
}

bool has_annotations(const std::string& path_prefix) {
  std::error_code ec;
  return std::filesystem::exists(path_prefix + ".atr", ec);
}

std::optional<int> find_lead2(const RecordHeader& header) {
  for (size_t i = 0; i < header.signals.size(); ++i) {
    const std::string d = lower(trim(header.signals[i].description));
    if (d == "mlii" || d == "ii" || d == "i i") return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<PtbClass> ptb_class_from_header(const RecordHeader& header) {
  for (const std::string& c : header.comments) {
    const std::string lc = lower(c);
    const size_t at = lc.find("reason for admission");
    if (at == std::string::npos) continue;
    const size_t colon = lc.find(':', at);
    const std::string value = colon == std::string::npos ? "" : lc.substr(colon + 1);
    if (value.find("myocardial infarction") != std::string::npos) return PtbClass::Mi;
    if (value.find("healthy control") != std::string::npos) return PtbClass::Hc;
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace beatnet::wfdb
