#include "hbc/wfdb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hbc/error.hpp"
#include "hbc/rng.hpp"

namespace hbc {

namespace {

constexpr std::array<std::string_view, anncode::kMaxCode + 1> kSymbols = {
    "",  "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "",  "|",
    "",  "s", "T", "*", "D", "\"", "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]",
    "e", "n", "@", "x", "f", "(", ")", "r", "",  "",  "",  "",  "",  "",  "",  ""};

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Parses the leading number of `token` (stopping at the first character that
// cannot continue it). Returns false when no digits are present.
template <class T>
bool leading_number(std::string_view token, T& value) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr != first;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

int to_12bit(int v) { return v > 2047 ? v - 4096 : v; }

std::uint16_t read_le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_le16(std::vector<std::uint8_t>& out, unsigned word) {
  out.push_back(static_cast<std::uint8_t>(word & 0xFF));
  out.push_back(static_cast<std::uint8_t>((word >> 8) & 0xFF));
}

void put_word(std::vector<std::uint8_t>& out, int code, unsigned len) {
  put_le16(out, (static_cast<unsigned>(code) << 10) | (len & 0x3FF));
}

}  // namespace

std::string_view class_name(HeartbeatClass c) {
  switch (c) {
    case HeartbeatClass::N: return "N";
    case HeartbeatClass::PB: return "PB";
    case HeartbeatClass::LBBB: return "LBBB";
    case HeartbeatClass::RBBB: return "RBBB";
    case HeartbeatClass::PVC: return "PVC";
  }
  return "?";
}

HeartbeatClass class_from_name(std::string_view name) {
  for (HeartbeatClass c : kAllClasses)
    if (class_name(c) == name) return c;
  throw InputError("unknown heartbeat class '" + std::string(name) + "'");
}

HeartbeatClass class_from_label(int label) {
  if (label < 0 || label >= kNumClasses)
    throw InputError("class label " + std::to_string(label) + " outside 0..4");
  return static_cast<HeartbeatClass>(label);
}

std::string_view annotation_symbol(int code) {
  if (code < 0 || code > anncode::kMaxCode) return "";
  return kSymbols[static_cast<std::size_t>(code)];
}

bool is_beat_code(int code) {
  return (code >= 1 && code <= 13) || code == 25 || code == 30 || code == 34 || code == 35 ||
         code == 38 || code == 41;
}

std::optional<HeartbeatClass> class_of_code(int code) {
  switch (code) {
    case anncode::kNormal: return HeartbeatClass::N;
    case anncode::kLbbb: return HeartbeatClass::LBBB;
    case anncode::kRbbb: return HeartbeatClass::RBBB;
    case anncode::kPvc: return HeartbeatClass::PVC;
    case anncode::kPace: return HeartbeatClass::PB;
    default: return std::nullopt;
  }
}

RecordHeader parse_header(std::string_view text) {
  RecordHeader h;
  std::vector<std::pair<std::size_t, std::string>> lines;
  {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      std::string line = trim(text.substr(pos, end - pos));
      if (!line.empty() && line[0] != '#') lines.emplace_back(line_no, std::move(line));
      pos = end + 1;
    }
  }
  if (lines.empty()) throw ParseError("header is empty", 1);

  const auto& [first_no, first] = lines.front();
  const auto rec = split_ws(first);
  if (rec.size() < 2) throw ParseError("record line needs name and signal count", first_no);
  h.record_name = rec[0].substr(0, rec[0].find('/'));
  if (!leading_number(rec[1], h.n_signals) || h.n_signals < 1)
    throw ParseError("invalid signal count '" + rec[1] + "'", first_no);
  if (rec.size() < 3 || !leading_number(rec[2], h.sampling_rate_hz))
    throw ParseError("sampling rate missing from record line", first_no);
  if (!(h.sampling_rate_hz > 0.0))
    throw ParseError("sampling rate must be positive", first_no);
  if (rec.size() < 4 || !leading_number(rec[3], h.n_samples))
    throw ParseError("sample count missing from record line", first_no);

  if (lines.size() - 1 < static_cast<std::size_t>(h.n_signals))
    throw ParseError("expected " + std::to_string(h.n_signals) + " signal lines, found " +
                         std::to_string(lines.size() - 1),
                     lines.back().first);

  for (int s = 0; s < h.n_signals; ++s) {
    const auto& [no, line] = lines[static_cast<std::size_t>(s) + 1];
    const auto f = split_ws(line);
    if (f.size() < 2) throw ParseError("signal line needs file name and format", no);
    SignalSpec sig;
    sig.file_name = f[0];
    if (!leading_number(f[1], sig.storage_format))
      throw ParseError("invalid storage format '" + f[1] + "'", no);
    if (sig.storage_format != 212)
      throw UnsupportedFormat("signal " + std::to_string(s) + " uses storage format " +
                              std::to_string(sig.storage_format) + "; only 212 is supported");
    bool explicit_baseline = false;
    sig.adc_gain = 200.0;
    if (f.size() > 2) {
      const std::string& g = f[2];
      double gain = 0.0;
      if (!leading_number(g, gain)) throw ParseError("invalid adc gain '" + g + "'", no);
      if (gain < 0.0) throw ParseError("adc gain must be positive", no);
      if (gain > 0.0) sig.adc_gain = gain;
      const auto open = g.find('(');
      if (open != std::string::npos) {
        if (!leading_number(std::string_view(g).substr(open + 1), sig.adc_baseline))
          throw ParseError("invalid baseline in '" + g + "'", no);
        explicit_baseline = true;
      }
    }
    if (f.size() > 3 && !leading_number(f[3], sig.adc_resolution))
      throw ParseError("invalid adc resolution '" + f[3] + "'", no);
    if (f.size() > 4 && !leading_number(f[4], sig.adc_zero))
      throw ParseError("invalid adc zero '" + f[4] + "'", no);
    if (f.size() > 5 && !leading_number(f[5], sig.initial_value))
      throw ParseError("invalid initial value '" + f[5] + "'", no);
    if (!explicit_baseline) sig.adc_baseline = sig.adc_zero;
    if (f.size() > 8) {
      std::string desc;
      for (std::size_t i = 8; i < f.size(); ++i) {
        if (!desc.empty()) desc += ' ';
        desc += f[i];
      }
      sig.description = desc;
    }
    h.signals.push_back(std::move(sig));
  }
  return h;
}

std::vector<int> unpack_212(std::span<const std::uint8_t> bytes, std::size_t total_samples) {
  const std::size_t needed = (total_samples * 3 + 1) / 2;
  if (bytes.size() < needed)
    throw ParseError("format-212 data truncated: expected " + std::to_string(needed) +
                         " bytes, got " + std::to_string(bytes.size()),
                     bytes.size());
  std::vector<int> out(total_samples);
  std::size_t s = 0;
  std::size_t b = 0;
  while (s < total_samples) {
    const int b0 = bytes[b];
    const int b1 = bytes[b + 1];
    out[s++] = to_12bit(((b1 & 0x0F) << 8) | b0);
    if (s < total_samples) {
      const int b2 = bytes[b + 2];
      out[s++] = to_12bit(((b1 & 0xF0) << 4) | b2);
    }
    b += 3;
  }
  return out;
}

std::vector<std::uint8_t> pack_212(std::span<const int> adc) {
  std::vector<std::uint8_t> out;
  out.reserve((adc.size() * 3 + 1) / 2);
  for (std::size_t i = 0; i < adc.size(); i += 2) {
    const unsigned s1 = static_cast<unsigned>(adc[i]) & 0xFFF;
    const unsigned s2 = i + 1 < adc.size() ? static_cast<unsigned>(adc[i + 1]) & 0xFFF : 0;
    out.push_back(static_cast<std::uint8_t>(s1 & 0xFF));
    out.push_back(static_cast<std::uint8_t>(((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0)));
    if (i + 1 < adc.size()) out.push_back(static_cast<std::uint8_t>(s2 & 0xFF));
  }
  return out;
}

SignalRecord decode_signal_212(std::span<const std::uint8_t> bytes, const RecordHeader& header,
                               std::size_t lead_index) {
  if (lead_index >= header.signals.size())
    throw InputError("lead " + std::to_string(lead_index) + " not in record " +
                     header.record_name);
  const SignalSpec& lead = header.signals[lead_index];
  if (lead.storage_format != 212)
    throw UnsupportedFormat("lead uses storage format " + std::to_string(lead.storage_format));
  // Signals stored in the same file are interleaved frame by frame.
  std::size_t stride = 0;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < header.signals.size(); ++i) {
    if (header.signals[i].file_name != lead.file_name) continue;
    if (i == lead_index) offset = stride;
    ++stride;
  }
  const auto all = unpack_212(bytes, header.n_samples * stride);
  SignalRecord rec;
  rec.header = header;
  rec.lead_index = lead_index;
  rec.adc.resize(header.n_samples);
  rec.samples.resize(header.n_samples);
  for (std::size_t t = 0; t < header.n_samples; ++t) {
    const int v = all[t * stride + offset];
    rec.adc[t] = v;
    rec.samples[t] = v == kInvalid212 ? std::numeric_limits<double>::quiet_NaN()
                                      : (v - lead.adc_baseline) / lead.adc_gain;
  }
  return rec;
}

std::size_t hold_invalid_samples(std::span<double> samples) {
  std::size_t n = 0;
  double last = 0.0;
  for (double& v : samples) {
    if (std::isnan(v)) {
      v = last;
      ++n;
    } else {
      last = v;
    }
  }
  return n;
}

AnnotationList parse_annotations(std::span<const std::uint8_t> bytes) {
  AnnotationList list;
  long long time = 0;
  int chan = 0;
  int num = 0;
  std::size_t at = 0;
  Annotation* last = nullptr;
  while (at + 2 <= bytes.size()) {
    const std::uint16_t word = read_le16(bytes, at);
    const int code = word >> 10;
    const int len = word & 0x3FF;
    if (code == 0 && len == 0) break;
    switch (code) {
      case anncode::kSkip: {
        if (at + 6 > bytes.size())
          throw ParseError("SKIP interval truncated at byte " + std::to_string(at), at);
        const std::uint32_t hi = read_le16(bytes, at + 2);
        const std::uint32_t lo = read_le16(bytes, at + 4);
        time += static_cast<std::int32_t>((hi << 16) | lo);
        if (time < 0) throw ParseError("annotation time became negative", at);
        at += 6;
        continue;
      }
      case anncode::kNum:
        num = len;
        if (last) last->num = len;
        break;
      case anncode::kSub:
        if (last) last->subtype = len;
        break;
      case anncode::kChn:
        chan = len;
        if (last) last->chan = len;
        break;
      case anncode::kAux: {
        const std::size_t padded = static_cast<std::size_t>(len + (len & 1));
        if (at + 2 + static_cast<std::size_t>(len) > bytes.size())
          throw ParseError("AUX payload of " + std::to_string(len) + " bytes runs past end at byte " +
                               std::to_string(at),
                           at);
        if (last) {
          std::string aux(reinterpret_cast<const char*>(bytes.data() + at + 2),
                          static_cast<std::size_t>(len));
          // Aux strings are NUL padded by some writers.
          if (const auto nul = aux.find('\0'); nul != std::string::npos) aux.resize(nul);
          last->aux = std::move(aux);
        }
        at += 2 + padded;
        continue;
      }
      default: {
        time += len;
        if (code == 0 || code > anncode::kMaxCode) break;  // time-only increment
        Annotation a;
        a.sample_index = static_cast<std::size_t>(time);
        a.code = code;
        a.chan = chan;
        a.num = num;
        a.beat_class = class_of_code(code);
        list.entries.push_back(std::move(a));
        last = &list.entries.back();
        break;
      }
    }
    at += 2;
  }
  return list;
}

std::vector<std::uint8_t> encode_annotations(const AnnotationList& list) {
  std::vector<std::uint8_t> out;
  long long prev_time = 0;
  int prev_num = 0;
  int prev_chan = 0;
  for (const Annotation& a : list.entries) {
    const long long diff = static_cast<long long>(a.sample_index) - prev_time;
    if (diff < 0 || diff > 1023) {
      put_word(out, anncode::kSkip, 0);
      const auto interval = static_cast<std::uint32_t>(static_cast<std::int32_t>(diff));
      put_le16(out, interval >> 16);
      put_le16(out, interval & 0xFFFF);
      put_word(out, a.code, 0);
    } else {
      put_word(out, a.code, static_cast<unsigned>(diff));
    }
    if (a.num != prev_num) put_word(out, anncode::kNum, static_cast<unsigned>(a.num));
    if (a.subtype != 0) put_word(out, anncode::kSub, static_cast<unsigned>(a.subtype));
    if (a.chan != prev_chan) put_word(out, anncode::kChn, static_cast<unsigned>(a.chan));
    if (!a.aux.empty()) {
      const std::size_t n = std::min<std::size_t>(a.aux.size(), 255);
      put_word(out, anncode::kAux, static_cast<unsigned>(n));
      out.insert(out.end(), a.aux.begin(), a.aux.begin() + static_cast<std::ptrdiff_t>(n));
      if (n & 1) out.push_back(0);
    }
    prev_time = static_cast<long long>(a.sample_index);
    prev_num = a.num;
    prev_chan = a.chan;
  }
  put_le16(out, 0);
  return out;
}

std::vector<SymbolCount> class_distribution(std::span<const AnnotationList> records) {
  std::map<int, std::size_t> counts;
  for (const AnnotationList& list : records)
    for (const Annotation& a : list.entries)
      if (a.chan == 0) ++counts[a.code];
  std::vector<SymbolCount> out;
  for (const auto& [code, count] : counts) {
    SymbolCount s;
    s.code = code;
    s.symbol = std::string(annotation_symbol(code));
    s.count = count;
    s.is_beat = is_beat_code(code);
    s.selected = class_of_code(code).has_value();
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SymbolCount& a, const SymbolCount& b) { return a.count > b.count; });
  return out;
}

std::vector<BeatRef> labeled_beats(const std::string& record, const AnnotationList& annotations) {
  std::vector<BeatRef> out;
  for (const Annotation& a : annotations.entries)
    if (a.chan == 0 && a.beat_class) out.push_back({record, a.sample_index, *a.beat_class});
  return out;
}

std::string_view split_strategy_name(SplitStrategy s) {
  return s == SplitStrategy::StratifiedBeat ? "stratified-beat" : "by-record";
}

SplitStrategy split_strategy_from_name(std::string_view name) {
  if (name == "stratified-beat" || name == "stratified") return SplitStrategy::StratifiedBeat;
  if (name == "by-record" || name == "record") return SplitStrategy::ByRecord;
  throw InputError("unknown split strategy '" + std::string(name) + "'");
}

DatasetSplit split_dataset(std::span<const BeatRef> beats, SplitStrategy strategy,
                           std::uint64_t seed) {
  DatasetSplit split;
  split.strategy = strategy;
  split.seed = seed;
  if (strategy == SplitStrategy::StratifiedBeat) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < beats.size(); ++i)
      by_class[static_cast<std::size_t>(label_of(beats[i].label))].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& idx = by_class[c];
      if (idx.empty()) continue;
      if (idx.size() < 3)
        throw InputError("class " + std::string(class_name(static_cast<HeartbeatClass>(c))) +
                         " has " + std::to_string(idx.size()) + " beats; cannot stratify");
      Rng rng(mix_seed(seed, c));
      rng.shuffle(std::span<std::size_t>(idx));
      const std::size_t n_train = (2 * idx.size() + 1) / 3;
      split.train.insert(split.train.end(), idx.begin(),
                         idx.begin() + static_cast<std::ptrdiff_t>(n_train));
      split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.end());
    }
  } else {
    std::map<std::string, std::vector<std::size_t>> by_record;
    for (std::size_t i = 0; i < beats.size(); ++i) by_record[beats[i].record].push_back(i);
    std::vector<std::string> names;
    for (const auto& [name, _] : by_record) names.push_back(name);
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(names));
    const std::size_t target = (2 * beats.size() + 1) / 3;
    std::size_t in_train = 0;
    for (const std::string& name : names) {
      const auto& idx = by_record[name];
      auto& dest = (in_train + idx.size() / 2 <= target) ? split.train : split.test;
      if (&dest == &split.train) in_train += idx.size();
      dest.insert(dest.end(), idx.begin(), idx.end());
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string(), "data");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string(), "data");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RecordHeader load_header(const std::filesystem::path& data_dir, const std::string& record) {
  return parse_header(read_text_file(data_dir / (record + ".hea")));
}

SignalRecord load_signal(const std::filesystem::path& data_dir, const std::string& record,
                         std::size_t lead_index) {
  const RecordHeader header = load_header(data_dir, record);
  if (lead_index >= header.signals.size())
    throw InputError("record " + record + " has no lead " + std::to_string(lead_index));
  const auto bytes = read_binary_file(data_dir / header.signals[lead_index].file_name);
  return decode_signal_212(bytes, header, lead_index);
}

AnnotationList load_annotations(const std::filesystem::path& data_dir, const std::string& record,
                                const std::string& extension) {
  return parse_annotations(read_binary_file(data_dir / (record + "." + extension)));
}

std::vector<std::string> list_records(const std::filesystem::path& data_dir) {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(data_dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
    if (entry.path().extension() != ".hea") continue;
    const std::string stem = entry.path().stem().string();
    if (std::filesystem::exists(data_dir / (stem + ".atr"))) out.push_back(stem);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string format_header(const RecordHeader& h) {
  std::ostringstream os;
  os << h.record_name << ' ' << h.n_signals << ' ' << h.sampling_rate_hz << ' ' << h.n_samples
     << '\n';
  for (const SignalSpec& s : h.signals) {
    os << s.file_name << ' ' << s.storage_format << ' ' << s.adc_gain << '(' << s.adc_baseline
       << ")/mV " << s.adc_resolution << ' ' << s.adc_zero << ' ' << s.initial_value << " 0 0";
    if (!s.description.empty()) os << ' ' << s.description;
    os << '\n';
  }
  return os.str();
}

}  // namespace hbc
