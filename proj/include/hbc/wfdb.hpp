#pragma once

// MIT-BIH / WFDB ingestion: record headers, format-212 signal files and
// MIT-format annotation files, plus the labeled beat inventory and its
// train/test split.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hbc {

// The five beat classes used for classification. The integer value is the
// model label and is part of every serialized artifact.
enum class HeartbeatClass : std::uint8_t { N = 0, PB = 1, LBBB = 2, RBBB = 3, PVC = 4 };

inline constexpr int kNumClasses = 5;
inline constexpr std::array<HeartbeatClass, kNumClasses> kAllClasses = {
    HeartbeatClass::N, HeartbeatClass::PB, HeartbeatClass::LBBB, HeartbeatClass::RBBB,
    HeartbeatClass::PVC};

std::string_view class_name(HeartbeatClass c);
// Inverse of class_name; throws InputError on unknown names.
HeartbeatClass class_from_name(std::string_view name);
inline int label_of(HeartbeatClass c) { return static_cast<int>(c); }
HeartbeatClass class_from_label(int label);

// MIT annotation codes (ecgcodes.h).
namespace anncode {
inline constexpr int kNormal = 1;
inline constexpr int kLbbb = 2;
inline constexpr int kRbbb = 3;
inline constexpr int kPvc = 5;
inline constexpr int kPace = 12;
inline constexpr int kPWave = 24;
inline constexpr int kTWave = 27;
inline constexpr int kSkip = 59;
inline constexpr int kNum = 60;
inline constexpr int kSub = 61;
inline constexpr int kChn = 62;
inline constexpr int kAux = 63;
inline constexpr int kMaxCode = 49;  // ACMAX
}  // namespace anncode

// Single-character mnemonic for an annotation code ("N", "L", "/", ...).
std::string_view annotation_symbol(int code);
// True for codes that mark a QRS complex (isqrs in the WFDB library).
bool is_beat_code(int code);
// Beat code → classified class; nullopt for codes outside the five classes.
std::optional<HeartbeatClass> class_of_code(int code);

struct SignalSpec {
  std::string file_name;
  int storage_format = 0;
  double adc_gain = 0.0;      // adu per mV
  int adc_baseline = 0;       // adu
  int adc_resolution = 0;     // bits
  int adc_zero = 0;           // adu
  int initial_value = 0;      // adu
  std::string description;
};

struct RecordHeader {
  std::string record_name;
  int n_signals = 0;
  double sampling_rate_hz = 0.0;
  std::size_t n_samples = 0;
  std::vector<SignalSpec> signals;
};

struct SignalRecord {
  RecordHeader header;
  std::size_t lead_index = 0;
  std::vector<int> adc;         // raw samples of the selected lead
  std::vector<double> samples;  // mV: (adc − baseline) / gain
};

struct Annotation {
  std::size_t sample_index = 0;
  int code = 0;
  int subtype = 0;
  int chan = 0;
  int num = 0;
  std::string aux;
  std::optional<HeartbeatClass> beat_class;
};

struct AnnotationList {
  std::vector<Annotation> entries;
};

// Raises ParseError (with 1-based line number) or UnsupportedFormat.
RecordHeader parse_header(std::string_view text);

// Sign-extended 12-bit samples of every signal, interleaved frame by frame.
std::vector<int> unpack_212(std::span<const std::uint8_t> bytes, std::size_t total_samples);
// Inverse of unpack_212. An odd sample count leaves the final byte triple
// half used (the third byte is omitted, as WFDB writers do).
std::vector<std::uint8_t> pack_212(std::span<const int> adc);

// Format-212 sentinel for a missing sample; decoded as NaN in mV.
inline constexpr int kInvalid212 = -2048;

SignalRecord decode_signal_212(std::span<const std::uint8_t> bytes, const RecordHeader& header,
                               std::size_t lead_index);

// Replaces NaN samples by the last valid value (0 before the first one).
// Returns the number replaced.
std::size_t hold_invalid_samples(std::span<double> samples);

// Raises ParseError carrying the byte offset of the offending word.
AnnotationList parse_annotations(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_annotations(const AnnotationList& list);

// Per-symbol counts over channel-0 annotations of the given records.
struct SymbolCount {
  std::string symbol;
  int code = 0;
  std::size_t count = 0;
  bool is_beat = false;
  bool selected = false;  // one of the five classified classes
};
std::vector<SymbolCount> class_distribution(std::span<const AnnotationList> records);

// One labeled beat from the annotation files.
struct BeatRef {
  std::string record;
  std::size_t sample_index = 0;
  HeartbeatClass label = HeartbeatClass::N;
};

// Channel-0 beats of the five classes, in file order.
std::vector<BeatRef> labeled_beats(const std::string& record, const AnnotationList& annotations);

enum class SplitStrategy { StratifiedBeat, ByRecord };
std::string_view split_strategy_name(SplitStrategy s);
SplitStrategy split_strategy_from_name(std::string_view name);

struct DatasetSplit {
  std::vector<std::size_t> train;  // indices into the beat list, ascending
  std::vector<std::size_t> test;
  SplitStrategy strategy = SplitStrategy::StratifiedBeat;
  std::uint64_t seed = 0;
};

DatasetSplit split_dataset(std::span<const BeatRef> beats, SplitStrategy strategy,
                           std::uint64_t seed);

// File helpers. `data_dir/record.hea`, `.dat` (as named by the header),
// `.atr`. Missing files raise MissingArtifact with stage "data".
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
RecordHeader load_header(const std::filesystem::path& data_dir, const std::string& record);
SignalRecord load_signal(const std::filesystem::path& data_dir, const std::string& record,
                         std::size_t lead_index = 0);
AnnotationList load_annotations(const std::filesystem::path& data_dir, const std::string& record,
                                const std::string& extension = "atr");
// Records in data_dir having both a header and an .atr file, sorted by name.
std::vector<std::string> list_records(const std::filesystem::path& data_dir);

// Header text for a single-file format-212 record, suitable for parse_header.
std::string format_header(const RecordHeader& header);

}  // namespace hbc
