#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "hbc/error.hpp"
#include "hbc/rng.hpp"
#include "hbc/wfdb.hpp"

using namespace hbc;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = HBC_FIXTURE_DIR;

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::vector<std::uint8_t> words(std::initializer_list<std::uint16_t> ws) {
  std::vector<std::uint8_t> out;
  for (std::uint16_t w : ws) {
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
  }
  return out;
}

std::vector<BeatRef> beats_of(std::initializer_list<std::pair<HeartbeatClass, int>> counts,
                              const std::string& record = "r") {
  std::vector<BeatRef> out;
  std::size_t t = 0;
  for (auto [c, n] : counts)
    for (int i = 0; i < n; ++i) out.push_back({record, t += 300, c});
  return out;
}

}  // namespace

TEST_SUITE("header") {
  TEST_CASE("record 100 header fields") {
    const RecordHeader h = parse_header(read_text_file(kFixtures / "mitdb_head/100.hea"));
    CHECK(h.record_name == "100");
    CHECK(h.n_signals == 2);
    CHECK(h.sampling_rate_hz == 360.0);
    CHECK(h.n_samples == 10);
    REQUIRE(h.signals.size() == 2);
    CHECK(h.signals[0].storage_format == 212);
    CHECK(h.signals[0].adc_gain == 200.0);
    CHECK(h.signals[0].adc_baseline == 1024);
    CHECK(h.signals[0].initial_value == 995);
    CHECK(h.signals[0].description == "MLII");
    CHECK(h.signals[1].description == "V5");
  }

  TEST_CASE("full-length record line") {
    const RecordHeader h = parse_header(
        "100 2 360 650000\n100.dat 212 200 11 1024 995 -22131 0 MLII\n"
        "100.dat 212 200 11 1024 1011 20052 0 V5\n");
    CHECK(h.n_samples == 650000);
    CHECK(h.sampling_rate_hz == 360.0);
    CHECK(h.signals[0].adc_gain == 200.0);
  }

  TEST_CASE("missing sampling rate is an error, not a default") {
    CHECK_THROWS_AS(parse_header("100 1\n100.dat 212 200 11 1024 0 0 0 MLII\n"), ParseError);
  }

  TEST_CASE("format 16 is rejected as unsupported") {
    CHECK_THROWS_AS(parse_header("X 1 360 10\nX.dat 16 200 16 0 0 0 0 I\n"), UnsupportedFormat);
  }

  TEST_CASE("malformed signal line reports its line number") {
    try {
      parse_header("# comment\nX 1 360 10\nX.dat 212 abc 11 0 0 0 0 I\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.position() == 3);
    }
  }

  TEST_CASE("gain with baseline and units") {
    const RecordHeader h = parse_header(read_text_file(kFixtures / "wfdb/crafted1.hea"));
    CHECK(h.signals[0].adc_gain == 100.0);
    CHECK(h.signals[0].adc_baseline == -12);
  }

  TEST_CASE("format_header round trip") {
    const RecordHeader h = parse_header(read_text_file(kFixtures / "mitdb_head/100.hea"));
    const RecordHeader back = parse_header(format_header(h));
    CHECK(back.n_samples == h.n_samples);
    CHECK(back.signals[1].initial_value == h.signals[1].initial_value);
    CHECK(back.signals[0].adc_baseline == h.signals[0].adc_baseline);
  }
}

TEST_SUITE("format212") {
  TEST_CASE("zero bytes") {
    const std::uint8_t b[] = {0x00, 0x00, 0x00};
    CHECK(unpack_212(b, 2) == std::vector<int>{0, 0});
  }

  TEST_CASE("twelve-bit two's complement") {
    const std::uint8_t b[] = {0xFF, 0x0F, 0x00};
    CHECK(unpack_212(b, 2) == std::vector<int>{-1, 0});
    const std::uint8_t c[] = {0x00, 0x88, 0x00};  // s1 = 0x800, s2 = 0x800
    CHECK(unpack_212(c, 2) == std::vector<int>{-2048, -2048});
  }

  TEST_CASE("pack/unpack round trip on random even-length data") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 * (1 + rng.below(500));
      std::vector<int> adc(n);
      for (int& v : adc) v = static_cast<int>(rng.below(4096)) - 2048;
      const auto bytes = pack_212(adc);
      CHECK(bytes.size() == n * 3 / 2);
      CHECK(unpack_212(bytes, n) == adc);
      CHECK(pack_212(unpack_212(bytes, n)) == bytes);
    }
  }

  TEST_CASE("odd sample count") {
    const std::vector<int> adc = {5, -7, 2047};
    const auto bytes = pack_212(adc);
    CHECK(bytes.size() == 5);
    CHECK(unpack_212(bytes, 3) == adc);
  }

  TEST_CASE("truncated file names expected and actual byte counts") {
    const std::uint8_t b[] = {0x00, 0x00, 0x00, 0x00};
    try {
      unpack_212(b, 4);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string what = e.what();
      CHECK(what.find("6") != std::string::npos);
      CHECK(what.find("4") != std::string::npos);
    }
  }

  TEST_CASE("record 100 first sample in physical units") {
    const SignalRecord s = load_signal(kFixtures / "mitdb_head", "100", 0);
    CHECK(s.adc[0] == 995);
    CHECK(s.samples[0] == doctest::Approx(-0.145).epsilon(1e-12));
  }

  TEST_CASE("record 100 head matches reference tooling") {
    const auto ref = load_json(kFixtures / "mitdb_head/reference.json");
    for (std::size_t lead = 0; lead < 2; ++lead) {
      const SignalRecord s = load_signal(kFixtures / "mitdb_head", "100", lead);
      const auto adc = ref["adc"][lead].get<std::vector<int>>();
      const auto phys = ref["physical"][lead].get<std::vector<double>>();
      CHECK(s.adc == adc);
      for (std::size_t i = 0; i < phys.size(); ++i) CHECK(s.samples[i] == doctest::Approx(phys[i]));
    }
  }

  TEST_CASE("crafted records match reference tooling exactly") {
    const auto ref = load_json(kFixtures / "wfdb/reference.json");
    for (const std::string name : {"crafted1", "crafted2"}) {
      CAPTURE(name);
      const auto& r = ref[name];
      const RecordHeader h = load_header(kFixtures / "wfdb", name);
      CHECK(h.n_signals == r["n_sig"].get<int>());
      CHECK(h.n_samples == r["sig_len"].get<std::size_t>());
      CHECK(h.sampling_rate_hz == r["fs"].get<double>());
      std::size_t mismatches = 0;
      for (int lead = 0; lead < h.n_signals; ++lead) {
        const SignalRecord s = load_signal(kFixtures / "wfdb", name, static_cast<std::size_t>(lead));
        CHECK(h.signals[static_cast<std::size_t>(lead)].adc_gain == r["adc_gain"][lead].get<double>());
        CHECK(h.signals[static_cast<std::size_t>(lead)].adc_baseline == r["baseline"][lead].get<int>());
        const auto adc = r["adc"][lead].get<std::vector<int>>();
        const auto& phys = r["physical"][lead];
        REQUIRE(s.adc.size() == adc.size());
        for (std::size_t i = 0; i < adc.size(); ++i) {
          if (s.adc[i] != adc[i]) ++mismatches;
          if (phys[i].is_null() || std::isnan(phys[i].get<double>())) {
            if (!std::isnan(s.samples[i])) ++mismatches;
          } else if (std::abs(s.samples[i] - phys[i].get<double>()) > 1e-9) {
            ++mismatches;
          }
        }
      }
      CHECK(mismatches == 0);
    }
  }

  TEST_CASE("invalid samples are held at the last valid value") {
    std::vector<double> x = {std::nan(""), 1.0, std::nan(""), std::nan(""), 2.0};
    CHECK(hold_invalid_samples(x) == 3);
    CHECK(x == std::vector<double>{0.0, 1.0, 1.0, 1.0, 2.0});
  }
}

TEST_SUITE("annotations") {
  TEST_CASE("end marker alone") { CHECK(parse_annotations(words({0x0000})).entries.empty()); }

  TEST_CASE("one normal beat") {
    const auto list = parse_annotations(words({(1 << 10) | 23, 0x0000}));
    REQUIRE(list.entries.size() == 1);
    CHECK(list.entries[0].sample_index == 23);
    CHECK(list.entries[0].code == 1);
    CHECK(list.entries[0].beat_class == HeartbeatClass::N);
  }

  TEST_CASE("code mapping to classes") {
    CHECK(class_of_code(1) == HeartbeatClass::N);
    CHECK(class_of_code(2) == HeartbeatClass::LBBB);
    CHECK(class_of_code(3) == HeartbeatClass::RBBB);
    CHECK(class_of_code(5) == HeartbeatClass::PVC);
    CHECK(class_of_code(12) == HeartbeatClass::PB);
    CHECK_FALSE(class_of_code(8).has_value());  // A: beat, not selected
    CHECK(is_beat_code(8));
    CHECK_FALSE(is_beat_code(28));
  }

  TEST_CASE("crafted annotation file matches reference tooling") {
    const auto ref = load_json(kFixtures / "wfdb/reference.json")["crafted2_atr"];
    const AnnotationList list = load_annotations(kFixtures / "wfdb", "crafted2");
    const auto samples = ref["sample"].get<std::vector<std::size_t>>();
    REQUIRE(list.entries.size() == samples.size());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Annotation& a = list.entries[i];
      mismatches += a.sample_index != samples[i];
      mismatches += a.code != ref["code"][i].get<int>();
      mismatches += a.chan != ref["chan"][i].get<int>();
      mismatches += a.num != ref["num"][i].get<int>();
      mismatches += a.subtype != ref["subtype"][i].get<int>();
      mismatches += a.aux != ref["aux_note"][i].get<std::string>();
      mismatches += annotation_symbol(a.code) != ref["symbol"][i].get<std::string>();
    }
    CHECK(mismatches == 0);
  }

  TEST_CASE("dangling AUX payload reports a byte offset") {
    auto bytes = words({(1 << 10) | 5, (63 << 10) | 10});
    bytes.push_back('x');
    try {
      parse_annotations(bytes);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.position() == 2);
    }
  }

  TEST_CASE("truncated SKIP reports a byte offset") {
    const auto bytes = words({(1 << 10) | 5, (59 << 10), 0x0000});
    try {
      parse_annotations(bytes);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.position() == 2);
    }
  }

  TEST_CASE("SKIP adds its interval to the running time") {
    // SKIP 100000 then a beat 4 samples later.
    const auto list = parse_annotations(words({(59 << 10), 0x0001, 0x86A0, (1 << 10) | 4, 0}));
    REQUIRE(list.entries.size() == 1);
    CHECK(list.entries[0].sample_index == 100004);
  }

  TEST_CASE("encode/parse round trip with large gaps and modifiers") {
    AnnotationList list;
    Rng rng(3);
    std::size_t t = 0;
    for (int i = 0; i < 300; ++i) {
      Annotation a;
      t += 1 + rng.below(i % 50 == 0 ? 200000 : 900);
      a.sample_index = t;
      a.code = static_cast<int>(1 + rng.below(40));
      a.chan = rng.below(10) == 0 ? 1 : 0;
      a.subtype = rng.below(10) == 0 ? 2 : 0;
      a.num = static_cast<int>(rng.below(3));
      if (rng.below(20) == 0) a.aux = "(AFL";
      a.beat_class = class_of_code(a.code);
      list.entries.push_back(a);
    }
    const AnnotationList back = parse_annotations(encode_annotations(list));
    REQUIRE(back.entries.size() == list.entries.size());
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      CHECK(back.entries[i].sample_index == list.entries[i].sample_index);
      CHECK(back.entries[i].code == list.entries[i].code);
      CHECK(back.entries[i].chan == list.entries[i].chan);
      CHECK(back.entries[i].subtype == list.entries[i].subtype);
      CHECK(back.entries[i].num == list.entries[i].num);
      CHECK(back.entries[i].aux == list.entries[i].aux);
    }
  }

  TEST_CASE("sample indices never decrease") {
    const AnnotationList list = load_annotations(kFixtures / "wfdb", "crafted2");
    for (std::size_t i = 1; i < list.entries.size(); ++i)
      CHECK(list.entries[i].sample_index >= list.entries[i - 1].sample_index);
  }

  TEST_CASE("labeled beats keep channel 0 of the five classes") {
    const AnnotationList list = load_annotations(kFixtures / "wfdb", "crafted2");
    for (const BeatRef& b : labeled_beats("crafted2", list)) {
      bool found = false;
      for (const Annotation& a : list.entries)
        if (a.sample_index == b.sample_index && a.chan == 0 && a.beat_class == b.label) found = true;
      CHECK(found);
    }
  }
}

TEST_SUITE("inventory") {
  TEST_CASE("empty input gives an empty histogram") {
    CHECK(class_distribution(std::span<const AnnotationList>{}).empty());
  }

  TEST_CASE("three normal beats") {
    AnnotationList list;
    for (std::size_t t : {10u, 20u, 30u}) {
      Annotation a;
      a.sample_index = t;
      a.code = 1;
      list.entries.push_back(a);
    }
    const auto h = class_distribution(std::span(&list, 1));
    REQUIRE(h.size() == 1);
    CHECK(h[0].symbol == "N");
    CHECK(h[0].count == 3);
    CHECK(h[0].selected);
  }

  TEST_CASE("split of nine beats in three classes") {
    const auto beats = beats_of({{HeartbeatClass::N, 3}, {HeartbeatClass::PB, 3}, {HeartbeatClass::PVC, 3}});
    const DatasetSplit s = split_dataset(beats, SplitStrategy::StratifiedBeat, 1);
    CHECK(s.train.size() == 6);
    CHECK(s.test.size() == 3);
    for (HeartbeatClass c : {HeartbeatClass::N, HeartbeatClass::PB, HeartbeatClass::PVC}) {
      int tr = 0;
      for (std::size_t i : s.train) tr += beats[i].label == c;
      CHECK(tr == 2);
    }
  }

  TEST_CASE("split is deterministic for a seed") {
    const auto beats = beats_of({{HeartbeatClass::N, 50}, {HeartbeatClass::RBBB, 20}});
    const DatasetSplit a = split_dataset(beats, SplitStrategy::StratifiedBeat, 9);
    const DatasetSplit b = split_dataset(beats, SplitStrategy::StratifiedBeat, 9);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    const DatasetSplit c = split_dataset(beats, SplitStrategy::StratifiedBeat, 10);
    CHECK(c.train != a.train);
  }

  TEST_CASE("a class with fewer than three beats cannot be stratified") {
    const auto beats = beats_of({{HeartbeatClass::N, 9}, {HeartbeatClass::LBBB, 2}});
    CHECK_THROWS_AS(split_dataset(beats, SplitStrategy::StratifiedBeat, 1), InputError);
  }

  TEST_CASE("stratified ratio property on random class sizes") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<std::pair<HeartbeatClass, int>> counts;
      std::vector<BeatRef> beats;
      std::size_t t = 0;
      for (HeartbeatClass c : kAllClasses) {
        const int n = 3 + static_cast<int>(rng.below(400));
        for (int i = 0; i < n; ++i) beats.push_back({"r", t += 300, c});
      }
      const DatasetSplit s = split_dataset(beats, SplitStrategy::StratifiedBeat, 1 + static_cast<std::uint64_t>(trial));
      std::set<std::size_t> seen(s.train.begin(), s.train.end());
      for (std::size_t i : s.test) CHECK(seen.insert(i).second);
      CHECK(seen.size() == beats.size());
      for (HeartbeatClass c : kAllClasses) {
        double n = 0, tr = 0;
        for (const BeatRef& b : beats) n += b.label == c;
        for (std::size_t i : s.train) tr += beats[i].label == c;
        CHECK(std::abs(tr / n - 2.0 / 3.0) <= 1.0 / n + 1e-12);
      }
    }
  }

  TEST_CASE("by-record split keeps records whole") {
    std::vector<BeatRef> beats;
    for (int r = 0; r < 12; ++r) {
      const auto more = beats_of({{HeartbeatClass::N, 10 + r}}, "r" + std::to_string(r));
      beats.insert(beats.end(), more.begin(), more.end());
    }
    const DatasetSplit s = split_dataset(beats, SplitStrategy::ByRecord, 4);
    std::set<std::string> train_records, test_records;
    for (std::size_t i : s.train) train_records.insert(beats[i].record);
    for (std::size_t i : s.test) test_records.insert(beats[i].record);
    for (const auto& r : train_records) CHECK(test_records.count(r) == 0);
    CHECK(s.train.size() + s.test.size() == beats.size());
    CHECK(!s.train.empty());
    CHECK(!s.test.empty());
  }

  TEST_CASE("physical conversion inverts to adc") {
    const SignalRecord s = load_signal(kFixtures / "mitdb_head", "100", 1);
    const SignalSpec& sig = s.header.signals[1];
    for (std::size_t i = 0; i < s.adc.size(); ++i)
      CHECK(std::lround(s.samples[i] * sig.adc_gain + sig.adc_baseline) == s.adc[i]);
  }

  TEST_CASE("missing files name the data stage") {
    try {
      load_header(kFixtures / "wfdb", "nope");
      FAIL("expected MissingArtifact");
    } catch (const MissingArtifact& e) {
      CHECK(e.stage() == "data");
    }
  }
}
