#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hbc/error.hpp"
#include "hbc/pipeline.hpp"

using namespace hbc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("hbc_test_pipeline_" + std::string(name));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <class F>
std::string missing_stage(F&& f) {
  try {
    f();
  } catch (const MissingArtifact& e) {
    return e.stage();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("text round trip") {
    PipelineConfig c;
    c.data_dir = "/data/mitdb";
    c.out_dir = "runs/a";
    c.records = {"100", "207"};
    c.lead = 1;
    c.seed = 42;
    c.threads = 3;
    c.detector.r_threshold = 0.35;
    c.features = FeatureMode::Eight;
    c.rr = RrReference::TPeaks;
    c.preset = "M";
    c.presets = {"T", "L"};
    c.dropout = 0.1;
    c.train.epochs = 7;
    c.train.learning_rate = 0.0025;
    c.train.class_weights = true;
    c.scheme = QuantScheme::Int8Full;
    c.eval_scheme = QuantScheme::Fp16;
    c.calib_size = 64;
    c.ablation = true;
    const std::string text = config_to_text(c);
    const PipelineConfig back = config_from_text(text);
    CHECK(config_to_text(back) == text);
    CHECK(back.rr == RrReference::TPeaks);
    CHECK(back.records == c.records);
    CHECK(back.detector.r_threshold == 0.35);
    CHECK(back.train.learning_rate == 0.0025);
  }

  TEST_CASE("absent keys keep the base value; comments and blanks are ignored") {
    PipelineConfig base;
    base.preset = "S";
    const PipelineConfig c = config_from_text("# header\n\nseed = 9  # trailing\n", base);
    CHECK(c.seed == 9);
    CHECK(c.preset == "S");
  }

  TEST_CASE("errors carry the line number") {
    auto line_of = [](const char* text) -> std::size_t {
      try {
        config_from_text(text);
      } catch (const ParseError& e) {
        return e.position();
      }
      return 0;
    };
    CHECK(line_of("seed = 1\n\nbogus = 2\n") == 3);
    CHECK(line_of("seed = x\n") == 1);
    CHECK(line_of("seed = 1\nfeatures = nine\n") == 2);
    CHECK(line_of("features.rr = q\n") == 1);
    CHECK(line_of("no equals sign\n") == 1);
    CHECK(line_of("ablation = maybe\n") == 1);
  }

  TEST_CASE("model tag") {
    PipelineConfig c;
    c.preset = "L";
    CHECK(model_tag(c) == "L");
    c.features = FeatureMode::Six;
    CHECK(model_tag(c) == "L-six");
  }

  TEST_CASE("load from file") {
    const fs::path dir = scratch("load");
    std::ofstream(dir / "c.txt") << "preset = M\n";
    CHECK(load_config(dir / "c.txt").preset == "M");
    CHECK_THROWS_AS(load_config(dir / "absent.txt"), InputError);
  }
}

TEST_SUITE("stage preconditions") {
  TEST_CASE("stages name the artifact they are missing") {
    PipelineConfig c;
    c.out_dir = scratch("missing").string();
    c.data_dir = c.out_dir;
    CHECK(missing_stage([&] { run_ingest(c); }) == "data");
    CHECK(missing_stage([&] { run_denoise(c); }) == "ingest");
    CHECK(missing_stage([&] { run_detect(c); }) == "ingest");
    CHECK(missing_stage([&] { run_features(c); }) == "ingest");
    CHECK(missing_stage([&] { run_train(c); }) == "features");
    CHECK(missing_stage([&] { run_quantize(c); }) == "train");
    CHECK(missing_stage([&] { run_eval(c); }) == "features");
    CHECK(missing_stage([&] { run_benchmark(c); }) == "features");
  }

  TEST_CASE("data stages require a data directory") {
    PipelineConfig c;
    c.out_dir = scratch("nodata").string();
    CHECK_THROWS_AS(run_ingest(c), InputError);
  }
}

TEST_SUITE("signal files") {
  TEST_CASE("f64 round trip") {
    const fs::path dir = scratch("f64");
    const std::vector<double> v = {0.0, -1.5, 1e-300, 3.141592653589793};
    write_f64(dir / "x.f64", v);
    CHECK(read_f64(dir / "x.f64") == v);
    CHECK(fs::file_size(dir / "x.f64") == 32);
  }
}
