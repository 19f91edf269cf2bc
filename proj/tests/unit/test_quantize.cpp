#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "hbc/error.hpp"
#include "hbc/quantize.hpp"
#include "hbc/rng.hpp"

using namespace hbc;

namespace {

// Value of a binary16 bit pattern from its fields.
double half_value(std::uint16_t h) {
  const int sign = (h >> 15) ? -1 : 1;
  const int exp = (h >> 10) & 0x1F;
  const int mant = h & 0x3FF;
  if (exp == 0) return sign * std::ldexp(mant, -24);
  return sign * std::ldexp(1024 + mant, exp - 25);
}

std::vector<float> random_inputs(std::size_t n, std::size_t len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> x(n * len);
  for (float& v : x) v = static_cast<float>(rng.normal());
  return x;
}

std::size_t file_size(const QuantizedModel& qm) { return model_size_bytes(qm, SizeConvention::FileSize); }

}  // namespace

TEST_SUITE("half") {
  TEST_CASE("representable and nearest values") {
    CHECK(half_to_float(float_to_half(1.0f)) == 1.0f);
    CHECK(half_to_float(float_to_half(0.1f)) == 0.0999755859375f);
    CHECK(half_to_float(float_to_half(65504.0f)) == 65504.0f);
    CHECK(std::isinf(half_to_float(float_to_half(1e6f))));
    CHECK(half_to_float(float_to_half(-0.0f)) == 0.0f);
  }

  TEST_CASE("decoding matches the field formula for every finite pattern") {
    for (std::uint32_t h = 0; h < 0x10000u; ++h) {
      if (((h >> 10) & 0x1F) == 0x1F) continue;
      const auto u = static_cast<std::uint16_t>(h);
      CHECK(static_cast<double>(half_to_float(u)) == half_value(u));
      CHECK(float_to_half(half_to_float(u)) == u);
    }
  }

  TEST_CASE("encoding picks the nearest neighbor, ties to even") {
    Rng rng(1);
    for (int trial = 0; trial < 20000; ++trial) {
      const float v = static_cast<float>(std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(40)) - 24));
      const std::uint16_t h = float_to_half(v);
      const double err = std::abs(half_value(h) - v);
      const double step = std::abs(half_value(static_cast<std::uint16_t>(h ^ 1)) - half_value(h));
      for (int d : {-1, 1}) {
        const auto nb = static_cast<std::uint16_t>((h & 0x7FFF) + d);
        if ((h & 0x7FFF) == 0 && d < 0) continue;
        const double alt = std::abs(half_value(static_cast<std::uint16_t>((h & 0x8000) | nb)) - v);
        CHECK(err <= alt);
        if (err == alt) CHECK((h & 1) == 0);
      }
      CHECK(err <= step);
    }
  }
}

TEST_SUITE("symmetric") {
  TEST_CASE("endpoints") {
    const std::vector<float> w = {-1.0f, 0.0f, 1.0f};
    const QuantParams p = symmetric_params(w);
    CHECK(p.scale == doctest::Approx(1.0 / 127));
    CHECK(p.zero_point == 0);
    CHECK(quantize_symmetric(w, p) == std::vector<std::int8_t>{-127, 0, 127});
  }

  TEST_CASE("round trip within half a step, exact at 0 and the extremes") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<float> w(257);
      for (float& v : w) v = static_cast<float>(rng.normal() * rng.uniform(0.01, 5.0));
      w[3] = 0.0f;
      const QuantParams p = symmetric_params(w);
      const auto q = quantize_symmetric(w, p);
      float big = 0.0f;
      for (float v : w) big = std::max(big, std::abs(v));
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double back = dequantize(q[i], p);
        CHECK(std::abs(back - w[i]) <= p.scale / 2.0 * (1 + 1e-6));
        if (std::abs(w[i]) == big) CHECK(std::abs(q[i]) == 127);
      }
      CHECK(q[3] == 0);
    }
  }

  TEST_CASE("ordering is preserved") {
    Rng rng(3);
    std::vector<float> w(500);
    for (float& v : w) v = static_cast<float>(rng.normal());
    std::sort(w.begin(), w.end());
    const auto q = quantize_symmetric(w, symmetric_params(w));
    for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i - 1] <= q[i]);
  }

  TEST_CASE("zero tensor floors the scale") {
    const std::vector<float> w(10, 0.0f);
    CHECK(symmetric_params(w).scale == kMinScale);
  }
}

TEST_SUITE("affine") {
  TEST_CASE("range widened to zero and endpoints map to the code range") {
    const QuantParams p = affine_params(0.5, 2.0);
    CHECK(p.scale == doctest::Approx(2.0 / 255));
    CHECK(p.zero_point == -128);
    CHECK(quantize_affine(0.0, p) == -128);
    CHECK(quantize_affine(2.0, p) == 127);
    // Rounding the zero point can push an endpoint one code inward, so the
    // error across the range is bounded by one step rather than half.
    const QuantParams n = affine_params(-1.0, 1.0);
    CHECK(quantize_affine(0.0, n) == n.zero_point);
    for (int k = -100; k <= 100; ++k) {
      const double x = k / 100.0;
      CHECK(std::abs(dequantize(quantize_affine(x, n), n) - x) <= n.scale * (1 + 1e-6));
    }
  }

  TEST_CASE("all-zero activations pass through as zeros") {
    const QuantParams p = affine_params(0.0, 0.0);
    CHECK(p.scale == kMinScale);
    CHECK(quantize_affine(0.0, p) == p.zero_point);
    CHECK(dequantize(quantize_affine(0.0, p), p) == 0.0);
  }
}

TEST_SUITE("calibration") {
  TEST_CASE("constant input") {
    const ModelParameters m = init_params(preset("T"), 1);
    for (float c : {0.7f, -1.3f}) {
      const std::vector<float> x(10 * 4, c);
      const Calibration cal = calibrate_activations(m, x, 4);
      CHECK(cal.ranges[0].min == doctest::Approx(std::min(0.0f, c)));
      CHECK(cal.ranges[0].max == doctest::Approx(std::max(0.0f, c)));
      CHECK(cal.samples == 4);
    }
  }

  TEST_CASE("two batches give the union of ranges") {
    const ModelParameters m = init_params(preset("T"), 2);
    const auto a = random_inputs(8, 10, 1), b = random_inputs(8, 10, 2);
    Calibrator both(m);
    both.add_batch(a, 8);
    both.add_batch(b, 8);
    const Calibration ca = calibrate_activations(m, a, 8), cb = calibrate_activations(m, b, 8);
    const Calibration cu = both.result();
    REQUIRE(cu.ranges.size() == boundary_names(m.config).size());
    for (std::size_t i = 0; i < cu.ranges.size(); ++i) {
      CHECK(cu.ranges[i].min == std::min(ca.ranges[i].min, cb.ranges[i].min));
      CHECK(cu.ranges[i].max == std::max(ca.ranges[i].max, cb.ranges[i].max));
    }
  }

  TEST_CASE("512 beats through preset T give finite ranges everywhere") {
    const ModelParameters m = init_params(preset("T"), 3);
    const auto x = random_inputs(512, 10, 3);
    const Calibration cal = calibrate_activations(m, x, 512);
    for (const ActivationRange& r : cal.ranges) {
      CHECK(std::isfinite(r.min));
      CHECK(std::isfinite(r.max));
      CHECK(r.min <= 0.0);
      CHECK(r.max >= 0.0);
    }
    CHECK(boundary_names(m.config).size() == 6);
  }

  TEST_CASE("empty calibration is an error") {
    const ModelParameters m = init_params(preset("T"), 1);
    CHECK_THROWS_AS(Calibrator(m).result(), InputError);
    CHECK_THROWS_AS(quantize(m, QuantScheme::Int8Full), InputError);
  }
}

TEST_SUITE("engine") {
  TEST_CASE("FP32 scheme is bitwise the float engine") {
    const ModelParameters m = init_params(preset("S"), 4);
    const auto x = random_inputs(40, 10, 4);
    CHECK(quantized_infer(quantize(m, QuantScheme::Fp32), x, 40) == predict(m, x, 40));
  }

  TEST_CASE("hand-quantized dense layer") {
    ModelConfig c;
    c.name = "hand";
    c.sequence_length = 1;
    c.layers = {LayerSpec::lstm(1), LayerSpec::dense(5, Activation::Softmax)};
    ModelParameters m = zero_params<float>(c);
    // LSTM W on a 1/64 grid with max 127/64, so the weight scale is exactly 1/64.
    const float lw[4] = {127.0f / 64, 32.0f / 64, 64.0f / 64, 96.0f / 64};
    const float lb[4] = {0.0f, 1.0f, 0.0f, 0.0f};
    const float dw[5] = {1.0f, 0.3f, -0.51f, 0.77f, -0.1f};
    const float db[5] = {0.1f, 0.0f, -0.2f, 0.05f, 0.0f};
    std::copy(lw, lw + 4, m.tensor(0).begin());
    std::fill(m.tensor(1).begin(), m.tensor(1).end(), 0.25f);
    std::copy(lb, lb + 4, m.tensor(2).begin());
    std::copy(dw, dw + 5, m.tensor(3).begin());
    std::copy(db, db + 5, m.tensor(4).begin());

    const QuantizedModel qm = quantize(m, QuantScheme::Drq);
    CHECK(qm.data[0].q == std::vector<std::int8_t>{127, 32, 64, 96});
    CHECK(qm.data[0].params.scale == 1.0f / 64);
    CHECK(qm.data[3].q == std::vector<std::int8_t>{127, 38, -65, 98, -13});

    // x = 255/256: row range [0, x], scale 1/256, zero point -128, code 127.
    // Each accumulator is (127 + 128) * wq, so the gates are b + x * W exactly.
    const float x = 255.0f / 256;
    auto sig = [](float v) { return 1.0f / (1.0f + std::exp(-v)); };
    const float ig = sig(lb[0] + x * lw[0]), fg = sig(lb[1] + x * lw[1]);
    const float gg = std::tanh(lb[2] + x * lw[2]), og = sig(lb[3] + x * lw[3]);
    const float cell = fg * 0.0f + ig * gg;
    const float h = og * std::tanh(cell);
    REQUIRE(h > 0.0f);
    // Dense input row [h]: range [0, h], zero point -128, code 127.
    const double hs = static_cast<double>(static_cast<float>(h / 255.0));
    const double ws = static_cast<double>(1.0f / 127.0f);
    const int wq[5] = {127, 38, -65, 98, -13};
    double logits[5], mx = -1e9, z = 0.0;
    for (int j = 0; j < 5; ++j) {
      logits[j] = db[j] + static_cast<double>(static_cast<float>(255.0 * wq[j] * (hs * ws)));
      mx = std::max(mx, logits[j]);
    }
    for (double& v : logits) z += (v = std::exp(v - mx));
    const std::vector<float> in = {x};
    const auto probs = quantized_infer(qm, in, 1);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(probs[static_cast<std::size_t>(j)] - logits[j] / z) < 1e-6);
    // The float model disagrees, so the integer path was exercised.
    const auto fp = predict(m, in, 1);
    double diff = 0.0;
    for (int j = 0; j < 5; ++j) diff += std::abs(fp[static_cast<std::size_t>(j)] - probs[static_cast<std::size_t>(j)]);
    CHECK(diff > 1e-6);
  }

  TEST_CASE("quantized outputs stay close to FP32 on random inputs") {
    const ModelParameters m = init_params(preset("T"), 5);
    const auto x = random_inputs(300, 10, 5);
    const auto ref = argmax_rows(predict(m, x, 300));
    const Calibration cal = calibrate_activations(m, x, 300);
    for (QuantScheme s : {QuantScheme::Fp16, QuantScheme::Drq, QuantScheme::Int8Full}) {
      const auto pred = argmax_rows(quantized_infer(quantize(m, s, &cal), x, 300));
      std::size_t agree = 0;
      for (std::size_t i = 0; i < ref.size(); ++i) agree += pred[i] == ref[i];
      CAPTURE(scheme_name(s));
      CHECK(agree >= 270);
    }
  }

  TEST_CASE("FP16 overflow names the tensor") {
    ModelParameters m = init_params(preset("T"), 6);
    m.tensor(7)[0] = 1e5f;
    try {
      quantize(m, QuantScheme::Fp16);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find(m.tensors[7].name) != std::string::npos);
    }
  }
}

TEST_SUITE("sizes") {
  TEST_CASE("published memory strings") {
    CHECK(format_size(model_size_bytes(init_params(preset("T"), 1), SizeConvention::WeightsOnly)) == "328 kB");
    CHECK(format_size(model_size_bytes(init_params(preset("S"), 1), SizeConvention::WeightsOnly)) == "585 kB");
    CHECK(format_size(model_size_bytes(init_params(preset("L"), 1), SizeConvention::WeightsOnly)) == "4.77 MB");
    CHECK(kib(83973 * 4) == doctest::Approx(328.02).epsilon(1e-4));
    CHECK(kib(149765 * 4) == doctest::Approx(585.02).epsilon(1e-4));
  }

  TEST_CASE("file size ordering for every preset") {
    for (const auto& name : preset_names()) {
      CAPTURE(name);
      const ModelParameters m = init_params(preset(name), 1);
      const auto x = random_inputs(16, 10, 1);
      const Calibration cal = calibrate_activations(m, x, 16);
      const std::size_t f32 = file_size(quantize(m, QuantScheme::Fp32));
      const std::size_t f16 = file_size(quantize(m, QuantScheme::Fp16));
      const std::size_t i8 = file_size(quantize(m, QuantScheme::Int8Full, &cal));
      const std::size_t drq = file_size(quantize(m, QuantScheme::Drq));
      CHECK(f32 == model_size_bytes(m, SizeConvention::FileSize));
      CHECK(f32 > f16);
      CHECK(f16 > i8);
      CHECK(std::abs(static_cast<double>(drq) - static_cast<double>(i8)) <= 0.05 * static_cast<double>(i8));
      const double half_ratio = static_cast<double>(f16) / static_cast<double>(f32);
      CHECK(half_ratio >= 0.5);
      CHECK(half_ratio <= 0.65);
      if (name == "L") CHECK(static_cast<double>(i8) / static_cast<double>(f32) <= 0.30);
    }
  }
}

TEST_SUITE("files") {
  TEST_CASE("every scheme round trips") {
    const ModelParameters m = init_params(preset("T"), 7);
    const auto x = random_inputs(20, 10, 7);
    const Calibration cal = calibrate_activations(m, x, 20);
    const auto path = (std::filesystem::temp_directory_path() / "hbc_test_quant.bin").string();
    for (QuantScheme s : all_schemes()) {
      CAPTURE(scheme_name(s));
      const QuantizedModel qm = quantize(m, s, &cal);
      save_quantized(path, qm);
      const QuantizedModel back = load_quantized(path);
      CHECK(back.scheme == s);
      CHECK(back.config == qm.config);
      CHECK(back.dequantized.values == qm.dequantized.values);
      CHECK(quantized_infer(back, x, 20) == quantized_infer(qm, x, 20));
      CHECK(serialize_quantized(back) == serialize_quantized(qm));
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("truncation and scheme mix-ups are rejected") {
    const ModelParameters m = init_params(preset("T"), 8);
    auto bytes = serialize_quantized(quantize(m, QuantScheme::Drq));
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(deserialize_quantized(bytes), ParseError);
    CHECK_THROWS_AS(deserialize_model(serialize_quantized(quantize(m, QuantScheme::Fp16))), ParseError);
    CHECK(deserialize_quantized(serialize_model(m)).scheme == QuantScheme::Fp32);
    CHECK_THROWS_AS(load_quantized("/nonexistent/q.bin"), MissingArtifact);
  }

  TEST_CASE("scheme names") {
    for (QuantScheme s : all_schemes()) CHECK(scheme_from_name(scheme_name(s)) == s);
    CHECK_THROWS_AS(scheme_from_name("int4"), InputError);
  }
}
