#pragma once

// Post-training quantization: FP16 weights, full INT8 (static weights and
// calibrated activations) and dynamic-range INT8, with an inference engine
// whose matrix products run in integer arithmetic.
//
// Weights use symmetric per-tensor scales (q in [−127, 127], zero point 0).
// Activations use affine 8-bit parameters, scale = (max − min) / 255 and
// zero point = round(−128 − min / scale), with the range widened to contain
// 0. Biases stay FP32 and the LSTM cell state is carried in FP32.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbc/nn.hpp"

namespace hbc {

enum class QuantScheme : std::uint32_t { Fp32 = 0, Fp16 = 1, Int8Full = 2, Drq = 3 };

std::string_view scheme_name(QuantScheme s);  // fp32, fp16, int8, drq
QuantScheme scheme_from_name(std::string_view name);
std::vector<QuantScheme> all_schemes();

inline constexpr float kMinScale = 1e-8f;

struct QuantParams {
  float scale = 1.0f;
  std::int32_t zero_point = 0;
};

// IEEE binary16 with round-to-nearest-even.
std::uint16_t float_to_half(float v);
float half_to_float(std::uint16_t h);

// scale = max|w| / 127 (floored at kMinScale), zero point 0.
QuantParams symmetric_params(std::span<const float> w);
std::int8_t quantize_symmetric(float w, const QuantParams& p);
std::vector<std::int8_t> quantize_symmetric(std::span<const float> w, const QuantParams& p);

QuantParams affine_params(double min, double max);
std::int8_t quantize_affine(double x, const QuantParams& p);

inline double dequantize(std::int32_t q, const QuantParams& p) {
  return static_cast<double>(p.scale) * (q - p.zero_point);
}

// Activation boundaries: every recurrent layer has an input and a hidden-state
// boundary, every dense layer an input boundary.
std::vector<std::string> boundary_names(const ModelConfig& config);

struct ActivationRange {
  double min = 0.0;
  double max = 0.0;
  bool seen = false;
};

struct Calibration {
  std::vector<ActivationRange> ranges;  // per boundary, widened to include 0
  std::size_t samples = 0;
};

// Running min/max over several batches.
class Calibrator {
 public:
  explicit Calibrator(const ModelParameters& model);
  void add_batch(std::span<const float> inputs, std::size_t n);
  Calibration result() const;  // throws InputError if no sample was added

 private:
  const ModelParameters* model_;
  Calibration acc_;
};

Calibration calibrate_activations(const ModelParameters& model, std::span<const float> inputs,
                                  std::size_t n, std::size_t batch = 64);

struct QuantTensor {
  QuantParams params;               // integer tensors only
  std::vector<std::int8_t> q;       // INT8 weight tensors
  std::vector<std::uint16_t> half;  // FP16 tensors
  std::vector<float> f32;           // FP32 tensors and INT8-scheme biases
};

struct QuantizedModel {
  QuantScheme scheme = QuantScheme::Fp32;
  ModelConfig config;
  std::vector<TensorInfo> tensors;
  std::vector<QuantTensor> data;          // parallel to tensors
  std::vector<QuantParams> activations;   // INT8_FULL only, per boundary
  std::vector<std::string> warnings;      // e.g. scale floors applied
  ModelParameters dequantized;            // float view of the stored weights

  bool integer() const { return scheme == QuantScheme::Int8Full || scheme == QuantScheme::Drq; }
};

QuantizedModel quantize_fp32(const ModelParameters& model);
// Throws NumericError listing tensors with |w| > 65504.
QuantizedModel quantize_fp16(const ModelParameters& model);
QuantizedModel quantize_int8_full(const ModelParameters& model, const Calibration& calibration);
QuantizedModel quantize_drq(const ModelParameters& model);
QuantizedModel quantize(const ModelParameters& model, QuantScheme scheme,
                        const Calibration* calibration = nullptr);

// n × 5 probabilities. Throws ShapeError if the stored blocks do not match
// the config or the scheme.
std::vector<float> quantized_infer(const QuantizedModel& qm, std::span<const float> inputs,
                                   std::size_t n, std::size_t batch = 256);

// The quantized file extends the model format: the header's scheme tag
// names the encoding; INT8 weight tensors are prefixed by f32 scale and i32
// zero point, FP16 tensors are raw binary16, biases of integer schemes stay
// f32; INT8_FULL appends u32 boundary count and (f32 scale, i32 zero point)
// per boundary.
std::vector<std::uint8_t> serialize_quantized(const QuantizedModel& qm);
QuantizedModel deserialize_quantized(std::span<const std::uint8_t> bytes);
void save_quantized(const std::string& path, const QuantizedModel& qm);
QuantizedModel load_quantized(const std::string& path);

enum class SizeConvention { WeightsOnly, FileSize };

std::size_t bytes_per_weight(QuantScheme s);
std::size_t model_size_bytes(const ModelParameters& model, SizeConvention convention);
std::size_t model_size_bytes(const QuantizedModel& qm, SizeConvention convention);

// "328 kB" / "4.77 MB" with a 1024 base; below 1 MB kB are shown whole.
std::string format_size(std::size_t bytes);
double kib(std::size_t bytes);
double mib(std::size_t bytes);

}  // namespace hbc
