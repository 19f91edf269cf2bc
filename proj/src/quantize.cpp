#include "hbc/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hbc/bytes.hpp"
#include "hbc/error.hpp"
#include "hbc/kernels.hpp"
#include "hbc/textio.hpp"

namespace hbc {

std::string_view scheme_name(QuantScheme s) {
  switch (s) {
    case QuantScheme::Fp32: return "fp32";
    case QuantScheme::Fp16: return "fp16";
    case QuantScheme::Int8Full: return "int8";
    case QuantScheme::Drq: return "drq";
  }
  return "?";
}

QuantScheme scheme_from_name(std::string_view name) {
  if (name == "fp32") return QuantScheme::Fp32;
  if (name == "fp16") return QuantScheme::Fp16;
  if (name == "int8") return QuantScheme::Int8Full;
  if (name == "drq") return QuantScheme::Drq;
  throw InputError("unknown quantization scheme '" + std::string(name) + "' (fp32|fp16|int8|drq)");
}

std::vector<QuantScheme> all_schemes() {
  return {QuantScheme::Fp32, QuantScheme::Fp16, QuantScheme::Int8Full, QuantScheme::Drq};
}

std::uint16_t float_to_half(float v) {
  std::uint32_t x;
  std::memcpy(&x, &v, 4);
  const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t exp = (x >> 23) & 0xFFu;
  std::uint32_t mant = x & 0x7FFFFFu;
  if (exp == 0xFF) return static_cast<std::uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0u));
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7C00u);
  if (e <= 0) {
    if (e < -10) return sign;
    mant |= 0x800000u;
    const auto shift = static_cast<std::uint32_t>(14 - e);
    std::uint32_t h = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }
  std::uint32_t h = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
  return static_cast<std::uint16_t>(sign | h);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1Fu;
  std::uint32_t mant = h & 0x3FFu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      bits = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3FFu) << 13);
    }
  } else if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

QuantParams symmetric_params(std::span<const float> w) {
  float m = 0.0f;
  for (float v : w) m = std::max(m, std::abs(v));
  return {std::max(m / 127.0f, kMinScale), 0};
}

std::int8_t quantize_symmetric(float w, const QuantParams& p) {
  const double q = std::nearbyint(static_cast<double>(w) / static_cast<double>(p.scale));
  return static_cast<std::int8_t>(std::clamp(q, -127.0, 127.0));
}

std::vector<std::int8_t> quantize_symmetric(std::span<const float> w, const QuantParams& p) {
  std::vector<std::int8_t> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_symmetric(w[i], p);
  return out;
}

QuantParams affine_params(double min, double max) {
  min = std::min(min, 0.0);
  max = std::max(max, 0.0);
  const float scale = std::max(static_cast<float>((max - min) / 255.0), kMinScale);
  const double zp = std::nearbyint(-128.0 - min / static_cast<double>(scale));
  return {scale, static_cast<std::int32_t>(std::clamp(zp, -128.0, 127.0))};
}

std::int8_t quantize_affine(double x, const QuantParams& p) {
  const double q = std::nearbyint(x / static_cast<double>(p.scale)) + p.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

std::vector<std::string> boundary_names(const ModelConfig& config) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerKind k = config.layers[i].kind;
    const std::string prefix = "layer" + std::to_string(i);
    if (k == LayerKind::Lstm || k == LayerKind::BiLstm) {
      out.push_back(prefix + ".input");
      out.push_back(prefix + ".hidden");
    } else if (k == LayerKind::Dense) {
      out.push_back(prefix + ".input");
    }
  }
  return out;
}

namespace {

enum class EngineMode { Observe, Static, Dynamic };

// Eval-mode forward pass where every matrix product goes through linear().
// Observe: float weights, records activation ranges.
// Static / Dynamic: int8 weights and activations, int32 accumulation.
class Engine {
 public:
  Engine(EngineMode mode, const ModelConfig& config, const ModelParameters* fp,
         const QuantizedModel* qm, Calibration* calib)
      : mode_(mode), config_(config), fp_(fp), qm_(qm), calib_(calib) {}

  void forward(std::span<const float> inputs, std::size_t batch, std::vector<float>& probs) {
    const auto steps = static_cast<std::size_t>(config_.sequence_length);
    const auto in_w0 = static_cast<std::size_t>(config_.input_width);
    std::vector<float> cur(inputs.size());
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t k = 0; k < in_w0; ++k)
          cur[(t * batch + r) * in_w0 + k] = inputs[(r * steps + t) * in_w0 + k];

    int last_rec = -1;
    for (std::size_t i = 0; i < config_.layers.size(); ++i)
      if (is_recurrent(config_.layers[i].kind)) last_rec = static_cast<int>(i);

    std::size_t width = in_w0;
    std::size_t tensor = 0;
    std::size_t boundary = 0;
    std::vector<float> next;
    for (std::size_t i = 0; i < config_.layers.size(); ++i) {
      const LayerSpec& l = config_.layers[i];
      if (l.kind == LayerKind::Dropout) continue;
      const auto h = static_cast<std::size_t>(l.units);
      if (is_recurrent(l.kind)) {
        const std::size_t dirs = l.kind == LayerKind::BiLstm ? 2 : 1;
        const bool out_seq = static_cast<int>(i) != last_rec;
        const std::size_t out_w = dirs * h;
        next.assign((out_seq ? steps : 1) * batch * out_w, 0.0f);
        const std::size_t b_in = boundary++;
        const std::size_t b_hid = boundary++;
        const std::size_t g4 = 4 * h;
        std::vector<float> gates(batch * g4), c(batch * h), hs(batch * h);
        for (std::size_t d = 0; d < dirs; ++d) {
          const std::size_t tw = tensor++, tu = tensor++, tb = tensor++;
          const float* bias = bias_of(tb);
          std::fill(c.begin(), c.end(), 0.0f);
          std::fill(hs.begin(), hs.end(), 0.0f);
          for (std::size_t s = 0; s < steps; ++s) {
            const std::size_t pos = d == 0 ? s : steps - 1 - s;
            for (std::size_t r = 0; r < batch; ++r) std::copy(bias, bias + g4, gates.data() + r * g4);
            linear(b_in, cur.data() + pos * batch * width, batch, width, tw, g4, gates.data());
            if (s > 0) linear(b_hid, hs.data(), batch, h, tu, g4, gates.data());
            for (std::size_t r = 0; r < batch; ++r) {
              const float* a = gates.data() + r * g4;
              for (std::size_t j = 0; j < h; ++j) {
                const float ig = sigmoid(a[j]);
                const float fg = sigmoid(a[h + j]);
                const float gg = std::tanh(a[2 * h + j]);
                const float og = sigmoid(a[3 * h + j]);
                float& cv = c[r * h + j];
                cv = fg * cv + ig * gg;
                hs[r * h + j] = og * std::tanh(cv);
              }
            }
            if (out_seq)
              for (std::size_t r = 0; r < batch; ++r)
                std::copy(hs.begin() + static_cast<std::ptrdiff_t>(r * h),
                          hs.begin() + static_cast<std::ptrdiff_t>((r + 1) * h),
                          next.begin() + static_cast<std::ptrdiff_t>((pos * batch + r) * out_w + d * h));
          }
          if (!out_seq)
            for (std::size_t r = 0; r < batch; ++r)
              std::copy(hs.begin() + static_cast<std::ptrdiff_t>(r * h),
                        hs.begin() + static_cast<std::ptrdiff_t>((r + 1) * h),
                        next.begin() + static_cast<std::ptrdiff_t>(r * out_w + d * h));
        }
        width = out_w;
      } else {
        const std::size_t tw = tensor++, tb = tensor++;
        next.assign(batch * h, 0.0f);
        const float* bias = bias_of(tb);
        for (std::size_t r = 0; r < batch; ++r) std::copy(bias, bias + h, next.data() + r * h);
        linear(boundary++, cur.data(), batch, width, tw, h, next.data());
        if (l.activation == Activation::Relu) {
          for (float& v : next) v = v > 0.0f ? v : 0.0f;
        } else if (l.activation == Activation::Tanh) {
          for (float& v : next) v = std::tanh(v);
        } else if (l.activation == Activation::Softmax) {
          for (std::size_t r = 0; r < batch; ++r) {
            float* row = next.data() + r * h;
            const float m = *std::max_element(row, row + h);
            float sum = 0.0f;
            for (std::size_t j = 0; j < h; ++j) {
              row[j] = std::exp(row[j] - m);
              sum += row[j];
            }
            for (std::size_t j = 0; j < h; ++j) row[j] /= sum;
          }
        }
        width = h;
      }
      for (float v : next)
        if (!std::isfinite(v))
          throw NumericError("non-finite activation in layer " + std::to_string(i));
      cur.swap(next);
    }
    probs = std::move(cur);
  }

 private:
  static bool is_recurrent(LayerKind k) { return k == LayerKind::Lstm || k == LayerKind::BiLstm; }
  static float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

  const float* bias_of(std::size_t t) const {
    if (mode_ == EngineMode::Observe) return fp_->tensor(t).data();
    return qm_->data[t].f32.data();
  }

  // out[rows × n] += x[rows × k] · W[k × n]
  void linear(std::size_t boundary, const float* x, std::size_t rows, std::size_t k,
              std::size_t tensor, std::size_t n, float* out) {
    if (mode_ == EngineMode::Observe) {
      ActivationRange& range = calib_->ranges[boundary];
      for (std::size_t i = 0; i < rows * k; ++i) {
        if (!range.seen) {
          range.min = range.max = x[i];
          range.seen = true;
        }
        range.min = std::min(range.min, static_cast<double>(x[i]));
        range.max = std::max(range.max, static_cast<double>(x[i]));
      }
      kernels::matmul_acc(x, fp_->tensor(tensor).data(), out, rows, k, n);
      return;
    }
    const QuantTensor& w = qm_->data[tensor];
    row_params_.resize(rows);
    if (mode_ == EngineMode::Static) {
      std::fill(row_params_.begin(), row_params_.end(), qm_->activations[boundary]);
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        const float* row = x + r * k;
        const auto [lo, hi] = std::minmax_element(row, row + k);
        row_params_[r] = affine_params(*lo, *hi);
      }
    }
    xq_.resize(rows * k);
    zp_.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      zp_[r] = row_params_[r].zero_point;
      for (std::size_t j = 0; j < k; ++j) xq_[r * k + j] = quantize_affine(x[r * k + j], row_params_[r]);
    }
    acc_.assign(rows * n, 0);
    kernels::matmul_i8(xq_.data(), zp_, w.q.data(), acc_.data(), rows, k, n);
    for (std::size_t r = 0; r < rows; ++r) {
      const double s = static_cast<double>(row_params_[r].scale) * static_cast<double>(w.params.scale);
      for (std::size_t j = 0; j < n; ++j)
        out[r * n + j] += static_cast<float>(static_cast<double>(acc_[r * n + j]) * s);
    }
  }

  EngineMode mode_;
  const ModelConfig& config_;
  const ModelParameters* fp_;
  const QuantizedModel* qm_;
  Calibration* calib_;
  std::vector<QuantParams> row_params_;
  std::vector<std::int8_t> xq_;
  std::vector<std::int32_t> zp_;
  std::vector<std::int32_t> acc_;
};

QuantizedModel base_model(const ModelParameters& model, QuantScheme scheme) {
  model.config.validate();
  if (model.values.size() != count_params(model.config))
    throw ShapeError("parameter vector does not match the model config");
  QuantizedModel qm;
  qm.scheme = scheme;
  qm.config = model.config;
  qm.tensors = model.tensors;
  qm.data.resize(model.tensors.size());
  return qm;
}

// Fills the INT8 weight blocks and FP32 biases shared by INT8_FULL and DRQ.
void quantize_weights_int8(const ModelParameters& model, QuantizedModel& qm) {
  for (std::size_t t = 0; t < model.tensors.size(); ++t) {
    const auto w = model.tensor(t);
    QuantTensor& q = qm.data[t];
    if (model.tensors[t].is_bias) {
      q.f32.assign(w.begin(), w.end());
      continue;
    }
    q.params = symmetric_params(w);
    if (q.params.scale == kMinScale)
      qm.warnings.push_back(model.tensors[t].name + ": zero range, scale floored at 1e-8");
    q.q = quantize_symmetric(w, q.params);
  }
}

void rebuild_dequantized(QuantizedModel& qm) {
  qm.dequantized = zero_params<float>(qm.config);
  for (std::size_t t = 0; t < qm.tensors.size(); ++t) {
    auto out = qm.dequantized.tensor(t);
    const QuantTensor& q = qm.data[t];
    if (!q.f32.empty()) {
      std::copy(q.f32.begin(), q.f32.end(), out.begin());
    } else if (!q.half.empty()) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = half_to_float(q.half[i]);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(dequantize(q.q[i], q.params));
    }
  }
}

void check_blocks(const QuantizedModel& qm) {
  if (qm.tensors.size() != qm.data.size()) throw ShapeError("quantized model: block count mismatch");
  for (std::size_t t = 0; t < qm.tensors.size(); ++t) {
    const QuantTensor& q = qm.data[t];
    const std::size_t n = qm.tensors[t].size;
    bool ok = false;
    switch (qm.scheme) {
      case QuantScheme::Fp32: ok = q.f32.size() == n; break;
      case QuantScheme::Fp16: ok = q.half.size() == n; break;
      case QuantScheme::Int8Full:
      case QuantScheme::Drq:
        ok = qm.tensors[t].is_bias ? q.f32.size() == n : q.q.size() == n;
        break;
    }
    if (!ok)
      throw ShapeError("tensor " + qm.tensors[t].name + " does not match scheme " +
                       std::string(scheme_name(qm.scheme)));
  }
  if (qm.scheme == QuantScheme::Int8Full &&
      qm.activations.size() != boundary_names(qm.config).size())
    throw ShapeError("INT8 model lacks activation parameters for every boundary");
}

}  // namespace

Calibrator::Calibrator(const ModelParameters& model) : model_(&model) {
  acc_.ranges.resize(boundary_names(model.config).size());
}

void Calibrator::add_batch(std::span<const float> inputs, std::size_t n) {
  if (n == 0) return;
  Engine engine(EngineMode::Observe, model_->config, model_, nullptr, &acc_);
  std::vector<float> probs;
  engine.forward(inputs, n, probs);
  acc_.samples += n;
}

Calibration Calibrator::result() const {
  if (acc_.samples == 0) throw InputError("calibration set is empty");
  Calibration c = acc_;
  for (ActivationRange& r : c.ranges) {
    r.min = std::min(r.min, 0.0);
    r.max = std::max(r.max, 0.0);
    r.seen = true;
  }
  return c;
}

Calibration calibrate_activations(const ModelParameters& model, std::span<const float> inputs,
                                  std::size_t n, std::size_t batch) {
  const auto len = static_cast<std::size_t>(model.config.sequence_length * model.config.input_width);
  if (n == 0) throw InputError("calibration set is empty");
  if (inputs.size() != n * len) throw ShapeError("calibration input size mismatch");
  Calibrator cal(model);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t b = std::min(batch, n - start);
    cal.add_batch(inputs.subspan(start * len, b * len), b);
  }
  return cal.result();
}

QuantizedModel quantize_fp32(const ModelParameters& model) {
  QuantizedModel qm = base_model(model, QuantScheme::Fp32);
  for (std::size_t t = 0; t < model.tensors.size(); ++t) {
    const auto w = model.tensor(t);
    qm.data[t].f32.assign(w.begin(), w.end());
  }
  qm.dequantized = model;
  return qm;
}

QuantizedModel quantize_fp16(const ModelParameters& model) {
  QuantizedModel qm = base_model(model, QuantScheme::Fp16);
  std::string overflow;
  for (std::size_t t = 0; t < model.tensors.size(); ++t) {
    const auto w = model.tensor(t);
    bool bad = false;
    auto& half = qm.data[t].half;
    half.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!(std::abs(w[i]) <= 65504.0f)) bad = true;
      half[i] = float_to_half(w[i]);
    }
    if (bad) overflow += (overflow.empty() ? "" : ", ") + model.tensors[t].name;
  }
  if (!overflow.empty()) throw NumericError("FP16 overflow (|w| > 65504) in: " + overflow);
  rebuild_dequantized(qm);
  return qm;
}

QuantizedModel quantize_int8_full(const ModelParameters& model, const Calibration& calibration) {
  QuantizedModel qm = base_model(model, QuantScheme::Int8Full);
  const auto names = boundary_names(model.config);
  if (calibration.ranges.size() != names.size())
    throw ShapeError("calibration does not match the model's activation boundaries");
  quantize_weights_int8(model, qm);
  for (std::size_t b = 0; b < names.size(); ++b) {
    const ActivationRange& r = calibration.ranges[b];
    const QuantParams p = affine_params(r.min, r.max);
    if (p.scale == kMinScale) qm.warnings.push_back(names[b] + ": zero range, scale floored at 1e-8");
    qm.activations.push_back(p);
  }
  rebuild_dequantized(qm);
  return qm;
}

QuantizedModel quantize_drq(const ModelParameters& model) {
  QuantizedModel qm = base_model(model, QuantScheme::Drq);
  quantize_weights_int8(model, qm);
  rebuild_dequantized(qm);
  return qm;
}

QuantizedModel quantize(const ModelParameters& model, QuantScheme scheme,
                        const Calibration* calibration) {
  switch (scheme) {
    case QuantScheme::Fp32: return quantize_fp32(model);
    case QuantScheme::Fp16: return quantize_fp16(model);
    case QuantScheme::Int8Full:
      if (!calibration) throw InputError("INT8 quantization needs a calibration");
      return quantize_int8_full(model, *calibration);
    case QuantScheme::Drq: return quantize_drq(model);
  }
  throw InputError("unknown scheme");
}

std::vector<float> quantized_infer(const QuantizedModel& qm, std::span<const float> inputs,
                                   std::size_t n, std::size_t batch) {
  check_blocks(qm);
  const auto len = static_cast<std::size_t>(qm.config.sequence_length * qm.config.input_width);
  if (inputs.size() != n * len) throw ShapeError("quantized_infer: input size mismatch");
  if (!qm.integer()) return predict(qm.dequantized, inputs, n, batch);
  const EngineMode mode = qm.scheme == QuantScheme::Int8Full ? EngineMode::Static : EngineMode::Dynamic;
  Engine engine(mode, qm.config, nullptr, &qm, nullptr);
  std::vector<float> out(n * kNumClasses);
  std::vector<float> probs;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t b = std::min(batch, n - start);
    engine.forward(inputs.subspan(start * len, b * len), b, probs);
    std::copy(probs.begin(), probs.end(), out.begin() + static_cast<std::ptrdiff_t>(start * kNumClasses));
  }
  return out;
}

std::vector<std::uint8_t> serialize_quantized(const QuantizedModel& qm) {
  check_blocks(qm);
  ByteWriter w;
  w.bytes(encode_model_header(qm.config, static_cast<std::uint32_t>(qm.scheme)));
  for (std::size_t t = 0; t < qm.tensors.size(); ++t) {
    const QuantTensor& q = qm.data[t];
    switch (qm.scheme) {
      case QuantScheme::Fp32:
        for (float v : q.f32) w.f32(v);
        break;
      case QuantScheme::Fp16:
        for (std::uint16_t v : q.half) w.u16(v);
        break;
      case QuantScheme::Int8Full:
      case QuantScheme::Drq:
        if (qm.tensors[t].is_bias) {
          for (float v : q.f32) w.f32(v);
        } else {
          w.f32(q.params.scale);
          w.i32(q.params.zero_point);
          for (std::int8_t v : q.q) w.u8(static_cast<std::uint8_t>(v));
        }
        break;
    }
  }
  if (qm.scheme == QuantScheme::Int8Full) {
    w.u32(static_cast<std::uint32_t>(qm.activations.size()));
    for (const QuantParams& p : qm.activations) {
      w.f32(p.scale);
      w.i32(p.zero_point);
    }
  }
  return w.take();
}

QuantizedModel deserialize_quantized(std::span<const std::uint8_t> bytes) {
  const ModelFileHeader h = decode_model_header(bytes);
  if (h.scheme > 3) throw ParseError("unknown scheme tag " + std::to_string(h.scheme), 12);
  QuantizedModel qm;
  qm.scheme = static_cast<QuantScheme>(h.scheme);
  qm.config = h.config;
  qm.tensors = tensor_layout(h.config);
  qm.data.resize(qm.tensors.size());
  ByteReader r(bytes, h.payload_offset);
  for (std::size_t t = 0; t < qm.tensors.size(); ++t) {
    const TensorInfo& info = qm.tensors[t];
    QuantTensor& q = qm.data[t];
    const std::string what = "tensor " + info.name;
    switch (qm.scheme) {
      case QuantScheme::Fp32:
        r.need(4 * info.size, what);
        q.f32.resize(info.size);
        for (float& v : q.f32) v = r.f32(what);
        break;
      case QuantScheme::Fp16:
        r.need(2 * info.size, what);
        q.half.resize(info.size);
        for (std::uint16_t& v : q.half) v = r.u16(what);
        break;
      case QuantScheme::Int8Full:
      case QuantScheme::Drq:
        if (info.is_bias) {
          r.need(4 * info.size, what);
          q.f32.resize(info.size);
          for (float& v : q.f32) v = r.f32(what);
        } else {
          r.need(8 + info.size, what);
          q.params.scale = r.f32(what);
          q.params.zero_point = r.i32(what);
          const auto raw = r.bytes(info.size, what);
          q.q.resize(info.size);
          for (std::size_t i = 0; i < info.size; ++i) q.q[i] = static_cast<std::int8_t>(raw[i]);
        }
        break;
    }
  }
  if (qm.scheme == QuantScheme::Int8Full) {
    const std::uint32_t count = r.u32("activation parameter count");
    for (std::uint32_t b = 0; b < count; ++b) {
      QuantParams p;
      p.scale = r.f32("activation parameters");
      p.zero_point = r.i32("activation parameters");
      qm.activations.push_back(p);
    }
  }
  if (r.remaining() != 0)
    throw ParseError(std::to_string(r.remaining()) + " trailing bytes in quantized model", r.position());
  check_blocks(qm);
  rebuild_dequantized(qm);
  return qm;
}

void save_quantized(const std::string& path, const QuantizedModel& qm) {
  const auto bytes = serialize_quantized(qm);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

QuantizedModel load_quantized(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open quantized model " + path, "quantize");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_quantized(bytes);
}

std::size_t bytes_per_weight(QuantScheme s) {
  switch (s) {
    case QuantScheme::Fp32: return 4;
    case QuantScheme::Fp16: return 2;
    case QuantScheme::Int8Full:
    case QuantScheme::Drq: return 1;
  }
  return 4;
}

std::size_t model_size_bytes(const ModelParameters& model, SizeConvention convention) {
  if (convention == SizeConvention::WeightsOnly) return 4 * count_params(model.config);
  return serialize_model(model).size();
}

std::size_t model_size_bytes(const QuantizedModel& qm, SizeConvention convention) {
  if (convention == SizeConvention::WeightsOnly)
    return bytes_per_weight(qm.scheme) * count_params(qm.config);
  return serialize_quantized(qm).size();
}

double kib(std::size_t bytes) { return static_cast<double>(bytes) / 1024.0; }
double mib(std::size_t bytes) { return static_cast<double>(bytes) / (1024.0 * 1024.0); }

std::string format_size(std::size_t bytes) {
  if (bytes < 1024u * 1024u) return format_fixed(kib(bytes), 0) + " kB";
  return format_fixed(mib(bytes), 2) + " MB";
}

}  // namespace hbc
