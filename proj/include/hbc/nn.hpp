#pragma once

// Dense / LSTM / Bi-LSTM networks with hand-written forward and backward
// passes, a mini-batch trainer, parameter and FLOP accounting.
//
// Canonical parameter order, used by the flat parameter vector and by model
// files: layers in stack order; within a recurrent direction the input kernel
// W (in × 4H), the recurrent kernel U (H × 4H) and the bias b (4H), with gate
// blocks ordered i, f, g, o along the 4H axis; a Bi-LSTM stores its forward
// direction before its backward one. Dense layers store W (in × out) then b.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbc/wfdb.hpp"

namespace hbc {

enum class LayerKind { Lstm, BiLstm, Dropout, Dense };
enum class Activation { Tanh, Relu, Softmax, Linear };

std::string_view layer_kind_name(LayerKind k);
std::string_view activation_name(Activation a);

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int units = 0;
  double dropout = 0.0;
  Activation activation = Activation::Linear;  // dense layers only
  bool frozen = false;                         // no gradient, no update

  static LayerSpec lstm(int units) { return {LayerKind::Lstm, units, 0.0, Activation::Tanh}; }
  static LayerSpec bilstm(int units) { return {LayerKind::BiLstm, units, 0.0, Activation::Tanh}; }
  static LayerSpec drop(double p) { return {LayerKind::Dropout, 0, p, Activation::Linear}; }
  static LayerSpec dense(int units, Activation a) { return {LayerKind::Dense, units, 0.0, a}; }
  bool operator==(const LayerSpec&) const = default;
};

struct ModelConfig {
  std::string name;
  int sequence_length = 10;
  int input_width = 1;
  std::vector<LayerSpec> layers;

  // Validates the stack: at least one layer, dense layers after the last
  // recurrent one, final dense softmax with five outputs. Throws ShapeError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Bi-LSTM(n1) → Bi-LSTM(n2) → Dropout(p) → Dense(d, relu) → Dense(5, softmax).
ModelConfig bilstm_template(int n1, int n2, int dense, double dropout, int sequence_length = 10);
ModelConfig lstm_template(int n1, int n2, int dense, double dropout, int sequence_length = 10);

// T, S, M, L.
ModelConfig preset(std::string_view name, int sequence_length = 10, double dropout = 0.25);
std::vector<std::string> preset_names();

// Text form stored in model files: one `key=value` line per field.
std::string describe_config(const ModelConfig& config);
ModelConfig parse_config(std::string_view text);

struct TensorInfo {
  std::string name;  // e.g. "layer0.fwd.W"
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  int layer = 0;
  bool is_bias = false;
};

std::vector<TensorInfo> tensor_layout(const ModelConfig& config);

std::size_t count_params(const ModelConfig& config);

enum class FlopConvention {
  WeightsOnlyMacs,  // one MAC per weight, biases excluded
  MacsPerStepX2,    // 2 · (recurrent MACs per step · sequence length + dense MACs)
};
std::size_t count_flops(const ModelConfig& config, FlopConvention convention);

template <class T>
struct Params {
  ModelConfig config;
  std::vector<TensorInfo> tensors;
  std::vector<T> values;

  std::span<T> tensor(std::size_t i) { return {values.data() + tensors[i].offset, tensors[i].size}; }
  std::span<const T> tensor(std::size_t i) const {
    return {values.data() + tensors[i].offset, tensors[i].size};
  }
  template <class U>
  Params<U> cast() const {
    return {config, tensors, std::vector<U>(values.begin(), values.end())};
  }
};

using ModelParameters = Params<float>;

template <class T>
Params<T> zero_params(const ModelConfig& config);

// Kernels uniform in ±1/√fan_in, biases zero except the forget gate (1.0).
ModelParameters init_params(const ModelConfig& config, std::uint64_t seed);

// Single LSTM step for one sample, for tests and reference use. Weight
// layout as in the file header comment; h and c have `units` elements.
struct LstmStep {
  std::vector<double> h;
  std::vector<double> c;
};
LstmStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, std::span<const double> w,
                           std::span<const double> u, std::span<const double> b, int units);

// One Bi-LSTM layer over a single sequence (steps × width, row-major):
// returns steps × 2H with [h_fwd(t), h_bwd(t)] per row.
std::vector<double> bilstm_layer_forward(std::span<const double> sequence, int width,
                                         std::span<const double> w_fwd,
                                         std::span<const double> u_fwd,
                                         std::span<const double> b_fwd,
                                         std::span<const double> w_bwd,
                                         std::span<const double> u_bwd,
                                         std::span<const double> b_bwd, int units);

// A network evaluated on a batch of inputs (batch × sequence_length ×
// input_width). Keeps the activations of the last forward call for backward.
//
// A recurrent layer followed by another recurrent layer emits its full state
// sequence; the last recurrent layer emits only its final states, which for
// a Bi-LSTM are the forward state after the last step and the backward state
// after its full right-to-left pass.
template <class T>
class Network {
 public:
  explicit Network(const ModelConfig& config);

  // Returns batch × 5 probabilities. With `train` set, dropout masks are drawn
  // from `dropout_seed`. Throws NumericError on non-finite activations.
  const std::vector<T>& forward(const Params<T>& params, std::span<const T> inputs,
                                std::size_t batch, bool train, std::uint64_t dropout_seed = 0);

  // Gradients of the mean (optionally class-weighted) cross-entropy of the
  // last forward call. `grads` is overwritten. Returns the loss.
  double backward(const Params<T>& params, std::span<const int> labels, Params<T>& grads,
                  std::span<const double> class_weights = {});

  const ModelConfig& config() const { return config_; }

 private:
  struct Impl;
  ModelConfig config_;
  std::shared_ptr<Impl> impl_;
};

// Convenience wrapper around Network<T>::forward.
template <class T>
std::vector<T> model_forward(const Params<T>& params, std::span<const T> inputs,
                             std::size_t batch, bool train = false, std::uint64_t dropout_seed = 0);

// Mean of −log max(p_true, 1e-12). `probs` is batch × 5. Throws InputError
// for labels outside 0..4.
template <class T>
double sparse_ce_loss(std::span<const T> probs, std::span<const int> labels);

enum class Optimizer { Adam, Sgd };
std::string_view optimizer_name(Optimizer o);
Optimizer optimizer_from_name(std::string_view name);

struct TrainSpec {
  std::size_t batch_size = 64;
  int epochs = 10;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  bool class_weights = false;  // inverse-frequency loss weights
};

inline std::size_t iterations_per_epoch(std::size_t n_train, std::size_t batch) {
  return (n_train + batch - 1) / batch;
}

struct EpochMetrics {
  int epoch = 0;
  std::size_t iterations = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> eval_accuracy;
};

// Row-major inputs (n × sequence_length) and labels.
struct TrainingData {
  std::vector<float> inputs;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct TrainResult {
  ModelParameters params;
  std::vector<EpochMetrics> epochs;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Mini-batch training, reshuffled every epoch from the seed. Deterministic
// for a fixed seed at any thread count. Throws NumericError with the epoch
// and iteration when the loss becomes non-finite.
TrainResult train(const ModelConfig& config, const TrainingData& data, const TrainSpec& spec,
                  const TrainingData* eval = nullptr, const EpochCallback& on_epoch = {});

// Batched eval-mode inference; returns n × 5 probabilities.
std::vector<float> predict(const ModelParameters& params, std::span<const float> inputs,
                           std::size_t n, std::size_t batch = 256);
std::vector<int> argmax_rows(std::span<const float> probs);

// Model files: "HBCMODEL", u32 version, u32 scheme tag (0 for FP32), u32
// descriptor length, descriptor text, then each tensor as little-endian
// float32 in canonical order.
inline constexpr char kModelMagic[8] = {'H', 'B', 'C', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::uint8_t> serialize_model(const ModelParameters& params);
ModelParameters deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const std::string& path, const ModelParameters& params);
ModelParameters load_model(const std::string& path);

// Bytes before the first weight block.
std::size_t model_header_size(const ModelConfig& config);

// Header shared by FP32 and quantized model files.
struct ModelFileHeader {
  std::uint32_t version = 0;
  std::uint32_t scheme = 0;
  ModelConfig config;
  std::size_t payload_offset = 0;
};
std::vector<std::uint8_t> encode_model_header(const ModelConfig& config, std::uint32_t scheme);
ModelFileHeader decode_model_header(std::span<const std::uint8_t> bytes);

}  // namespace hbc
