#include <array>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hbc/error.hpp"
#include "hbc/nn.hpp"
#include "hbc/rng.hpp"

namespace hbc {

std::string_view optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer optimizer_from_name(std::string_view name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "sgd") return Optimizer::Sgd;
  throw InputError("unknown optimizer '" + std::string(name) + "' (adam|sgd)");
}

namespace {

struct Adam {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-7;
  std::vector<float> m, v;
  std::size_t step = 0;
};

std::vector<double> inverse_frequency(std::span<const int> labels) {
  std::array<std::size_t, kNumClasses> count{};
  for (int y : labels) ++count[static_cast<std::size_t>(y)];
  std::vector<double> w(kNumClasses, 0.0);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (count[c] > 0)
      w[c] = static_cast<double>(labels.size()) / (kNumClasses * static_cast<double>(count[c]));
  return w;
}

}  // namespace

std::vector<int> argmax_rows(std::span<const float> probs) {
  std::vector<int> out(probs.size() / kNumClasses);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const float* row = probs.data() + r * kNumClasses;
    out[r] = static_cast<int>(std::max_element(row, row + kNumClasses) - row);
  }
  return out;
}

std::vector<float> predict(const ModelParameters& params, std::span<const float> inputs,
                           std::size_t n, std::size_t batch) {
  const auto len = static_cast<std::size_t>(params.config.sequence_length * params.config.input_width);
  if (inputs.size() != n * len) throw ShapeError("predict: input size mismatch");
  Network<float> net(params.config);
  std::vector<float> out(n * kNumClasses);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t b = std::min(batch, n - start);
    const auto& p = net.forward(params, inputs.subspan(start * len, b * len), b, false);
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(start * kNumClasses));
  }
  return out;
}

TrainResult train(const ModelConfig& config, const TrainingData& data, const TrainSpec& spec,
                  const TrainingData* eval, const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = data.size();
  const auto len = static_cast<std::size_t>(config.sequence_length * config.input_width);
  if (n == 0) throw InputError("training set is empty");
  if (data.inputs.size() != n * len) throw ShapeError("training inputs do not match sequence length");
  if (spec.batch_size == 0) throw InputError("batch size must be positive");
  for (int y : data.labels)
    if (y < 0 || y >= kNumClasses) throw InputError("label outside 0..4 in training data");

  TrainResult result;
  result.params = init_params(config, mix_seed(spec.seed, 0));
  ModelParameters& p = result.params;
  ModelParameters g = zero_params<float>(config);
  Network<float> net(config);
  const std::vector<double> class_weights =
      spec.class_weights ? inverse_frequency(data.labels) : std::vector<double>{};

  // Tensors of frozen layers are never updated.
  std::vector<char> trainable(p.values.size(), 1);
  for (const TensorInfo& t : p.tensors)
    if (config.layers[static_cast<std::size_t>(t.layer)].frozen)
      std::fill_n(trainable.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size, 0);

  Adam adam;
  if (spec.optimizer == Optimizer::Adam) {
    adam.m.assign(p.values.size(), 0.0f);
    adam.v.assign(p.values.size(), 0.0f);
  }

  const std::size_t iters = iterations_per_epoch(n, spec.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<float> xb;
  std::vector<int> yb;

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(spec.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t it = 0; it < iters; ++it) {
      const std::size_t start = it * spec.batch_size;
      const std::size_t b = std::min(spec.batch_size, n - start);
      xb.resize(b * len);
      yb.resize(b);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        std::copy_n(data.inputs.begin() + static_cast<std::ptrdiff_t>(src * len), len,
                    xb.begin() + static_cast<std::ptrdiff_t>(r * len));
        yb[r] = data.labels[src];
      }
      const std::uint64_t dropout_seed =
          mix_seed(spec.seed, (static_cast<std::uint64_t>(epoch + 1) << 32) + it);
      const auto& probs = net.forward(p, xb, b, true, dropout_seed);
      const auto pred = argmax_rows(probs);
      for (std::size_t r = 0; r < b; ++r) correct += pred[r] == yb[r];
      const double loss = net.backward(p, yb, g, class_weights);
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch + 1) + ", iteration " + std::to_string(it + 1));
      loss_sum += loss * static_cast<double>(b);

      if (spec.optimizer == Optimizer::Adam) {
        ++adam.step;
        const double t = static_cast<double>(adam.step);
        const auto lr_t = static_cast<float>(spec.learning_rate *
                                             std::sqrt(1.0 - std::pow(Adam::kBeta2, t)) /
                                             (1.0 - std::pow(Adam::kBeta1, t)));
        const auto b1 = static_cast<float>(Adam::kBeta1);
        const auto b2 = static_cast<float>(Adam::kBeta2);
        const auto eps = static_cast<float>(Adam::kEps);
        for (std::size_t k = 0; k < p.values.size(); ++k) {
          if (!trainable[k]) continue;
          const float gk = g.values[k];
          adam.m[k] = b1 * adam.m[k] + (1.0f - b1) * gk;
          adam.v[k] = b2 * adam.v[k] + (1.0f - b2) * gk * gk;
          p.values[k] -= lr_t * adam.m[k] / (std::sqrt(adam.v[k]) + eps);
        }
      } else {
        const auto lr = static_cast<float>(spec.learning_rate);
        for (std::size_t k = 0; k < p.values.size(); ++k)
          if (trainable[k]) p.values[k] -= lr * g.values[k];
      }
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.iterations = iters;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (eval && eval->size() > 0) {
      const auto probs = predict(p, eval->inputs, eval->size());
      const auto pred = argmax_rows(probs);
      std::size_t ok = 0;
      for (std::size_t r = 0; r < pred.size(); ++r) ok += pred[r] == eval->labels[r];
      m.eval_accuracy = static_cast<double>(ok) / static_cast<double>(pred.size());
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

}  // namespace hbc
