#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "hbc/error.hpp"
#include "hbc/nn.hpp"
#include "hbc/rng.hpp"

using namespace hbc;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <class T>
std::span<const T> named(const Params<T>& p, const std::string& name) {
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    if (p.tensors[i].name == name) return p.tensor(i);
  FAIL("no tensor " << name);
  return {};
}

// Straight-line evaluation of one direction over `seq` (steps x width).
// Returns the state after every step, in processing order.
std::vector<std::vector<double>> run_direction(const std::vector<std::vector<double>>& seq,
                                               std::span<const double> W, std::span<const double> U,
                                               std::span<const double> b, std::size_t h) {
  const std::size_t w = seq.empty() ? 0 : seq[0].size();
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  std::vector<std::vector<double>> out;
  for (const auto& x : seq) {
    std::vector<double> z(4 * h);
    for (std::size_t k = 0; k < 4 * h; ++k) {
      double acc = b[k];
      for (std::size_t i = 0; i < w; ++i) acc += x[i] * W[i * 4 * h + k];
      for (std::size_t i = 0; i < h; ++i) acc += hs[i] * U[i * 4 * h + k];
      z[k] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid(z[j]), fg = sigmoid(z[h + j]), gg = std::tanh(z[2 * h + j]),
                   og = sigmoid(z[3 * h + j]);
      cs[j] = fg * cs[j] + ig * gg;
      hs[j] = og * std::tanh(cs[j]);
    }
    out.push_back(hs);
  }
  return out;
}

// Oracle for Bi-LSTM(h1) -> Bi-LSTM(h2) -> Dropout -> Dense(d, relu) -> Dense(5, softmax).
std::vector<double> oracle_forward(const Params<double>& p, std::span<const double> x, std::size_t h1,
                                   std::size_t h2, std::size_t d) {
  std::vector<std::vector<double>> seq;
  for (double v : x) seq.push_back({v});
  auto bilayer = [&](const std::vector<std::vector<double>>& in, int layer, std::size_t h) {
    const std::string pre = "layer" + std::to_string(layer);
    const auto f = run_direction(in, named(p, pre + ".fwd.W"), named(p, pre + ".fwd.U"),
                                 named(p, pre + ".fwd.b"), h);
    std::vector<std::vector<double>> rev(in.rbegin(), in.rend());
    const auto bw = run_direction(rev, named(p, pre + ".bwd.W"), named(p, pre + ".bwd.U"),
                                  named(p, pre + ".bwd.b"), h);
    std::vector<std::vector<double>> out(in.size());
    for (std::size_t t = 0; t < in.size(); ++t) {
      out[t] = f[t];
      const auto& back = bw[in.size() - 1 - t];
      out[t].insert(out[t].end(), back.begin(), back.end());
    }
    return std::pair{out, std::pair{f.back(), bw.back()}};
  };
  const auto l0 = bilayer(seq, 0, h1).first;
  const auto last = bilayer(l0, 1, h2).second;
  std::vector<double> feat = last.first;
  feat.insert(feat.end(), last.second.begin(), last.second.end());

  auto dense = [&](const std::vector<double>& in, int layer, std::size_t out_w) {
    const auto W = named(p, "layer" + std::to_string(layer) + ".W");
    const auto b = named(p, "layer" + std::to_string(layer) + ".b");
    std::vector<double> y(out_w);
    for (std::size_t j = 0; j < out_w; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < in.size(); ++i) acc += in[i] * W[i * out_w + j];
      y[j] = acc;
    }
    return y;
  };
  auto hidden = dense(feat, 3, d);
  for (double& v : hidden) v = std::max(0.0, v);
  auto logits = dense(hidden, 4, 5);
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) z += (v = std::exp(v - m));
  for (double& v : logits) v /= z;
  return logits;
}

Params<double> random_params(const ModelConfig& c, std::uint64_t seed, double scale = 0.5) {
  Params<double> p = zero_params<double>(c);
  Rng rng(seed);
  for (double& v : p.values) v = scale * rng.normal();
  return p;
}

double loss_at(Network<double>& net, const Params<double>& p, std::span<const double> x,
               std::span<const int> y, bool train, std::uint64_t seed,
               std::span<const double> weights) {
  const auto& probs = net.forward(p, x, y.size(), train, seed);
  double total = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(y[r])];
    total += w * -std::log(probs[r * 5 + static_cast<std::size_t>(y[r])]);
  }
  return total / static_cast<double>(y.size());
}

struct GradReport {
  double worst = 0.0;
  std::size_t checked = 0;
};

// Central differences with eps = 1e-4 on every parameter.
GradReport gradient_check(const ModelConfig& c, std::uint64_t seed, bool train,
                          std::span<const double> weights = {}) {
  Network<double> net(c);
  Params<double> p = random_params(c, seed);
  Rng rng(seed + 100);
  const std::size_t batch = 3;
  std::vector<double> x(batch * static_cast<std::size_t>(c.sequence_length * c.input_width));
  for (double& v : x) v = rng.normal();
  const std::vector<int> y = {0, 3, 4};
  const std::uint64_t drop_seed = 42;

  net.forward(p, x, batch, train, drop_seed);
  Params<double> g = zero_params<double>(c);
  net.backward(p, y, g, weights);

  GradReport rep;
  const double eps = 1e-4;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double keep = p.values[i];
    p.values[i] = keep + eps;
    const double up = loss_at(net, p, x, y, train, drop_seed, weights);
    p.values[i] = keep - eps;
    const double down = loss_at(net, p, x, y, train, drop_seed, weights);
    p.values[i] = keep;
    const double numeric = (up - down) / (2 * eps);
    const double err = std::abs(numeric - g.values[i]);
    const double scale = std::max(std::abs(numeric), std::abs(g.values[i]));
    // Relative error, with an absolute floor for gradients near zero.
    const double rel = scale > 1e-6 ? err / scale : err / 1e-6;
    rep.worst = std::max(rep.worst, rel);
    ++rep.checked;
  }
  return rep;
}

ModelConfig toy(LayerKind first, LayerKind second, int units, int seq = 4, double dropout = 0.0) {
  ModelConfig c;
  c.name = "toy";
  c.sequence_length = seq;
  c.layers = {{first, units, 0.0, Activation::Tanh},
              {second, units, 0.0, Activation::Tanh},
              LayerSpec::drop(dropout),
              LayerSpec::dense(3, Activation::Relu),
              LayerSpec::dense(5, Activation::Softmax)};
  return c;
}

}  // namespace

TEST_SUITE("cell") {
  TEST_CASE("zero weights and states give zero output") {
    const std::vector<double> x = {0.7}, h(3, 0.0), c(3, 0.0), w(12, 0.0), u(36, 0.0), b(12, 0.0);
    const LstmStep s = lstm_cell_forward(x, h, c, w, u, b, 3);
    for (double v : s.h) CHECK(v == 0.0);
    for (double v : s.c) CHECK(v == 0.0);
  }

  TEST_CASE("single unit matches scalar arithmetic") {
    const std::vector<double> x = {0.4}, h = {-0.3}, c = {0.8};
    const std::vector<double> w = {0.5, -0.2, 0.9, 0.1}, u = {0.3, 0.7, -0.6, 0.2}, b = {0.0, 1.0, 0.1, -0.1};
    const double i = sigmoid(0.4 * 0.5 - 0.3 * 0.3 + 0.0);
    const double f = sigmoid(0.4 * -0.2 - 0.3 * 0.7 + 1.0);
    const double g = std::tanh(0.4 * 0.9 - 0.3 * -0.6 + 0.1);
    const double o = sigmoid(0.4 * 0.1 - 0.3 * 0.2 - 0.1);
    const double c1 = f * 0.8 + i * g;
    const LstmStep s = lstm_cell_forward(x, h, c, w, u, b, 1);
    CHECK(std::abs(s.c[0] - c1) < 1e-12);
    CHECK(std::abs(s.h[0] - o * std::tanh(c1)) < 1e-12);
  }

  TEST_CASE("saturated forget gate keeps the cell state") {
    const std::vector<double> x = {0.0}, h = {0.0}, c = {0.37}, w(4, 0.0), u(4, 0.0);
    const std::vector<double> b = {-30.0, 30.0, 0.0, 0.0};
    const LstmStep s = lstm_cell_forward(x, h, c, w, u, b, 1);
    CHECK(std::abs(s.c[0] - 0.37) < 1e-6);
  }
}

TEST_SUITE("bilstm") {
  TEST_CASE("palindromic input with mirrored weights") {
    Rng rng(3);
    const int H = 3;
    std::vector<double> w(4 * H), u(H * 4 * H), b(4 * H);
    for (double& v : w) v = rng.normal();
    for (double& v : u) v = 0.5 * rng.normal();
    for (double& v : b) v = 0.1 * rng.normal();
    const std::vector<double> seq = {0.2, -1.0, 0.5, 0.9, 0.5, -1.0, 0.2};
    const auto out = bilstm_layer_forward(seq, 1, w, u, b, w, u, b, H);
    const std::size_t T = seq.size();
    for (std::size_t t = 0; t < T; ++t)
      for (int j = 0; j < H; ++j) {
        CHECK(out[t * 2 * H + static_cast<std::size_t>(j)] ==
              doctest::Approx(out[(T - 1 - t) * 2 * H + H + static_cast<std::size_t>(j)]).epsilon(1e-14));
      }
  }

  TEST_CASE("length one sees one step in both directions") {
    const int H = 2;
    Rng rng(8);
    std::vector<double> w(4 * H), u(H * 4 * H), b(4 * H);
    for (double& v : w) v = rng.normal();
    for (double& v : u) v = rng.normal();
    const std::vector<double> seq = {0.6};
    const auto out = bilstm_layer_forward(seq, 1, w, u, b, w, u, b, H);
    CHECK(out[0] == out[2]);
    CHECK(out[1] == out[3]);
  }

  TEST_CASE("zero input and zero biases give zero output") {
    const int H = 4;
    Rng rng(1);
    std::vector<double> w(4 * H), u(H * 4 * H), b(4 * H, 0.0);
    for (double& v : w) v = rng.normal();
    for (double& v : u) v = rng.normal();
    const std::vector<double> seq(5, 0.0);
    for (double v : bilstm_layer_forward(seq, 1, w, u, b, w, u, b, H)) CHECK(v == 0.0);
  }
}

TEST_SUITE("forward") {
  TEST_CASE("tiny network matches a straight-line oracle") {
    const ModelConfig c = bilstm_template(3, 2, 4, 0.25, 6);
    const Params<double> p = random_params(c, 5);
    Rng rng(6);
    std::vector<double> x(2 * 6);
    for (double& v : x) v = rng.normal();
    const auto probs = model_forward(p, std::span<const double>(x), 2);
    for (std::size_t r = 0; r < 2; ++r) {
      const auto ref = oracle_forward(p, std::span<const double>(x).subspan(r * 6, 6), 3, 2, 4);
      for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(probs[r * 5 + k] - ref[k]) < 1e-10);
    }
  }

  TEST_CASE("softmax rows are probability vectors") {
    const ModelConfig c = preset("T");
    const ModelParameters p = init_params(c, 1);
    Rng rng(2);
    std::vector<float> x(32 * 10);
    for (float& v : x) v = static_cast<float>(3.0 * rng.normal());
    const auto probs = model_forward(p, std::span<const float>(x), 32);
    for (std::size_t r = 0; r < 32; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        CHECK(probs[r * 5 + k] > 0.0f);
        CHECK(probs[r * 5 + k] < 1.0f);
        s += probs[r * 5 + k];
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }

  TEST_CASE("dropout only acts in training mode") {
    Rng rng(4);
    std::vector<double> x(4 * 5);
    for (double& v : x) v = rng.normal();
    const ModelConfig none = bilstm_template(3, 3, 4, 0.0, 5);
    const Params<double> p = random_params(none, 9);
    const auto eval = model_forward(p, std::span<const double>(x), 4, false);
    CHECK(model_forward(p, std::span<const double>(x), 4, true, 7) == eval);

    const ModelConfig heavy = bilstm_template(3, 3, 4, 0.5, 5);
    Params<double> q = p;
    q.config = heavy;
    const auto e1 = model_forward(q, std::span<const double>(x), 4, false, 1);
    const auto e2 = model_forward(q, std::span<const double>(x), 4, false, 2);
    CHECK(e1 == e2);
    CHECK(e1 == eval);
    CHECK(model_forward(q, std::span<const double>(x), 4, true, 1) != eval);
  }

  TEST_CASE("non-finite inputs raise NumericError") {
    const ModelConfig c = bilstm_template(2, 2, 3, 0.0, 3);
    const Params<double> p = random_params(c, 1);
    const std::vector<double> x = {0.0, NAN, 1.0};
    CHECK_THROWS_AS(model_forward(p, std::span<const double>(x), 1), NumericError);
  }
}

TEST_SUITE("loss") {
  TEST_CASE("analytic values") {
    const std::vector<double> uniform(10, 0.2);
    const std::vector<int> y = {1, 4};
    CHECK(sparse_ce_loss<double>(uniform, y) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK(sparse_ce_loss<double>(uniform, y) == doctest::Approx(1.6094).epsilon(1e-4));
    const std::vector<double> onehot = {0, 1, 0, 0, 0, 0, 0, 0, 0, 1};
    CHECK(sparse_ce_loss<double>(onehot, y) == 0.0);
    const std::vector<double> mixed = {0.5, 0.5, 0, 0, 0, 0.25, 0.25, 0.25, 0.25, 0};
    const std::vector<int> y2 = {0, 2};
    CHECK(sparse_ce_loss<double>(mixed, y2) == doctest::Approx(1.0397).epsilon(1e-4));
  }

  TEST_CASE("labels outside the class range are rejected") {
    const std::vector<double> p(5, 0.2);
    const std::vector<int> bad = {5};
    CHECK_THROWS_AS(sparse_ce_loss<double>(p, bad), InputError);
  }

  TEST_CASE("freshly initialized model starts near ln 5") {
    const ModelConfig c = preset("T");
    const ModelParameters p = init_params(c, 3);
    Rng rng(3);
    std::vector<float> x(200 * 10);
    for (float& v : x) v = static_cast<float>(rng.normal());
    std::vector<int> y(200);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 5);
    const auto probs = model_forward(p, std::span<const float>(x), 200);
    CHECK(std::abs(sparse_ce_loss<float>(probs, y) - std::log(5.0)) < 0.1);
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("Bi-LSTM stack, eval mode") {
    const GradReport r = gradient_check(toy(LayerKind::BiLstm, LayerKind::BiLstm, 2), 11, false);
    CHECK(r.checked == count_params(toy(LayerKind::BiLstm, LayerKind::BiLstm, 2)));
    CHECK(r.worst <= 1e-4);
  }

  TEST_CASE("LSTM stack") {
    CHECK(gradient_check(toy(LayerKind::Lstm, LayerKind::Lstm, 2), 12, false).worst <= 1e-4);
  }

  TEST_CASE("mixed stack with training-mode dropout") {
    CHECK(gradient_check(toy(LayerKind::Lstm, LayerKind::BiLstm, 2, 5, 0.3), 13, true).worst <= 1e-4);
    CHECK(gradient_check(toy(LayerKind::BiLstm, LayerKind::Lstm, 2, 3, 0.3), 14, true).worst <= 1e-4);
  }

  TEST_CASE("class-weighted loss") {
    const std::vector<double> w = {0.5, 1.0, 2.0, 3.0, 1.5};
    CHECK(gradient_check(toy(LayerKind::BiLstm, LayerKind::BiLstm, 2), 15, false, w).worst <= 1e-4);
  }

  TEST_CASE("dense-only head at a stationary point") {
    ModelConfig c = toy(LayerKind::Lstm, LayerKind::Lstm, 2);
    c.layers[3] = LayerSpec::dense(3, Activation::Linear);
    Params<double> p = zero_params<double>(c);
    Network<double> net(c);
    const std::vector<double> x(5 * 4, 0.3);
    const std::vector<int> y = {0, 1, 2, 3, 4};
    net.forward(p, x, 5, false);
    Params<double> g;
    const double loss = net.backward(p, y, g);
    CHECK(loss == doctest::Approx(std::log(5.0)));
    // softmax(0) - mean(onehot) = 0.2 - 0.2 for every class.
    for (std::size_t t = 0; t < p.tensors.size(); ++t)
      if (p.tensors[t].name == "layer4.b")
        for (double v : g.tensor(t)) CHECK(std::abs(v) < 1e-15);
    const std::vector<int> y0 = {0, 0, 0, 0, 0};
    net.forward(p, x, 5, false);
    net.backward(p, y0, g);
    for (std::size_t t = 0; t < p.tensors.size(); ++t)
      if (p.tensors[t].name == "layer4.b") {
        const auto b = g.tensor(t);
        CHECK(b[0] == doctest::Approx(-0.8));
        for (std::size_t k = 1; k < 5; ++k) CHECK(b[k] == doctest::Approx(0.2));
      }
  }

  TEST_CASE("frozen layer receives exactly zero gradient") {
    ModelConfig c = toy(LayerKind::BiLstm, LayerKind::BiLstm, 2);
    c.layers[0].frozen = true;
    c.layers[3].frozen = true;
    Network<double> net(c);
    const Params<double> p = random_params(c, 21);
    Rng rng(22);
    std::vector<double> x(3 * 4);
    for (double& v : x) v = rng.normal();
    const std::vector<int> y = {1, 2, 3};
    net.forward(p, x, 3, false);
    Params<double> g;
    net.backward(p, y, g);
    bool any_live = false;
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
      const int layer = p.tensors[t].layer;
      for (double v : g.tensor(t)) {
        if (layer == 0 || layer == 3) CHECK(v == 0.0);
        else any_live = any_live || v != 0.0;
      }
    }
    CHECK(any_live);
  }
}

TEST_SUITE("accounting") {
  TEST_CASE("published parameter counts") {
    CHECK(count_params(lstm_template(64, 64, 128, 0.25)) == 58885);
    CHECK(count_params(bilstm_template(32, 32, 128, 0.25)) == 42501);
    CHECK(count_params(preset("T")) == 83973);
    CHECK(count_params(preset("S")) == 149765);
    CHECK(count_params(preset("M")) == 478469);
    const double l = static_cast<double>(count_params(preset("L")));
    CHECK(std::abs(l - 1250053.0) / 1250053.0 <= 1e-3);
  }

  TEST_CASE("counts are independent of sequence length") {
    for (const auto& name : preset_names())
      CHECK(count_params(preset(name, 6)) == count_params(preset(name, 10)));
  }

  TEST_CASE("layout covers every parameter once") {
    const ModelConfig c = preset("S");
    const auto layout = tensor_layout(c);
    std::size_t offset = 0;
    for (const TensorInfo& t : layout) {
      CHECK(t.offset == offset);
      offset += t.size;
    }
    CHECK(offset == count_params(c));
    CHECK(layout.front().name == "layer0.fwd.W");
    CHECK(layout[3].name == "layer0.bwd.W");
  }

  TEST_CASE("flop conventions") {
    ModelConfig d;
    d.layers = {LayerSpec::lstm(1), LayerSpec::dense(4, Activation::Relu), LayerSpec::dense(5, Activation::Softmax)};
    CHECK(count_flops(d, FlopConvention::WeightsOnlyMacs) == 4 * (1 + 1) + 4 + 20);
    const ModelConfig t = preset("T");
    std::size_t biases = 0;
    for (const TensorInfo& info : tensor_layout(t))
      if (info.is_bias) biases += info.size;
    CHECK(count_flops(t, FlopConvention::WeightsOnlyMacs) == 83072);
    CHECK(count_params(t) - biases == 83072);
  }

  TEST_CASE("iterations per epoch") {
    CHECK(iterations_per_epoch(73180, 64) == 1144);
    CHECK(73180 / 64 == 1143);
    CHECK(iterations_per_epoch(128, 64) == 2);
  }
}

TEST_SUITE("config") {
  TEST_CASE("validation") {
    ModelConfig c = preset("T");
    CHECK_NOTHROW(c.validate());
    c.layers.back() = LayerSpec::dense(4, Activation::Softmax);
    CHECK_THROWS_AS(c.validate(), ShapeError);
    ModelConfig e;
    CHECK_THROWS_AS(e.validate(), ShapeError);
    ModelConfig late = preset("T");
    late.layers.insert(late.layers.end() - 1, LayerSpec::lstm(4));
    CHECK_THROWS_AS(late.validate(), ShapeError);
    CHECK_THROWS_AS(preset("XL"), InputError);
  }

  TEST_CASE("descriptor round trip") {
    ModelConfig c = preset("M", 6, 0.4);
    c.layers[1].frozen = true;
    CHECK(parse_config(describe_config(c)) == c);
  }
}

TEST_SUITE("init") {
  TEST_CASE("bounds and forget-gate bias") {
    const ModelConfig c = preset("T");
    const ModelParameters p = init_params(c, 9);
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
      const TensorInfo& info = p.tensors[t];
      const auto v = p.tensor(t);
      if (info.is_bias) {
        const bool rec = c.layers[static_cast<std::size_t>(info.layer)].kind == LayerKind::BiLstm;
        const std::size_t h = rec ? info.size / 4 : 0;
        for (std::size_t k = 0; k < v.size(); ++k)
          CHECK(v[k] == ((rec && k >= h && k < 2 * h) ? 1.0f : 0.0f));
      } else {
        const float limit = static_cast<float>(1.0 / std::sqrt(static_cast<double>(info.shape[0])));
        for (float x : v) CHECK(std::abs(x) <= limit);
      }
    }
    CHECK(init_params(c, 9).values == p.values);
    CHECK(init_params(c, 10).values != p.values);
  }
}

TEST_SUITE("training") {
  TrainingData blobs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    TrainingData d;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 5);
      for (int t = 0; t < 6; ++t)
        d.inputs.push_back(static_cast<float>((y - 2) * 0.8 + (t % 2 ? 0.3 : -0.3) * y + 0.3 * rng.normal()));
      d.labels.push_back(y);
    }
    return d;
  }

  TEST_CASE("same seed gives bit-identical parameters; loss falls") {
    const ModelConfig c = bilstm_template(8, 8, 16, 0.25, 6);
    const TrainingData d = blobs(300, 1);
    TrainSpec spec;
    spec.epochs = 3;
    spec.batch_size = 32;
    spec.learning_rate = 1e-2;
    const TrainResult a = train(c, d, spec);
    const TrainResult b = train(c, d, spec);
    CHECK(a.params.values == b.params.values);
    REQUIRE(a.epochs.size() == 3);
    CHECK(a.epochs[0].iterations == iterations_per_epoch(300, 32));
    CHECK(a.epochs[2].train_loss < a.epochs[0].train_loss);
    spec.seed = 2;
    CHECK(train(c, d, spec).params.values != a.params.values);
  }

  TEST_CASE("sgd runs and the callback sees every epoch") {
    const ModelConfig c = bilstm_template(4, 4, 8, 0.0, 6);
    TrainSpec spec;
    spec.epochs = 2;
    spec.optimizer = Optimizer::Sgd;
    spec.learning_rate = 0.05;
    int seen = 0;
    const TrainingData d = blobs(100, 2);
    const TrainResult r = train(c, d, spec, &d, [&](const EpochMetrics& m) {
      ++seen;
      CHECK(m.eval_accuracy.has_value());
    });
    CHECK(seen == 2);
    CHECK(optimizer_from_name("sgd") == Optimizer::Sgd);
    CHECK_THROWS_AS(optimizer_from_name("rmsprop"), InputError);
  }
}

TEST_SUITE("files") {
  TEST_CASE("save and load round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "hbc_test_model.bin").string();
    const ModelParameters p = init_params(preset("T"), 4);
    save_model(path, p);
    const ModelParameters q = load_model(path);
    CHECK(q.config == p.config);
    CHECK(std::memcmp(q.values.data(), p.values.data(), 4 * p.values.size()) == 0);
    CHECK(std::filesystem::file_size(path) == model_header_size(p.config) + 4 * count_params(p.config));
    std::filesystem::remove(path);
  }

  TEST_CASE("truncated or padded files name the problem") {
    const ModelParameters p = init_params(bilstm_template(2, 2, 3, 0.0), 1);
    auto bytes = serialize_model(p);
    auto cut = bytes;
    cut.resize(bytes.size() - 5);
    try {
      deserialize_model(cut);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("layer4.b") != std::string::npos);
    }
    auto header_only = bytes;
    header_only.resize(10);
    CHECK_THROWS_AS(deserialize_model(header_only), ParseError);
    bytes.push_back(0);
    CHECK_THROWS_AS(deserialize_model(bytes), ParseError);
    std::vector<std::uint8_t> junk(64, 'x');
    CHECK_THROWS_AS(deserialize_model(junk), ParseError);
    CHECK_THROWS_AS(load_model("/nonexistent/model.bin"), MissingArtifact);
  }
}
