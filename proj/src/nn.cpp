#include "hbc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hbc/error.hpp"
#include "hbc/kernels.hpp"
#include "hbc/rng.hpp"
#include "hbc/textio.hpp"

namespace hbc {

std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Lstm: return "lstm";
    case LayerKind::BiLstm: return "bilstm";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
    case Activation::Linear: return "linear";
  }
  return "?";
}

namespace {

bool recurrent(LayerKind k) { return k == LayerKind::Lstm || k == LayerKind::BiLstm; }
int directions(LayerKind k) { return k == LayerKind::BiLstm ? 2 : 1; }

LayerKind kind_from_name(std::string_view s) {
  if (s == "lstm") return LayerKind::Lstm;
  if (s == "bilstm") return LayerKind::BiLstm;
  if (s == "dropout") return LayerKind::Dropout;
  if (s == "dense") return LayerKind::Dense;
  throw ParseError("unknown layer kind '" + std::string(s) + "'", 0);
}

Activation activation_from_name(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "softmax") return Activation::Softmax;
  if (s == "linear") return Activation::Linear;
  throw ParseError("unknown activation '" + std::string(s) + "'", 0);
}

// Index of the last recurrent layer, or -1.
int last_recurrent(const ModelConfig& c) {
  int last = -1;
  for (std::size_t i = 0; i < c.layers.size(); ++i)
    if (recurrent(c.layers[i].kind)) last = static_cast<int>(i);
  return last;
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

void ModelConfig::validate() const {
  if (layers.empty()) throw ShapeError("model has no layers");
  if (sequence_length < 1 || input_width < 1) throw ShapeError("input shape must be positive");
  bool seen_dense = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.kind == LayerKind::Dropout) {
      if (!(l.dropout >= 0.0 && l.dropout < 1.0))
        throw ShapeError("dropout rate must be in [0, 1)");
      continue;
    }
    if (l.units < 1) throw ShapeError("layer " + std::to_string(i) + " has no units");
    if (recurrent(l.kind) && seen_dense)
      throw ShapeError("recurrent layer " + std::to_string(i) + " follows a dense layer");
    if (l.kind == LayerKind::Dense) {
      seen_dense = true;
      if (l.activation == Activation::Softmax && i + 1 != layers.size())
        throw ShapeError("softmax is only allowed on the output layer");
    }
  }
  const LayerSpec& out = layers.back();
  if (out.kind != LayerKind::Dense || out.activation != Activation::Softmax ||
      out.units != kNumClasses)
    throw ShapeError("output layer must be Dense(5, softmax)");
}

ModelConfig bilstm_template(int n1, int n2, int dense, double dropout, int sequence_length) {
  ModelConfig c;
  c.sequence_length = sequence_length;
  c.layers = {LayerSpec::bilstm(n1), LayerSpec::bilstm(n2), LayerSpec::drop(dropout),
              LayerSpec::dense(dense, Activation::Relu),
              LayerSpec::dense(kNumClasses, Activation::Softmax)};
  return c;
}

ModelConfig lstm_template(int n1, int n2, int dense, double dropout, int sequence_length) {
  ModelConfig c = bilstm_template(n1, n2, dense, dropout, sequence_length);
  c.layers[0].kind = LayerKind::Lstm;
  c.layers[1].kind = LayerKind::Lstm;
  return c;
}

ModelConfig preset(std::string_view name, int sequence_length, double dropout) {
  ModelConfig c;
  if (name == "T") c = bilstm_template(64, 32, 128, dropout, sequence_length);
  else if (name == "S") c = bilstm_template(64, 64, 128, dropout, sequence_length);
  else if (name == "M") c = bilstm_template(128, 112, 64, dropout, sequence_length);
  else if (name == "L") c = bilstm_template(192, 176, 453, dropout, sequence_length);
  else throw InputError("unknown preset '" + std::string(name) + "' (T|S|M|L)");
  c.name = std::string(name);
  return c;
}

std::vector<std::string> preset_names() { return {"T", "S", "M", "L"}; }

std::string describe_config(const ModelConfig& config) {
  std::ostringstream out;
  out << "name=" << config.name << '\n';
  out << "sequence_length=" << config.sequence_length << '\n';
  out << "input_width=" << config.input_width << '\n';
  out << "layers=" << config.layers.size() << '\n';
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    out << "layer" << i << '=' << layer_kind_name(l.kind);
    if (l.kind == LayerKind::Dropout) {
      out << " rate=" << format_double(l.dropout);
    } else {
      out << " units=" << l.units;
      if (l.kind == LayerKind::Dense) out << " activation=" << activation_name(l.activation);
    }
    if (l.frozen) out << " frozen=1";
    out << '\n';
  }
  out << "order=W(in,4H) U(H,4H) b(4H); gates i,f,g,o; bilstm fwd,bwd; dense W(in,out) b(out)\n";
  return out.str();
}

ModelConfig parse_config(std::string_view text) {
  ModelConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_layers = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line without '='", line_no);
    const std::string key(trim(std::string_view(line).substr(0, eq)));
    const std::string value(trim(std::string_view(line).substr(eq + 1)));
    if (key == "name") {
      c.name = value;
    } else if (key == "sequence_length") {
      c.sequence_length = static_cast<int>(parse_size(value, line_no));
    } else if (key == "input_width") {
      c.input_width = static_cast<int>(parse_size(value, line_no));
    } else if (key == "layers") {
      expected_layers = parse_size(value, line_no);
    } else if (key.rfind("layer", 0) == 0) {
      std::istringstream tokens(value);
      std::string kind;
      tokens >> kind;
      LayerSpec l;
      l.kind = kind_from_name(kind);
      if (recurrent(l.kind)) l.activation = Activation::Tanh;
      std::string tok;
      while (tokens >> tok) {
        const auto e = tok.find('=');
        if (e == std::string::npos) throw ParseError("bad layer field '" + tok + "'", line_no);
        const std::string k = tok.substr(0, e);
        const std::string v = tok.substr(e + 1);
        if (k == "units") l.units = static_cast<int>(parse_size(v, line_no));
        else if (k == "rate") l.dropout = parse_double(v, line_no);
        else if (k == "activation") l.activation = activation_from_name(v);
        else if (k == "frozen") l.frozen = v == "1";
        else throw ParseError("unknown layer field '" + k + "'", line_no);
      }
      c.layers.push_back(l);
    }
  }
  if (c.layers.size() != expected_layers)
    throw ParseError("config lists " + std::to_string(c.layers.size()) + " layers, header says " +
                         std::to_string(expected_layers),
                     line_no);
  c.validate();
  return c;
}

std::vector<TensorInfo> tensor_layout(const ModelConfig& config) {
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  std::size_t width = static_cast<std::size_t>(config.input_width);
  auto add = [&](int layer, std::string name, std::vector<std::size_t> shape, bool bias) {
    std::size_t size = 1;
    for (std::size_t d : shape) size *= d;
    out.push_back({std::move(name), std::move(shape), offset, size, layer, bias});
    offset += size;
  };
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& l = config.layers[i];
    const int li = static_cast<int>(i);
    const std::string prefix = "layer" + std::to_string(i);
    const auto units = static_cast<std::size_t>(l.units);
    if (recurrent(l.kind)) {
      const char* dirs[2] = {"fwd", "bwd"};
      for (int d = 0; d < directions(l.kind); ++d) {
        const std::string p = prefix + "." + dirs[d];
        add(li, p + ".W", {width, 4 * units}, false);
        add(li, p + ".U", {units, 4 * units}, false);
        add(li, p + ".b", {4 * units}, true);
      }
      width = units * static_cast<std::size_t>(directions(l.kind));
    } else if (l.kind == LayerKind::Dense) {
      add(li, prefix + ".W", {width, units}, false);
      add(li, prefix + ".b", {units}, true);
      width = units;
    }
  }
  return out;
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  std::size_t width = static_cast<std::size_t>(config.input_width);
  for (const LayerSpec& l : config.layers) {
    const auto h = static_cast<std::size_t>(l.units);
    if (recurrent(l.kind)) {
      const auto dirs = static_cast<std::size_t>(directions(l.kind));
      total += dirs * 4 * h * (width + h + 1);
      width = dirs * h;
    } else if (l.kind == LayerKind::Dense) {
      total += width * h + h;
      width = h;
    }
  }
  return total;
}

std::size_t count_flops(const ModelConfig& config, FlopConvention convention) {
  std::size_t per_step = 0;
  std::size_t dense = 0;
  std::size_t width = static_cast<std::size_t>(config.input_width);
  for (const LayerSpec& l : config.layers) {
    const auto h = static_cast<std::size_t>(l.units);
    if (recurrent(l.kind)) {
      const auto dirs = static_cast<std::size_t>(directions(l.kind));
      per_step += dirs * 4 * h * (width + h);
      width = dirs * h;
    } else if (l.kind == LayerKind::Dense) {
      dense += width * h;
      width = h;
    }
  }
  if (convention == FlopConvention::WeightsOnlyMacs) return per_step + dense;
  return 2 * (per_step * static_cast<std::size_t>(config.sequence_length) + dense);
}

template <class T>
Params<T> zero_params(const ModelConfig& config) {
  Params<T> p;
  p.config = config;
  p.tensors = tensor_layout(config);
  p.values.assign(count_params(config), T(0));
  return p;
}

ModelParameters init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParameters p = zero_params<float>(config);
  Rng rng(seed);
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    const TensorInfo& info = p.tensors[t];
    auto values = p.tensor(t);
    const LayerSpec& layer = config.layers[static_cast<std::size_t>(info.layer)];
    if (info.is_bias) {
      if (recurrent(layer.kind)) {
        const auto h = static_cast<std::size_t>(layer.units);
        for (std::size_t j = h; j < 2 * h; ++j) values[j] = 1.0f;
      }
      continue;
    }
    const double limit = 1.0 / std::sqrt(static_cast<double>(info.shape[0]));
    for (float& v : values) v = static_cast<float>(rng.uniform(-limit, limit));
  }
  return p;
}

LstmStep lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev, std::span<const double> w,
                           std::span<const double> u, std::span<const double> b, int units) {
  const auto h = static_cast<std::size_t>(units);
  const std::size_t in = x.size();
  if (h_prev.size() != h || c_prev.size() != h || w.size() != in * 4 * h ||
      u.size() != h * 4 * h || b.size() != 4 * h)
    throw ShapeError("lstm cell: inconsistent shapes");
  std::vector<double> a(b.begin(), b.end());
  for (std::size_t k = 0; k < in; ++k)
    for (std::size_t j = 0; j < 4 * h; ++j) a[j] += x[k] * w[k * 4 * h + j];
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t j = 0; j < 4 * h; ++j) a[j] += h_prev[k] * u[k * 4 * h + j];
  LstmStep s{std::vector<double>(h), std::vector<double>(h)};
  for (std::size_t j = 0; j < h; ++j) {
    const double i = sigmoid(a[j]);
    const double f = sigmoid(a[h + j]);
    const double g = std::tanh(a[2 * h + j]);
    const double o = sigmoid(a[3 * h + j]);
    s.c[j] = f * c_prev[j] + i * g;
    s.h[j] = o * std::tanh(s.c[j]);
  }
  return s;
}

std::vector<double> bilstm_layer_forward(std::span<const double> sequence, int width,
                                         std::span<const double> w_fwd,
                                         std::span<const double> u_fwd,
                                         std::span<const double> b_fwd,
                                         std::span<const double> w_bwd,
                                         std::span<const double> u_bwd,
                                         std::span<const double> b_bwd, int units) {
  const auto w = static_cast<std::size_t>(width);
  if (w == 0 || sequence.empty()) throw InputError("bilstm: empty sequence");
  if (sequence.size() % w != 0) throw ShapeError("bilstm: sequence size not a multiple of width");
  const std::size_t steps = sequence.size() / w;
  const auto h = static_cast<std::size_t>(units);
  std::vector<double> out(steps * 2 * h);
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    auto s = lstm_cell_forward(sequence.subspan(t * w, w), hs, cs, w_fwd, u_fwd, b_fwd, units);
    hs = s.h;
    cs = s.c;
    std::copy(hs.begin(), hs.end(), out.begin() + static_cast<std::ptrdiff_t>(t * 2 * h));
  }
  std::fill(hs.begin(), hs.end(), 0.0);
  std::fill(cs.begin(), cs.end(), 0.0);
  for (std::size_t r = steps; r-- > 0;) {
    auto s = lstm_cell_forward(sequence.subspan(r * w, w), hs, cs, w_bwd, u_bwd, b_bwd, units);
    hs = s.h;
    cs = s.c;
    std::copy(hs.begin(), hs.end(), out.begin() + static_cast<std::ptrdiff_t>(r * 2 * h + h));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batched network

template <class T>
struct Network<T>::Impl {
  struct Direction {
    std::size_t w = 0, u = 0, b = 0;  // tensor indices
    std::vector<T> gates;             // steps × batch × 4H, post-nonlinearity
    std::vector<T> c;                 // steps × batch × H
    std::vector<T> tanh_c;
    std::vector<T> h;
  };

  struct Layer {
    LayerSpec spec;
    std::size_t in_width = 0;
    std::size_t out_width = 0;
    bool in_sequence = false;   // input carries a time axis
    bool out_sequence = false;  // output carries a time axis
    std::vector<Direction> dirs;
    std::size_t w = 0, b = 0;   // dense tensor indices
    std::vector<T> mask;        // dropout
    bool mask_active = false;
  };

  std::vector<Layer> layers;
  std::vector<std::vector<T>> acts;  // acts[i] is the input of layer i; acts.back() = output
  std::size_t batch = 0;
  std::size_t steps = 0;

  explicit Impl(const ModelConfig& config) {
    config.validate();
    const auto tensors = tensor_layout(config);
    const int last_rec = last_recurrent(config);
    std::size_t width = static_cast<std::size_t>(config.input_width);
    bool seq = true;
    std::size_t t = 0;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
      Layer l;
      l.spec = config.layers[i];
      l.in_width = width;
      l.in_sequence = seq;
      if (recurrent(l.spec.kind)) {
        const int nd = directions(l.spec.kind);
        for (int d = 0; d < nd; ++d) {
          Direction dir;
          dir.w = t++;
          dir.u = t++;
          dir.b = t++;
          l.dirs.push_back(std::move(dir));
        }
        l.out_width = static_cast<std::size_t>(nd * l.spec.units);
        l.out_sequence = static_cast<int>(i) != last_rec;
      } else if (l.spec.kind == LayerKind::Dense) {
        if (seq) throw ShapeError("dense layer needs a preceding recurrent layer");
        l.w = t++;
        l.b = t++;
        l.out_width = static_cast<std::size_t>(l.spec.units);
        l.out_sequence = false;
      } else {
        l.out_width = width;
        l.out_sequence = seq;
      }
      width = l.out_width;
      seq = l.out_sequence;
      layers.push_back(std::move(l));
    }
    if (t != tensors.size()) throw ShapeError("tensor layout mismatch");
    acts.resize(layers.size() + 1);
  }

  std::size_t rows(bool sequence) const { return sequence ? steps * batch : batch; }

  void recurrent_forward(const Params<T>& p, Layer& l, const std::vector<T>& in,
                         std::vector<T>& out) {
    const auto h = static_cast<std::size_t>(l.spec.units);
    const std::size_t g4 = 4 * h;
    const std::size_t in_w = l.in_width;
    const std::size_t out_w = l.out_width;
    out.assign(rows(l.out_sequence) * out_w, T(0));
    for (std::size_t d = 0; d < l.dirs.size(); ++d) {
      Direction& dir = l.dirs[d];
      const T* W = p.tensor(dir.w).data();
      const T* U = p.tensor(dir.u).data();
      const T* B = p.tensor(dir.b).data();
      dir.gates.assign(steps * batch * g4, T(0));
      dir.c.assign(steps * batch * h, T(0));
      dir.tanh_c.assign(steps * batch * h, T(0));
      dir.h.assign(steps * batch * h, T(0));
      for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t pos = d == 0 ? s : steps - 1 - s;
        T* a = dir.gates.data() + s * batch * g4;
        for (std::size_t r = 0; r < batch; ++r) std::copy(B, B + g4, a + r * g4);
        kernels::matmul_acc(in.data() + pos * batch * in_w, W, a, batch, in_w, g4);
        if (s > 0) kernels::matmul_acc(dir.h.data() + (s - 1) * batch * h, U, a, batch, h, g4);
        T* c = dir.c.data() + s * batch * h;
        T* tc = dir.tanh_c.data() + s * batch * h;
        T* hh = dir.h.data() + s * batch * h;
        const T* c_prev = s > 0 ? dir.c.data() + (s - 1) * batch * h : nullptr;
        for (std::size_t r = 0; r < batch; ++r) {
          T* ar = a + r * g4;
          for (std::size_t j = 0; j < h; ++j) {
            const T i = sigmoid(ar[j]);
            const T f = sigmoid(ar[h + j]);
            const T g = std::tanh(ar[2 * h + j]);
            const T o = sigmoid(ar[3 * h + j]);
            ar[j] = i;
            ar[h + j] = f;
            ar[2 * h + j] = g;
            ar[3 * h + j] = o;
            const T cp = c_prev ? c_prev[r * h + j] : T(0);
            const T cv = f * cp + i * g;
            c[r * h + j] = cv;
            tc[r * h + j] = std::tanh(cv);
            hh[r * h + j] = o * tc[r * h + j];
          }
        }
        if (l.out_sequence) {
          for (std::size_t r = 0; r < batch; ++r)
            std::copy(hh + r * h, hh + (r + 1) * h, out.data() + (pos * batch + r) * out_w + d * h);
        }
      }
      if (!l.out_sequence) {
        const T* hl = dir.h.data() + (steps - 1) * batch * h;
        for (std::size_t r = 0; r < batch; ++r)
          std::copy(hl + r * h, hl + (r + 1) * h, out.data() + r * out_w + d * h);
      }
    }
  }

  void recurrent_backward(const Params<T>& p, Layer& l, const std::vector<T>& in,
                          const std::vector<T>& d_out, std::vector<T>* d_in, Params<T>& g) {
    const auto h = static_cast<std::size_t>(l.spec.units);
    const std::size_t g4 = 4 * h;
    const std::size_t in_w = l.in_width;
    const std::size_t out_w = l.out_width;
    std::vector<T> dh(batch * h), dh_next(batch * h), dc_next(batch * h), da(batch * g4);
    for (std::size_t d = 0; d < l.dirs.size(); ++d) {
      Direction& dir = l.dirs[d];
      const T* W = p.tensor(dir.w).data();
      const T* U = p.tensor(dir.u).data();
      T* dW = g.tensor(dir.w).data();
      T* dU = g.tensor(dir.u).data();
      T* dB = g.tensor(dir.b).data();
      std::fill(dh_next.begin(), dh_next.end(), T(0));
      std::fill(dc_next.begin(), dc_next.end(), T(0));
      for (std::size_t s = steps; s-- > 0;) {
        const std::size_t pos = d == 0 ? s : steps - 1 - s;
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < h; ++j) {
            T v = dh_next[r * h + j];
            if (l.out_sequence) v += d_out[(pos * batch + r) * out_w + d * h + j];
            else if (s == steps - 1) v += d_out[r * out_w + d * h + j];
            dh[r * h + j] = v;
          }
        }
        const T* a = dir.gates.data() + s * batch * g4;
        const T* tc = dir.tanh_c.data() + s * batch * h;
        const T* c_prev = s > 0 ? dir.c.data() + (s - 1) * batch * h : nullptr;
        for (std::size_t r = 0; r < batch; ++r) {
          const T* ar = a + r * g4;
          T* dr = da.data() + r * g4;
          for (std::size_t j = 0; j < h; ++j) {
            const T i = ar[j], f = ar[h + j], gg = ar[2 * h + j], o = ar[3 * h + j];
            const T t = tc[r * h + j];
            const T dhv = dh[r * h + j];
            const T dc = dc_next[r * h + j] + dhv * o * (T(1) - t * t);
            const T cp = c_prev ? c_prev[r * h + j] : T(0);
            dr[j] = dc * gg * i * (T(1) - i);
            dr[h + j] = dc * cp * f * (T(1) - f);
            dr[2 * h + j] = dc * i * (T(1) - gg * gg);
            dr[3 * h + j] = dhv * t * o * (T(1) - o);
            dc_next[r * h + j] = dc * f;
          }
        }
        if (!l.spec.frozen) {
          kernels::matmul_tn_acc(in.data() + pos * batch * in_w, da.data(), dW, in_w, batch, g4);
          if (s > 0)
            kernels::matmul_tn_acc(dir.h.data() + (s - 1) * batch * h, da.data(), dU, h, batch, g4);
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t j = 0; j < g4; ++j) dB[j] += da[r * g4 + j];
        }
        if (d_in) kernels::matmul_nt_acc(da.data(), W, d_in->data() + pos * batch * in_w, batch, g4, in_w);
        std::fill(dh_next.begin(), dh_next.end(), T(0));
        if (s > 0) kernels::matmul_nt_acc(da.data(), U, dh_next.data(), batch, g4, h);
      }
    }
  }

  const std::vector<T>& forward(const Params<T>& p, std::span<const T> inputs, std::size_t n,
                                bool train, std::uint64_t seed) {
    if (p.values.size() != count_params(p.config))
      throw ShapeError("parameter vector does not match the model config");
    batch = n;
    steps = static_cast<std::size_t>(p.config.sequence_length);
    const std::size_t in_w = static_cast<std::size_t>(p.config.input_width);
    if (inputs.size() != batch * steps * in_w)
      throw ShapeError("input has " + std::to_string(inputs.size()) + " values, expected " +
                       std::to_string(batch * steps * in_w));
    // Inputs arrive sample-major; layers work time-major.
    auto& x = acts[0];
    x.resize(inputs.size());
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t k = 0; k < in_w; ++k)
          x[(t * batch + r) * in_w + k] = inputs[(r * steps + t) * in_w + k];

    for (std::size_t i = 0; i < layers.size(); ++i) {
      Layer& l = layers[i];
      const auto& in = acts[i];
      auto& out = acts[i + 1];
      switch (l.spec.kind) {
        case LayerKind::Lstm:
        case LayerKind::BiLstm:
          recurrent_forward(p, l, in, out);
          break;
        case LayerKind::Dropout: {
          out = in;
          l.mask_active = train && l.spec.dropout > 0.0;
          if (l.mask_active) {
            Rng rng(mix_seed(seed, i));
            const T scale = T(1) / (T(1) - static_cast<T>(l.spec.dropout));
            l.mask.resize(in.size());
            for (std::size_t k = 0; k < in.size(); ++k) {
              l.mask[k] = rng.uniform() >= l.spec.dropout ? scale : T(0);
              out[k] *= l.mask[k];
            }
          }
          break;
        }
        case LayerKind::Dense: {
          const std::size_t o = l.out_width;
          out.assign(batch * o, T(0));
          const T* B = p.tensor(l.b).data();
          for (std::size_t r = 0; r < batch; ++r) std::copy(B, B + o, out.data() + r * o);
          kernels::matmul_acc(in.data(), p.tensor(l.w).data(), out.data(), batch, l.in_width, o);
          apply_activation(l.spec.activation, out, o);
          break;
        }
      }
      for (const T v : out)
        if (!std::isfinite(v))
          throw NumericError("non-finite activation in layer " + std::to_string(i) + " (" +
                             std::string(layer_kind_name(l.spec.kind)) + ")");
    }
    return acts.back();
  }

  void apply_activation(Activation a, std::vector<T>& v, std::size_t width) {
    switch (a) {
      case Activation::Linear: break;
      case Activation::Relu:
        for (T& x : v) x = x > T(0) ? x : T(0);
        break;
      case Activation::Tanh:
        for (T& x : v) x = std::tanh(x);
        break;
      case Activation::Softmax:
        for (std::size_t r = 0; r < v.size() / width; ++r) {
          T* row = v.data() + r * width;
          const T m = *std::max_element(row, row + width);
          T sum = T(0);
          for (std::size_t j = 0; j < width; ++j) {
            row[j] = std::exp(row[j] - m);
            sum += row[j];
          }
          for (std::size_t j = 0; j < width; ++j) row[j] /= sum;
        }
        break;
    }
  }

  double backward(const Params<T>& p, std::span<const int> labels, Params<T>& g,
                  std::span<const double> class_weights) {
    if (labels.size() != batch) throw ShapeError("label count does not match the batch");
    if (g.values.size() != p.values.size()) g = zero_params<T>(p.config);
    std::fill(g.values.begin(), g.values.end(), T(0));
    const auto& probs = acts.back();
    for (int y : labels)
      if (y < 0 || y >= kNumClasses) throw InputError("label " + std::to_string(y) + " outside 0..4");

    std::vector<double> wts(batch, 1.0);
    if (!class_weights.empty())
      for (std::size_t r = 0; r < batch; ++r) wts[r] = class_weights[static_cast<std::size_t>(labels[r])];
    double weighted = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      const double pt = std::max(static_cast<double>(probs[r * kNumClasses + labels[r]]), 1e-12);
      weighted += wts[r] * -std::log(pt);
    }

    // Softmax + cross-entropy: d logits = w · (p − onehot) / N.
    std::vector<T> delta(batch * kNumClasses);
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t j = 0; j < kNumClasses; ++j) {
        const T onehot = static_cast<int>(j) == labels[r] ? T(1) : T(0);
        delta[r * kNumClasses + j] =
            static_cast<T>(wts[r] / static_cast<double>(batch)) * (probs[r * kNumClasses + j] - onehot);
      }

    std::vector<T> d_in;
    for (std::size_t i = layers.size(); i-- > 0;) {
      Layer& l = layers[i];
      const auto& in = acts[i];
      const bool need_input_grad = i > 0;
      d_in.assign(need_input_grad ? in.size() : 0, T(0));
      switch (l.spec.kind) {
        case LayerKind::Dense: {
          const std::size_t o = l.out_width;
          if (l.spec.activation == Activation::Relu) {
            const auto& out = acts[i + 1];
            for (std::size_t k = 0; k < delta.size(); ++k)
              if (!(out[k] > T(0))) delta[k] = T(0);
          } else if (l.spec.activation == Activation::Tanh) {
            const auto& out = acts[i + 1];
            for (std::size_t k = 0; k < delta.size(); ++k) delta[k] *= T(1) - out[k] * out[k];
          }
          if (!l.spec.frozen) {
            kernels::matmul_tn_acc(in.data(), delta.data(), g.tensor(l.w).data(), l.in_width,
                                   batch, o);
            T* dB = g.tensor(l.b).data();
            for (std::size_t r = 0; r < batch; ++r)
              for (std::size_t j = 0; j < o; ++j) dB[j] += delta[r * o + j];
          }
          if (need_input_grad)
            kernels::matmul_nt_acc(delta.data(), p.tensor(l.w).data(), d_in.data(), batch, o,
                                   l.in_width);
          break;
        }
        case LayerKind::Dropout:
          if (need_input_grad) {
            d_in = delta;
            if (l.mask_active)
              for (std::size_t k = 0; k < d_in.size(); ++k) d_in[k] *= l.mask[k];
          }
          break;
        case LayerKind::Lstm:
        case LayerKind::BiLstm:
          recurrent_backward(p, l, in, delta, need_input_grad ? &d_in : nullptr, g);
          break;
      }
      delta.swap(d_in);
    }
    return weighted / static_cast<double>(batch);
  }
};

template <class T>
Network<T>::Network(const ModelConfig& config)
    : config_(config), impl_(std::make_shared<Impl>(config)) {}

template <class T>
const std::vector<T>& Network<T>::forward(const Params<T>& params, std::span<const T> inputs,
                                          std::size_t batch, bool train,
                                          std::uint64_t dropout_seed) {
  if (!(params.config == config_)) throw ShapeError("parameters belong to a different config");
  return impl_->forward(params, inputs, batch, train, dropout_seed);
}

template <class T>
double Network<T>::backward(const Params<T>& params, std::span<const int> labels,
                            Params<T>& grads, std::span<const double> class_weights) {
  return impl_->backward(params, labels, grads, class_weights);
}

template <class T>
std::vector<T> model_forward(const Params<T>& params, std::span<const T> inputs,
                             std::size_t batch, bool train, std::uint64_t dropout_seed) {
  Network<T> net(params.config);
  return net.forward(params, inputs, batch, train, dropout_seed);
}

template <class T>
double sparse_ce_loss(std::span<const T> probs, std::span<const int> labels) {
  if (probs.size() != labels.size() * kNumClasses)
    throw ShapeError("probabilities and labels disagree in batch size");
  if (labels.empty()) throw InputError("empty batch");
  double sum = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || labels[r] >= kNumClasses)
      throw InputError("label " + std::to_string(labels[r]) + " outside 0..4");
    const double pt = std::max(static_cast<double>(probs[r * kNumClasses + labels[r]]), 1e-12);
    sum += -std::log(pt);
  }
  return sum / static_cast<double>(labels.size());
}

template Params<float> zero_params<float>(const ModelConfig&);
template Params<double> zero_params<double>(const ModelConfig&);
template class Network<float>;
template class Network<double>;
template std::vector<float> model_forward<float>(const Params<float>&, std::span<const float>,
                                                 std::size_t, bool, std::uint64_t);
template std::vector<double> model_forward<double>(const Params<double>&, std::span<const double>,
                                                   std::size_t, bool, std::uint64_t);
template double sparse_ce_loss<float>(std::span<const float>, std::span<const int>);
template double sparse_ce_loss<double>(std::span<const double>, std::span<const int>);

}  // namespace hbc
