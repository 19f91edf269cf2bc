#include <cstring>
#include <fstream>

#include "hbc/bytes.hpp"
#include "hbc/error.hpp"
#include "hbc/nn.hpp"

namespace hbc {

std::vector<std::uint8_t> encode_model_header(const ModelConfig& config, std::uint32_t scheme) {
  ByteWriter w;
  for (char c : kModelMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelVersion);
  w.u32(scheme);
  const std::string desc = describe_config(config);
  w.u32(static_cast<std::uint32_t>(desc.size()));
  w.text(desc);
  return w.take();
}

ModelFileHeader decode_model_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(sizeof kModelMagic, "magic");
  if (std::memcmp(magic.data(), kModelMagic, sizeof kModelMagic) != 0)
    throw ParseError("not a model file (bad magic)", 0);
  ModelFileHeader h;
  h.version = r.u32("version");
  if (h.version != kModelVersion)
    throw ParseError("unsupported model file version " + std::to_string(h.version), 8);
  h.scheme = r.u32("scheme tag");
  const std::uint32_t len = r.u32("descriptor length");
  const auto desc = r.bytes(len, "config descriptor");
  h.config = parse_config(std::string(desc.begin(), desc.end()));
  h.payload_offset = r.position();
  return h;
}

std::size_t model_header_size(const ModelConfig& config) {
  return encode_model_header(config, 0).size();
}

std::vector<std::uint8_t> serialize_model(const ModelParameters& params) {
  ByteWriter w;
  w.bytes(encode_model_header(params.config, 0));
  for (float v : params.values) w.f32(v);
  return w.take();
}

ModelParameters deserialize_model(std::span<const std::uint8_t> bytes) {
  const ModelFileHeader h = decode_model_header(bytes);
  if (h.scheme != 0)
    throw ParseError("model file holds a quantized model (scheme tag " + std::to_string(h.scheme) +
                         "); load it as a quantized model",
                     12);
  ModelParameters p = zero_params<float>(h.config);
  ByteReader r(bytes, h.payload_offset);
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    const TensorInfo& info = p.tensors[t];
    r.need(4 * info.size, "tensor " + info.name);
    for (float& v : p.tensor(t)) v = r.f32(info.name);
  }
  if (r.remaining() != 0)
    throw ParseError(std::to_string(r.remaining()) + " trailing bytes after the last tensor",
                     r.position());
  return p;
}

void save_model(const std::string& path, const ModelParameters& params) {
  const auto bytes = serialize_model(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelParameters load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open model " + path, "train");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace hbc
