#include "csiadv/net/model_io.hpp"

#include "csiadv/binary_io.hpp"

namespace csiadv::net {

namespace {

constexpr std::string_view kMagic = "CSIM";

// Every tensor record of a model in file order.
template <typename Model, typename Tensorish>
std::vector<Tensorish*> records(Model& m) {
  std::vector<Tensorish*> out;
  auto block = [&](auto& b) {
    out.insert(out.end(), {&b.weights.value, &b.bias.value, &b.gamma.value, &b.beta.value,
                           &b.stats.mean, &b.stats.var});
  };
  block(m.encoder_conv);
  out.insert(out.end(), {&m.encoder_fc_weights.value, &m.encoder_fc_bias.value,
                         &m.decoder_fc_weights.value, &m.decoder_fc_bias.value});
  for (auto& unit : m.refine)
    for (auto& b : unit.blocks) block(b);
  out.insert(out.end(), {&m.output_weights.value, &m.output_bias.value});
  return out;
}

[[noreturn]] void shape_error(const std::string& origin, const std::string& what) {
  throw FormatError(FormatErrorKind::kShapeMismatch, origin + ": " + what);
}

}  // namespace

std::vector<char> serialize_model(const CsiNetParams<float>& model) {
  const auto recs = records<const CsiNetParams<float>, const Tensor<float>>(model);
  io::ByteWriter w;
  w.magic(kMagic);
  w.u16(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.config.nc));
  w.u32(static_cast<std::uint32_t>(model.config.nt));
  w.u32(static_cast<std::uint32_t>(model.config.codeword));
  w.u16(static_cast<std::uint16_t>(recs.size()));
  for (const auto* t : recs) {
    w.u8(static_cast<std::uint8_t>(t->rank()));
    for (std::size_t d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(t->values());
  }
  return w.bytes();
}

void save_model(const CsiNetParams<float>& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_model(model));
}

CsiNetParams<float> deserialize_model(std::vector<char> bytes, const std::string& origin,
                                      const std::optional<ModelConfig>& expected) {
  io::ByteReader r(std::move(bytes), origin);
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16();
  if (version != kModelVersion) {
    throw FormatError(FormatErrorKind::kVersionMismatch,
                      origin + ": model version " + std::to_string(version) + ", expected " +
                          std::to_string(kModelVersion));
  }
  ModelConfig cfg;
  cfg.nc = r.u32();
  cfg.nt = r.u32();
  cfg.codeword = r.u32();
  if (expected && !(*expected == cfg)) {
    shape_error(origin, "model is Nc=" + std::to_string(cfg.nc) + " Nt=" + std::to_string(cfg.nt) +
                            " M=" + std::to_string(cfg.codeword) + ", expected Nc=" +
                            std::to_string(expected->nc) + " Nt=" + std::to_string(expected->nt) +
                            " M=" + std::to_string(expected->codeword));
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    shape_error(origin, e.what());
  }
  CsiNetParams<float> model = build_model<float>(cfg, 0);
  const auto recs = records<CsiNetParams<float>, Tensor<float>>(model);
  const std::uint16_t count = r.u16();
  if (count != recs.size()) {
    shape_error(origin, std::to_string(count) + " tensor records, expected " +
                            std::to_string(recs.size()));
  }
  for (std::size_t i = 0; i < recs.size(); ++i) {
    Tensor<float>& t = *recs[i];
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (shape != t.shape()) {
      shape_error(origin, "record " + std::to_string(i) + " has shape " + grad::shape_string(shape) +
                              ", expected " + grad::shape_string(t.shape()));
    }
    r.f32s(t.values());
  }
  if (r.remaining() != 0) {
    shape_error(origin, std::to_string(r.remaining()) + " unexpected trailing bytes");
  }
  for (auto* stats : model.batch_norms()) stats->initialized = true;
  return model;
}

CsiNetParams<float> load_model(const std::filesystem::path& path,
                               const std::optional<ModelConfig>& expected) {
  return deserialize_model(io::read_file(path), path.string(), expected);
}

}  // namespace csiadv::net
