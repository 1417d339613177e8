#include "fednilm/checkpoint.hpp"

#include "fednilm/bytes.hpp"
#include "fednilm/error.hpp"

namespace fednilm {

namespace {
constexpr char kMagic[] = "FNCK";
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  const ModelConfig& m = c.model;
  std::vector<std::uint8_t> out;
  bytes::put_raw(out, std::string_view(kMagic, 4));
  bytes::put_le(out, kVersion);
  for (std::size_t v : {m.window_len, m.appliance_count, m.encoder_channels[0], m.encoder_channels[1],
                        m.encoder_channels[2], m.downsample_factors[0], m.downsample_factors[1],
                        m.pool_branch_count, m.branch_channels, m.decoder_channels}) {
    bytes::put_le(out, static_cast<std::uint32_t>(v));
  }
  bytes::put_f64(out, m.dropout_p);
  bytes::put_le(out, m.init_seed);
  bytes::put_f64(out, c.mean_w);
  bytes::put_le(out, static_cast<std::uint64_t>(c.params.values.size()));
  for (float v : c.params.values) bytes::put_f32(out, v);
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  bytes::Reader<DataError> in(data);
  if (in.str(4) != std::string_view(kMagic, 4)) throw DataError("not a checkpoint (bad magic)");
  if (const auto v = in.le<std::uint16_t>(); v != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint c;
  ModelConfig& m = c.model;
  m.window_len = in.le<std::uint32_t>();
  m.appliance_count = in.le<std::uint32_t>();
  for (auto& ch : m.encoder_channels) ch = in.le<std::uint32_t>();
  for (auto& f : m.downsample_factors) f = in.le<std::uint32_t>();
  m.pool_branch_count = in.le<std::uint32_t>();
  m.branch_channels = in.le<std::uint32_t>();
  m.decoder_channels = in.le<std::uint32_t>();
  m.dropout_p = in.f64();
  m.init_seed = in.le<std::uint64_t>();
  c.mean_w = in.f64();
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint holds an invalid architecture: ") + e.what());
  }
  const auto layout = build_layout(m);
  const auto n = in.le<std::uint64_t>();
  if (n != layout->total_size() || in.remaining() != 4 * n) {
    throw DataError("checkpoint parameter block does not match its architecture");
  }
  c.params.layout = layout;
  c.params.values.resize(n);
  for (float& v : c.params.values) v = in.f32();
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  bytes::write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(bytes::read_file(path)); }

}  // namespace fednilm
