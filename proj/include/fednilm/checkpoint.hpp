#pragma once

#include <string>

#include "fednilm/model.hpp"
#include "fednilm/params.hpp"

namespace fednilm {

struct Checkpoint {
  ModelConfig model;
  ParamVector<float> params;
  double mean_w = 0;  // normalization mean the model was trained with
};

/// "FNCK", u16 version, architecture fields, normalization mean, then the
/// parameter count and little-endian f32 values in layout order.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fednilm
