#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scq/types.hpp"

namespace scq::nn {

struct NamedTensor {
  std::string name;
  Vector values;
};

// Checkpoint layout: magic "SCQC", u32 version, length-prefixed JSON
// manifest, then one length-prefixed little-endian float32 run per entry of
// manifest["tensors"], in that order. The manifest carries architecture,
// step counters, and schedule state; tensors are listed by name and length.
std::string encode_checkpoint(nlohmann::json manifest, const std::vector<NamedTensor>& tensors);

std::pair<nlohmann::json, std::vector<NamedTensor>> decode_checkpoint(std::string_view bytes);

}  // namespace scq::nn
