#include "scq/nn/checkpoint.hpp"

#include <stdexcept>

#include "scq/util/io.hpp"

namespace scq::nn {

namespace {

constexpr std::string_view kMagic = "SCQC";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string encode_checkpoint(nlohmann::json manifest, const std::vector<NamedTensor>& tensors) {
  nlohmann::json listing = nlohmann::json::array();
  for (const NamedTensor& t : tensors)
    listing.push_back({{"name", t.name}, {"count", t.values.size()}});
  manifest["tensors"] = std::move(listing);

  std::string out(kMagic);
  append_u32_le(out, kVersion);
  const std::string manifest_bytes = manifest.dump();
  append_u64_le(out, manifest_bytes.size());
  out += manifest_bytes;
  for (const NamedTensor& t : tensors) {
    append_u64_le(out, static_cast<std::uint64_t>(t.values.size()));
    for (Index i = 0; i < t.values.size(); ++i)
      append_f32_le(out, static_cast<float>(t.values[i]));
  }
  return out;
}

std::pair<nlohmann::json, std::vector<NamedTensor>> decode_checkpoint(std::string_view bytes) {
  ByteReader reader(bytes);
  if (reader.read_bytes(kMagic.size()) != kMagic)
    throw std::runtime_error("not a checkpoint: bad magic");
  const std::uint32_t version = reader.read_u32_le();
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  const std::uint64_t manifest_len = reader.read_u64_le();
  nlohmann::json manifest = nlohmann::json::parse(reader.read_bytes(manifest_len));
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
    throw std::runtime_error("checkpoint manifest lacks a tensor listing");

  std::vector<NamedTensor> tensors;
  for (const nlohmann::json& entry : manifest["tensors"]) {
    const std::uint64_t count = reader.read_u64_le();
    if (count != entry.at("count").get<std::uint64_t>())
      throw std::runtime_error("checkpoint tensor length disagrees with the manifest");
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.values.resize(static_cast<Index>(count));
    for (Index i = 0; i < t.values.size(); ++i)
      t.values[i] = static_cast<Real>(reader.read_f32_le());
    tensors.push_back(std::move(t));
  }
  if (!reader.at_end()) throw std::runtime_error("checkpoint has trailing bytes");
  return {std::move(manifest), std::move(tensors)};
}

}  // namespace scq::nn
