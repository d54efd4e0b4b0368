#include <stdexcept>

#include <json.hpp>

#include "scq/envs/dataset.hpp"
#include "scq/util/io.hpp"

namespace scq::envs {

namespace {

constexpr std::string_view kMagic = "SCQD";
constexpr std::uint32_t kVersion = 1;

void append_column(std::string& out, const std::vector<Transition>& transitions,
                   Index width, const Vector Transition::*field) {
  append_u64_le(out, static_cast<std::uint64_t>(transitions.size()) *
                         static_cast<std::uint64_t>(width));
  for (const Transition& t : transitions)
    for (Index i = 0; i < width; ++i) append_f32_le(out, static_cast<float>((t.*field)[i]));
}

}  // namespace

std::string encode_dataset(const Dataset& dataset) {
  if (dataset.transitions.empty()) throw std::invalid_argument("nonempty dataset required");

  nlohmann::json meta;
  meta["env"] = dataset.meta.env;
  meta["behavior"] = dataset.meta.behavior;
  meta["seed"] = dataset.meta.seed;
  meta["size"] = dataset.meta.size;
  meta["state_dim"] = dataset.meta.state_dim;
  meta["action_dim"] = dataset.meta.action_dim;
  meta["fraction"] = dataset.meta.fraction;

  std::string out(kMagic);
  append_u32_le(out, kVersion);
  const std::string meta_bytes = meta.dump();
  append_u64_le(out, meta_bytes.size());
  out += meta_bytes;

  append_column(out, dataset.transitions, dataset.meta.state_dim, &Transition::state);
  append_column(out, dataset.transitions, dataset.meta.action_dim, &Transition::action);
  append_u64_le(out, dataset.transitions.size());
  for (const Transition& t : dataset.transitions)
    append_f32_le(out, static_cast<float>(t.reward));
  append_column(out, dataset.transitions, dataset.meta.state_dim, &Transition::next_state);
  append_u64_le(out, dataset.transitions.size());
  for (const Transition& t : dataset.transitions) out.push_back(t.done ? '\x01' : '\x00');
  return out;
}

Dataset decode_dataset(std::string_view bytes) {
  ByteReader reader(bytes);
  if (reader.read_bytes(kMagic.size()) != kMagic)
    throw std::runtime_error("not a dataset: bad magic");
  const std::uint32_t version = reader.read_u32_le();
  if (version != kVersion)
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));

  const std::uint64_t meta_len = reader.read_u64_le();
  const nlohmann::json meta = nlohmann::json::parse(reader.read_bytes(meta_len));

  Dataset dataset;
  dataset.meta.env = meta.at("env").get<std::string>();
  dataset.meta.behavior = meta.at("behavior").get<std::string>();
  dataset.meta.seed = meta.at("seed").get<std::uint64_t>();
  dataset.meta.size = meta.at("size").get<Index>();
  dataset.meta.state_dim = meta.at("state_dim").get<Index>();
  dataset.meta.action_dim = meta.at("action_dim").get<Index>();
  dataset.meta.fraction = meta.at("fraction").get<Real>();

  const Index n = dataset.meta.size;
  const Index sd = dataset.meta.state_dim;
  const Index ad = dataset.meta.action_dim;
  if (n <= 0 || sd <= 0 || ad <= 0)
    throw std::runtime_error("dataset metadata has non-positive dimensions");

  const auto read_column = [&](Index width) {
    if (reader.read_u64_le() != static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(width))
      throw std::runtime_error("dataset column length disagrees with the metadata");
    Matrix m(n, width);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < width; ++c) m(r, c) = static_cast<Real>(reader.read_f32_le());
    return m;
  };

  const Matrix states = read_column(sd);
  const Matrix actions = read_column(ad);
  const Matrix rewards = read_column(1);
  const Matrix next_states = read_column(sd);

  if (reader.read_u64_le() != static_cast<std::uint64_t>(n))
    throw std::runtime_error("dataset column length disagrees with the metadata");
  std::vector<bool> dones(static_cast<std::size_t>(n));
  const std::string_view done_bytes = reader.read_bytes(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const char b = done_bytes[static_cast<std::size_t>(i)];
    if (b != '\x00' && b != '\x01')
      throw std::runtime_error("dataset done flags must be 0 or 1");
    dones[static_cast<std::size_t>(i)] = b == '\x01';
  }
  if (!reader.at_end()) throw std::runtime_error("dataset has trailing bytes");

  dataset.transitions.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    dataset.transitions.push_back({states.row(i).transpose(), actions.row(i).transpose(),
                                   rewards(i, 0), next_states.row(i).transpose(),
                                   dones[static_cast<std::size_t>(i)]});
  return dataset;
}

std::string dataset_csv(const Dataset& dataset) {
  std::string out;
  const Index sd = dataset.meta.state_dim;
  const Index ad = dataset.meta.action_dim;
  for (Index i = 0; i < sd; ++i) out += "state" + std::to_string(i) + ",";
  for (Index i = 0; i < ad; ++i) out += "action" + std::to_string(i) + ",";
  out += "reward,";
  for (Index i = 0; i < sd; ++i) out += "next_state" + std::to_string(i) + ",";
  out += "done\n";

  for (const Transition& t : dataset.transitions) {
    for (Index i = 0; i < sd; ++i) out += format_float(static_cast<float>(t.state[i])) + ",";
    for (Index i = 0; i < ad; ++i) out += format_float(static_cast<float>(t.action[i])) + ",";
    out += format_float(static_cast<float>(t.reward)) + ",";
    for (Index i = 0; i < sd; ++i)
      out += format_float(static_cast<float>(t.next_state[i])) + ",";
    out += t.done ? "1\n" : "0\n";
  }
  return out;
}

}  // namespace scq::envs
