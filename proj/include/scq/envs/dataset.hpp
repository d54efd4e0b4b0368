#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scq/envs/env.hpp"
#include "scq/types.hpp"

namespace scq::envs {

struct Transition {
  Vector state;
  Vector action;
  Real reward = 0.0;
  Vector next_state;
  bool done = false;
};

struct DatasetMeta {
  std::string env;
  std::string behavior;
  std::uint64_t seed = 0;
  Index size = 0;
  Index state_dim = 0;
  Index action_dim = 0;
  Real fraction = 1.0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Transition> transitions;
};

// Rolls the scripted controller for the given tier until n transitions are
// stored. Tiers: random, medium, expert, plus the 50/50 interleavings
// medium-replay-mix (medium with random) and medium-expert-mix. Fully
// deterministic for a fixed (spec, behavior, n, seed).
Dataset generate_dataset(const EnvSpec& spec, std::string_view behavior, Index n_transitions,
                         std::uint64_t seed);

// Uniform sample without replacement of floor(fraction * size) transitions,
// original order preserved.
Dataset subsample(const Dataset& dataset, Real fraction, std::uint64_t seed);

// Column views for batch assembly (one row per transition; dones as 0/1).
Matrix states_matrix(const Dataset& dataset);
Matrix actions_matrix(const Dataset& dataset);
Vector rewards_vector(const Dataset& dataset);
Matrix next_states_matrix(const Dataset& dataset);
Vector dones_vector(const Dataset& dataset);

// Binary layout: magic "SCQD", format version u32, length-prefixed JSON
// metadata, then five length-prefixed little-endian columns in order:
// states, actions, rewards, next_states (float32) and dones (one byte per
// transition). Values quantize to float32 on write.
std::string encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::string_view bytes);

// Header row plus one row per transition, floats in shortest round-trip
// form, so the export is lossless against the stored float32 columns.
std::string dataset_csv(const Dataset& dataset);

}  // namespace scq::envs
