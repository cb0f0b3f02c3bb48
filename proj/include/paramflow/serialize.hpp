// SPDX-License-Identifier: Apache-2.0
#pragma once

// File formats. Every artifact is a JSON manifest next to a raw binary blob
// of 64-bit little-endian floats; the manifest names the blob, the layout,
// and the provenance (version, seed, resolved-config hash). Checkpoints carry
// no wall-clock fields so identical runs produce identical bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paramflow/control.hpp"
#include "paramflow/model.hpp"
#include "paramflow/ode.hpp"

namespace pf::io {

inline constexpr const char* kVersion = "0.1.0";

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;  // hex fnv-1a of the resolved config text
};

// ---- parameter vectors ----

void save_params(const std::string& base, const rom::ParamVector& pv, const Provenance& prov);
rom::ParamVector load_params(const std::string& base);

// ---- control checkpoints ----

struct CheckpointMeta {
  Provenance prov;
  int iterations = 0;
  double final_loss = 0.0;
  std::string stop_reason;
};

void save_checkpoint(const std::string& base, const ctrl::ControlParams& params,
                     const CheckpointMeta& meta);
struct Checkpoint {
  ctrl::ControlParams params;
  CheckpointMeta meta;
};
Checkpoint load_checkpoint(const std::string& base);

// ---- trajectories ----

void save_trajectory(const std::string& base, const ode::Trajectory& tr, const Provenance& prov,
                     bool with_csv = true);
ode::Trajectory load_trajectory(const std::string& base);

// raw helpers shared by the formats above
void write_doubles_le(const std::string& path, std::span<const double> data);
std::vector<double> read_doubles_le(const std::string& path, std::size_t expect);

}  // namespace pf::io
