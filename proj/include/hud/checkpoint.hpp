#pragma once

#include <string>

#include "hud/config.hpp"
#include "hud/parameter_store.hpp"

namespace hud {

/// Binary checkpoint: magic, format version, config hash, optimizer step,
/// noise stream state, then every parameter (sorted by name) with its value
/// and Adam moments, closed by an FNV-1a checksum of the preceding bytes.
void save_checkpoint(const std::string& path, const RunConfig& cfg,
                     const ParameterStore& store);

/// Reads a checkpoint back and validates it against `cfg`: magic/version,
/// whole-file checksum (catches truncation), config-hash equality, and an
/// exact shape match against the parameter layout `cfg` induces. Errors
/// name the offending parameter.
ParameterStore load_checkpoint(const std::string& path, const RunConfig& cfg);

}  // namespace hud
