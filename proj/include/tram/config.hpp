#pragma once

#include <string>
#include <vector>

#include "tram/device.hpp"
#include "tram/physics.hpp"
#include "tram/solver.hpp"
#include "tram/transient.hpp"

namespace tram {

struct SimConfig {
  DeviceSpec device;
  MaterialParams material;
  MeshConfig mesh;
  SolverConfig solver;
};

/// Parses a full config document (device/material/mesh/solver sections).
/// Unknown keys are rejected with a ParseError naming the key.
SimConfig parse_config(const std::string& text);

/// Device section only; convenience wrapper over parse_config.
DeviceSpec parse_device_config(const std::string& text);

/// Serializes a DeviceSpec back to config text. Round-trips through
/// parse_device_config to an identical spec.
std::string serialize_device_config(const DeviceSpec& spec);

struct SequenceConfig {
  std::vector<PulseOp> ops;
  double lte_tol = 1e-3;
  double dt_max_s = 0.0; // 0 -> solver default
  double read_threshold_A = 1e-9;
};

/// Parses a pulse-sequence document: sequence list plus optional
/// lte_tol / dt_max_s / read_threshold_A overrides.
SequenceConfig parse_sequence(const std::string& text);

SimConfig load_config_file(const std::string& path);
SequenceConfig load_sequence_file(const std::string& path);

} // namespace tram
