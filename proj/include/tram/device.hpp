#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tram {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : ConfigError {
  using ConfigError::ConfigError;
};
struct ValidationError : ConfigError {
  using ConfigError::ConfigError;
};
struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DopingType { donor, acceptor, intrinsic };

struct RegionSpec {
  std::string name;
  double length_m = 0.0;
  DopingType type = DopingType::intrinsic;
  double concentration_cm3 = 0.0; // net dopant magnitude

  double signed_doping_cm3() const {
    switch (type) {
      case DopingType::donor: return concentration_cm3;
      case DopingType::acceptor: return -concentration_cm3;
      default: return 0.0;
    }
  }
};

struct GateSpec {
  int region = -1;              // covered region index
  double tox_m = 5e-9;          // oxide thickness
  double eps_ox_rel = 3.9;      // SiO2
  double vfb_V = 0.0;           // flatband voltage
  double body_thickness_m = 200e-9; // smear depth for the sheet charge
};

struct DeviceSpec {
  std::vector<RegionSpec> regions; // anode end first
  double area_cm2 = 3.0e-10;       // 150 nm x 200 nm
  double temperature_K = 300.0;
  std::optional<GateSpec> gate;

  double total_length_m() const;
  /// Throws ValidationError on any invariant violation.
  void validate() const;
};

struct MeshConfig {
  int points_per_region = 40;
  double junction_refine_m = 1.0e-9;
  double refine_ratio = 1.3;
};

struct Mesh1D {
  std::vector<double> x_m;             // strictly increasing, node 0 = anode
  std::vector<double> net_doping_cm3;  // signed, donor positive
  std::vector<char> gate_mask;         // node under the gate
  std::vector<int> region_index;
  std::vector<std::size_t> junction_nodes; // metallurgical junctions

  std::size_t node_count() const { return x_m.size(); }
};

/// Geometrically graded mesh with every region boundary on a node and
/// abrupt per-node doping. Throws MeshError / std::invalid_argument.
Mesh1D build_mesh(const DeviceSpec& dev, const MeshConfig& cfg);

double doping_at(const Mesh1D& mesh, std::size_t node);

} // namespace tram
