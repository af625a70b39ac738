#include "tram/device.hpp"

#include <algorithm>
#include <cmath>

namespace tram {

double DeviceSpec::total_length_m() const {
  double sum = 0.0;
  for (const auto& r : regions) sum += r.length_m;
  return sum;
}

void DeviceSpec::validate() const {
  if (regions.size() < 2)
    throw ValidationError("device: needs at least 2 regions, got " +
                          std::to_string(regions.size()));
  for (const auto& r : regions) {
    if (!(r.length_m > 0.0))
      throw ValidationError("region '" + r.name + "': length_nm must be > 0");
    if (r.concentration_cm3 < 0.0)
      throw ValidationError("region '" + r.name +
                            "': concentration_cm3 must be >= 0");
    if (r.type == DopingType::intrinsic && r.concentration_cm3 != 0.0)
      throw ValidationError("region '" + r.name +
                            "': intrinsic region must have concentration 0");
    if (r.type != DopingType::intrinsic && r.concentration_cm3 == 0.0)
      throw ValidationError("region '" + r.name +
                            "': doped region must have concentration > 0");
  }
  if (!(area_cm2 > 0.0))
    throw ValidationError("device: area_cm2 must be > 0");
  if (!(temperature_K > 0.0))
    throw ValidationError("device: temperature_K must be > 0");
  if (gate) {
    if (gate->region < 0 || gate->region >= static_cast<int>(regions.size()))
      throw ValidationError("gate: region index " +
                            std::to_string(gate->region) + " out of range");
    if (!(gate->tox_m > 0.0))
      throw ValidationError("gate: tox_nm must be > 0");
    if (!(gate->eps_ox_rel > 0.0))
      throw ValidationError("gate: eps_ox_rel must be > 0");
    if (!(gate->body_thickness_m > 0.0))
      throw ValidationError("gate: tbody_nm must be > 0");
    if (regions[gate->region].type != DopingType::acceptor)
      throw ValidationError("gate: covered region '" +
                            regions[gate->region].name +
                            "' must be acceptor-doped (p-body)");
  }
}

namespace {

// Node offsets within one region of length L: spacing s0 at both ends,
// growing geometrically by <= r toward the interior, capped at the uniform
// spacing L/(P-1).
std::vector<double> region_offsets(double length, int points, double s0,
                                   double ratio, const std::string& name) {
  constexpr std::size_t kMaxNodes = 200000;
  const double hu = length / (points - 1);
  if (!(hu > 1e-13))
    throw MeshError("mesh: region '" + name +
                    "' too short for requested points_per_region");
  std::vector<double> off;
  off.push_back(0.0);
  if (s0 >= hu) {
    for (int i = 1; i < points; ++i) off.push_back(i * hu);
    off.back() = length;
    return off;
  }
  // graded ends
  std::vector<double> left, right; // spacings
  double s = s0, pos = 0.0;
  while (s < hu && pos + s < 0.5 * length) {
    left.push_back(s);
    pos += s;
    s *= ratio;
    if (left.size() > kMaxNodes)
      throw MeshError("mesh: refinement in region '" + name +
                      "' needs too many nodes");
  }
  right = left;
  const double gap = length - 2.0 * pos;
  const int mid = std::max(1, static_cast<int>(std::ceil(gap / hu)));
  if (left.size() * 2 + mid + 1 > kMaxNodes)
    throw MeshError("mesh: region '" + name + "' needs too many nodes");
  double x = 0.0;
  for (double d : left) off.push_back(x += d);
  for (int i = 1; i <= mid; ++i) off.push_back(pos + gap * i / mid);
  x = pos + gap;
  for (auto it = right.rbegin(); it != right.rend(); ++it)
    off.push_back(x += *it);
  off.back() = length;
  return off;
}

} // namespace

Mesh1D build_mesh(const DeviceSpec& dev, const MeshConfig& cfg) {
  dev.validate();
  if (cfg.points_per_region < 3)
    throw std::invalid_argument("mesh: points_per_region must be >= 3");
  if (!(cfg.junction_refine_m > 0.0))
    throw std::invalid_argument("mesh: junction_refine_nm must be > 0");
  if (!(cfg.refine_ratio > 1.0))
    throw std::invalid_argument("mesh: refine_ratio must be > 1");

  Mesh1D m;
  double x0 = 0.0;
  for (std::size_t r = 0; r < dev.regions.size(); ++r) {
    const auto& reg = dev.regions[r];
    const auto off = region_offsets(reg.length_m, cfg.points_per_region,
                                    cfg.junction_refine_m, cfg.refine_ratio,
                                    reg.name);
    const std::size_t start = r == 0 ? 0 : 1; // boundary node shared
    for (std::size_t k = start; k < off.size(); ++k) {
      m.x_m.push_back(x0 + off[k]);
      m.region_index.push_back(static_cast<int>(r));
      m.net_doping_cm3.push_back(reg.signed_doping_cm3());
    }
    x0 += reg.length_m;
    if (r + 1 < dev.regions.size())
      m.junction_nodes.push_back(m.x_m.size() - 1);
  }

  // Junction-node doping: volume-weighted average of the two abrupt sides,
  // so the node-volume quadrature of the doping integral is exact.
  for (std::size_t j : m.junction_nodes) {
    const double h_l = m.x_m[j] - m.x_m[j - 1];
    const double h_r = m.x_m[j + 1] - m.x_m[j];
    const double n_l = dev.regions[m.region_index[j]].signed_doping_cm3();
    const double n_r =
        dev.regions[m.region_index[j] + 1].signed_doping_cm3();
    m.net_doping_cm3[j] = (n_l * h_l + n_r * h_r) / (h_l + h_r);
  }

  m.gate_mask.assign(m.node_count(), 0);
  if (dev.gate) {
    double g0 = 0.0;
    for (int r = 0; r < dev.gate->region; ++r) g0 += dev.regions[r].length_m;
    const double g1 = g0 + dev.regions[dev.gate->region].length_m;
    for (std::size_t i = 0; i < m.node_count(); ++i)
      m.gate_mask[i] = (m.x_m[i] >= g0 && m.x_m[i] <= g1) ? 1 : 0;
  }
  return m;
}

double doping_at(const Mesh1D& mesh, std::size_t node) {
  if (node >= mesh.node_count())
    throw std::out_of_range("doping_at: node index " + std::to_string(node) +
                            " out of range");
  return mesh.net_doping_cm3[node];
}

} // namespace tram
