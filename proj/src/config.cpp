#include "tram/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace tram {

namespace {

using nlohmann::json;

[[noreturn]] void unknown_key(const std::string& section,
                              const std::string& key) {
  throw ParseError("unknown key \"" + key + "\" in section \"" + section +
                   "\"");
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) unknown_key(section, key);
  }
}

double get_num(const json& obj, const std::string& section, const char* key,
               double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ParseError(section + "." + key + ": expected a number");
  return obj[key].get<double>();
}

DopingType parse_type(const std::string& s) {
  if (s == "donor") return DopingType::donor;
  if (s == "acceptor") return DopingType::acceptor;
  if (s == "intrinsic") return DopingType::intrinsic;
  throw ParseError("region type must be donor|acceptor|intrinsic, got \"" + s +
                   "\"");
}

const char* type_name(DopingType t) {
  switch (t) {
    case DopingType::donor: return "donor";
    case DopingType::acceptor: return "acceptor";
    default: return "intrinsic";
  }
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
}

DeviceSpec device_from_json(const json& dev) {
  check_keys(dev, "device",
             {"temperature_K", "area_cm2", "regions", "gate"});
  DeviceSpec spec;
  spec.temperature_K = get_num(dev, "device", "temperature_K", 300.0);
  spec.area_cm2 = get_num(dev, "device", "area_cm2", 3.0e-10);
  if (!dev.contains("regions") || !dev["regions"].is_array())
    throw ParseError("device.regions: expected an array");
  spec.regions.clear();
  for (const auto& r : dev["regions"]) {
    check_keys(r, "device.regions[]",
               {"name", "length_nm", "type", "concentration_cm3"});
    RegionSpec rs;
    rs.name = r.value("name", "");
    rs.length_m = get_num(r, "region", "length_nm", 0.0) * 1e-9;
    if (!r.contains("type") || !r["type"].is_string())
      throw ParseError("device.regions[].type: expected a string");
    rs.type = parse_type(r["type"].get<std::string>());
    rs.concentration_cm3 = get_num(r, "region", "concentration_cm3", 0.0);
    spec.regions.push_back(std::move(rs));
  }
  if (dev.contains("gate")) {
    const json& g = dev["gate"];
    check_keys(g, "device.gate",
               {"region", "tox_nm", "eps_ox_rel", "vfb_V", "tbody_nm"});
    GateSpec gs;
    if (!g.contains("region") || !g["region"].is_number_integer())
      throw ParseError("device.gate.region: expected a region index");
    gs.region = g["region"].get<int>();
    gs.tox_m = get_num(g, "gate", "tox_nm", 5.0) * 1e-9;
    gs.eps_ox_rel = get_num(g, "gate", "eps_ox_rel", 3.9);
    gs.vfb_V = get_num(g, "gate", "vfb_V", 0.0);
    gs.body_thickness_m = get_num(g, "gate", "tbody_nm", 200.0) * 1e-9;
    spec.gate = gs;
  }
  spec.validate();
  return spec;
}

MaterialParams material_from_json(const json& m) {
  check_keys(m, "material",
             {"eps_r", "ni_cm3", "mu_n", "mu_p", "tau_n_s", "tau_p_s",
              "eg_eV", "mobility_model"});
  MaterialParams mat;
  mat.eps_r = get_num(m, "material", "eps_r", mat.eps_r);
  mat.ni_cm3 = get_num(m, "material", "ni_cm3", mat.ni_cm3);
  mat.mu_n = get_num(m, "material", "mu_n", mat.mu_n);
  mat.mu_p = get_num(m, "material", "mu_p", mat.mu_p);
  mat.tau_n_s = get_num(m, "material", "tau_n_s", mat.tau_n_s);
  mat.tau_p_s = get_num(m, "material", "tau_p_s", mat.tau_p_s);
  mat.eg_eV = get_num(m, "material", "eg_eV", mat.eg_eV);
  if (m.contains("mobility_model")) {
    const std::string mm = m["mobility_model"].get<std::string>();
    if (mm == "constant")
      mat.mobility_model = MobilityModel::constant;
    else if (mm == "caughey_thomas")
      mat.mobility_model = MobilityModel::caughey_thomas;
    else
      throw ParseError(
          "material.mobility_model must be constant|caughey_thomas, got \"" +
          mm + "\"");
  }
  mat.validate();
  return mat;
}

MeshConfig mesh_from_json(const json& m) {
  check_keys(m, "mesh",
             {"points_per_region", "junction_refine_nm", "refine_ratio"});
  MeshConfig mc;
  mc.points_per_region =
      static_cast<int>(get_num(m, "mesh", "points_per_region",
                               mc.points_per_region));
  mc.junction_refine_m =
      get_num(m, "mesh", "junction_refine_nm", 1.0) * 1e-9;
  mc.refine_ratio = get_num(m, "mesh", "refine_ratio", mc.refine_ratio);
  if (mc.points_per_region < 3)
    throw ParseError("mesh.points_per_region must be >= 3");
  if (!(mc.junction_refine_m > 0) || !(mc.refine_ratio >= 1.0))
    throw ParseError("mesh: refine spacing must be > 0 and ratio >= 1");
  return mc;
}

SolverConfig solver_from_json(const json& s) {
  check_keys(s, "solver",
             {"max_gummel_iters", "max_newton_iters", "psi_update_tol_vt",
              "residual_tol", "max_step_vt", "dv_init_V", "dv_min_V",
              "allow_pseudo_transient"});
  SolverConfig sc;
  sc.max_gummel_iters = static_cast<int>(
      get_num(s, "solver", "max_gummel_iters", sc.max_gummel_iters));
  sc.max_newton_iters = static_cast<int>(
      get_num(s, "solver", "max_newton_iters", sc.max_newton_iters));
  sc.psi_update_tol_vt =
      get_num(s, "solver", "psi_update_tol_vt", sc.psi_update_tol_vt);
  sc.residual_tol = get_num(s, "solver", "residual_tol", sc.residual_tol);
  sc.max_step_vt = get_num(s, "solver", "max_step_vt", sc.max_step_vt);
  sc.dv_init_V = get_num(s, "solver", "dv_init_V", sc.dv_init_V);
  sc.dv_min_V = get_num(s, "solver", "dv_min_V", sc.dv_min_V);
  if (s.contains("allow_pseudo_transient"))
    sc.allow_pseudo_transient = s["allow_pseudo_transient"].get<bool>();
  if (!(sc.psi_update_tol_vt > 0) || !(sc.residual_tol > 0) ||
      !(sc.max_step_vt > 0) || !(sc.dv_init_V > 0) || !(sc.dv_min_V > 0) ||
      sc.dv_min_V > sc.dv_init_V)
    throw ParseError("solver: tolerances must be positive, dv_min <= dv_init");
  return sc;
}

} // namespace

SimConfig parse_config(const std::string& text) {
  const json root = parse_json(text);
  check_keys(root, "(top level)", {"device", "material", "mesh", "solver"});
  if (!root.contains("device"))
    throw ParseError("missing required section \"device\"");
  SimConfig cfg;
  cfg.device = device_from_json(root["device"]);
  if (root.contains("material"))
    cfg.material = material_from_json(root["material"]);
  if (root.contains("mesh")) cfg.mesh = mesh_from_json(root["mesh"]);
  if (root.contains("solver")) cfg.solver = solver_from_json(root["solver"]);
  return cfg;
}

DeviceSpec parse_device_config(const std::string& text) {
  return parse_config(text).device;
}

std::string serialize_device_config(const DeviceSpec& spec) {
  json dev;
  dev["temperature_K"] = spec.temperature_K;
  dev["area_cm2"] = spec.area_cm2;
  dev["regions"] = json::array();
  for (const auto& r : spec.regions) {
    json jr;
    jr["name"] = r.name;
    jr["length_nm"] = r.length_m * 1e9;
    jr["type"] = type_name(r.type);
    jr["concentration_cm3"] = r.concentration_cm3;
    dev["regions"].push_back(jr);
  }
  if (spec.gate) {
    json g;
    g["region"] = spec.gate->region;
    g["tox_nm"] = spec.gate->tox_m * 1e9;
    g["eps_ox_rel"] = spec.gate->eps_ox_rel;
    g["vfb_V"] = spec.gate->vfb_V;
    g["tbody_nm"] = spec.gate->body_thickness_m * 1e9;
    dev["gate"] = g;
  }
  json root;
  root["device"] = dev;
  return root.dump(2) + "\n";
}

SequenceConfig parse_sequence(const std::string& text) {
  const json root = parse_json(text);
  check_keys(root, "(top level)",
             {"sequence", "lte_tol", "dt_max_s", "read_threshold_A"});
  if (!root.contains("sequence") || !root["sequence"].is_array())
    throw ParseError("missing required array \"sequence\"");
  SequenceConfig sc;
  for (const auto& op : root["sequence"]) {
    check_keys(op, "sequence[]",
               {"kind", "v_anode_V", "v_gate_V", "t_rise_s", "t_flat_s",
                "t_fall_s"});
    if (!op.contains("kind") || !op["kind"].is_string())
      throw ParseError("sequence[].kind: expected a string");
    const std::string kind = op["kind"].get<std::string>();
    PulseOp po;
    if (kind == "program")
      po.kind = PulseKind::program;
    else if (kind == "hold")
      po.kind = PulseKind::hold;
    else if (kind == "read")
      po.kind = PulseKind::read;
    else if (kind == "erase")
      po.kind = PulseKind::erase;
    else
      throw ParseError(
          "sequence[].kind must be program|hold|read|erase, got \"" + kind +
          "\"");
    po.v_anode_V = get_num(op, "sequence[]", "v_anode_V", 0.0);
    po.v_gate_V = get_num(op, "sequence[]", "v_gate_V", 0.0);
    po.t_rise_s = get_num(op, "sequence[]", "t_rise_s", 0.0);
    po.t_flat_s = get_num(op, "sequence[]", "t_flat_s", 0.0);
    po.t_fall_s = get_num(op, "sequence[]", "t_fall_s", 0.0);
    if (po.t_rise_s < 0 || po.t_flat_s < 0 || po.t_fall_s < 0)
      throw ParseError("sequence[]: pulse times must be >= 0");
    sc.ops.push_back(po);
  }
  if (sc.ops.empty()) throw ParseError("sequence must contain at least one op");
  sc.lte_tol = get_num(root, "sequence", "lte_tol", sc.lte_tol);
  sc.dt_max_s = get_num(root, "sequence", "dt_max_s", sc.dt_max_s);
  sc.read_threshold_A =
      get_num(root, "sequence", "read_threshold_A", sc.read_threshold_A);
  if (!(sc.lte_tol > 0)) throw ParseError("lte_tol must be > 0");
  return sc;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

SimConfig load_config_file(const std::string& path) {
  return parse_config(slurp(path));
}

SequenceConfig load_sequence_file(const std::string& path) {
  return parse_sequence(slurp(path));
}

} // namespace tram
