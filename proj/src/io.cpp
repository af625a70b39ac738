#include "tram/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tram {

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8e", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

const char* dir_name(SweepDirection d) {
  return d == SweepDirection::up ? "up" : "down";
}

void sweep_rows(std::ostringstream& out, const SweepResult& s) {
  for (const auto& r : s.records) {
    out << dir_name(s.direction) << ',' << format_sci(r.bias.v_anode_V) << ','
        << format_sci(r.bias.v_gate_V) << ',' << format_sci(r.i_anode_A) << ','
        << (r.converged ? 1 : 0) << ',' << r.iterations << '\n';
  }
}

} // namespace

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "direction,v_anode_V,v_gate_V,i_anode_A,converged,iterations\n";
  sweep_rows(out, sweep);
  return out.str();
}

std::string sweep_csv(const SweepResult& up, const SweepResult& down) {
  std::ostringstream out;
  out << "direction,v_anode_V,v_gate_V,i_anode_A,converged,iterations\n";
  sweep_rows(out, up);
  sweep_rows(out, down);
  return out.str();
}

std::string snapshot_csv(const DeviceContext& ctx, const StateVector& s) {
  const BandDiagram bd = band_diagram(ctx, s);
  const FieldProfile fp = field_profile(ctx, s);
  const std::size_t n = s.size();
  std::ostringstream out;
  out << "x_m,psi_V,n_cm3,p_cm3,Efield_Vcm,Ec_eV,Ev_eV,Efn_eV,Efp_eV\n";
  for (std::size_t i = 0; i < n; ++i) {
    double e;
    if (i == 0)
      e = fp.e_Vcm.front();
    else if (i == n - 1)
      e = fp.e_Vcm.back();
    else
      e = 0.5 * (fp.e_Vcm[i - 1] + fp.e_Vcm[i]);
    out << format_sci(ctx.mesh.x_m[i]) << ',' << format_sci(s.psi_V[i]) << ','
        << format_sci(s.n_cm3[i]) << ',' << format_sci(s.p_cm3[i]) << ','
        << format_sci(e) << ',' << format_sci(bd.ec_eV[i]) << ','
        << format_sci(bd.ev_eV[i]) << ',' << format_sci(bd.efn_eV[i]) << ','
        << format_sci(bd.efp_eV[i]) << '\n';
  }
  return out.str();
}

std::string transient_csv(const TransientRecord& rec) {
  std::ostringstream out;
  out << "t_s,v_anode_V,v_gate_V,i_anode_A,i_anode_disp_A,dt_s\n";
  for (const auto& s : rec.samples) {
    out << format_sci(s.t_s) << ',' << format_sci(s.v_anode_V) << ','
        << format_sci(s.v_gate_V) << ',' << format_sci(s.i_anode_A) << ','
        << format_sci(s.i_anode_disp_A) << ',' << format_sci(s.dt_s) << '\n';
  }
  return out.str();
}

std::string metrics_csv_header() {
  return "structure,v_bo_V,v_hold_knee_V,window_V,on_off_ratio,i_hold_A\n";
}

std::string metrics_csv_row(const std::string& structure,
                            const MemoryMetrics& m) {
  std::ostringstream out;
  out << structure << ',' << format_sci(m.v_breakover_V) << ','
      << format_sci(m.v_hold_knee_V) << ',' << format_sci(m.memory_window_V)
      << ',' << format_sci(m.on_off_ratio) << ',' << format_sci(m.i_hold_A)
      << '\n';
  return out.str();
}

std::string metrics_report(const std::string& structure,
                           const MemoryMetrics& m) {
  std::ostringstream out;
  out << "structure: " << structure << '\n'
      << "  v_breakover_V:   " << format_sci(m.v_breakover_V) << '\n'
      << "  v_hold_knee_V:   " << format_sci(m.v_hold_knee_V) << '\n'
      << "  memory_window_V: " << format_sci(m.memory_window_V) << '\n'
      << "  on_off_ratio:    " << format_sci(m.on_off_ratio) << '\n'
      << "  i_hold_A:        " << format_sci(m.i_hold_A) << '\n'
      << "  read_threshold_A:" << ' ' << format_sci(m.read_threshold_A)
      << '\n';
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& out_dir, const ManifestInfo& info) {
  nlohmann::json j;
  j["config_path"] = info.config_path;
  char digest[20];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(info.config_digest));
  j["config_digest_fnv1a64"] = digest;
  j["tool_version"] = "1.0.0";
  j["command"] = info.command;
  j["outputs"] = info.outputs;
  j["started_utc"] = info.started_utc;
  j["finished_utc"] = info.finished_utc;
  write_file((std::filesystem::path(out_dir) / "manifest.json").string(),
             j.dump(2) + "\n");
}

} // namespace tram
