#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tram/analysis.hpp"
#include "tram/solver.hpp"
#include "tram/transient.hpp"

namespace tram {

/// Scientific notation, 9 significant digits ("%.8e"), locale-independent.
std::string format_sci(double v);

/// FNV-1a 64-bit over raw bytes; used as the config digest.
std::uint64_t fnv1a64(const std::string& bytes);

std::string sweep_csv(const SweepResult& sweep);
std::string sweep_csv(const SweepResult& up, const SweepResult& down);

/// 9-column state snapshot: x_m, psi_V, n_cm3, p_cm3, Efield_Vcm,
/// Ec_eV, Ev_eV, Efn_eV, Efp_eV. Field values are node-centered averages
/// of the adjacent edge fields (one-sided at contacts).
std::string snapshot_csv(const DeviceContext& ctx, const StateVector& state);

std::string transient_csv(const TransientRecord& rec);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& structure,
                            const MemoryMetrics& m);
std::string metrics_report(const std::string& structure,
                           const MemoryMetrics& m);

void write_file(const std::string& path, const std::string& content);

struct ManifestInfo {
  std::string config_path;
  std::uint64_t config_digest = 0;
  std::string command;
  std::vector<std::string> outputs;
  std::string started_utc;
  std::string finished_utc;
};

/// Writes <out_dir>/manifest.json.
void write_manifest(const std::string& out_dir, const ManifestInfo& info);

std::string utc_timestamp();

} // namespace tram
