#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "tram/solver.hpp"
#include "tram/transient.hpp"

namespace tram {

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BandDiagram {
  std::vector<double> x_m;
  std::vector<double> ec_eV, ev_eV, efn_eV, efp_eV;
};

struct FieldProfile {
  std::vector<double> x_m;   // edge midpoints
  std::vector<double> e_Vcm; // -dpsi/dx
};

/// Bands from psi; energies shifted so the cathode-contact electron
/// quasi-Fermi level sits at 0.
BandDiagram band_diagram(const DeviceContext& ctx, const StateVector& state);

FieldProfile field_profile(const DeviceContext& ctx, const StateVector& state);

struct MemoryMetrics {
  double v_breakover_V = 0.0;
  double v_hold_knee_V = 0.0;
  double memory_window_V = 0.0;
  double on_off_ratio = 0.0;
  double i_hold_A = 0.0; // down-sweep (ON-branch) current at the stated v_hold
  double read_threshold_A = 0.0;
};

/// Hysteresis metrics from an up/down sweep pair. Jump detection works on
/// log10 current with the given floor. i_hold is the down-sweep current at
/// the stated hold voltage, I_down(v_hold). Throws AnalysisError when no
/// jump (>= 1.5 decades between adjacent points) exists.
MemoryMetrics memory_metrics(const SweepResult& up, const SweepResult& down,
                             double v_read_V, double v_hold_V,
                             double on_off_floor_A = 1e-16);

/// Branch current at a voltage, log-interpolated between sweep records.
double branch_current(const SweepResult& branch, double v_V,
                      double floor_A = 1e-16);

enum class ReadBit { zero, one };

/// Median anode conduction current over [t0, t1] against a threshold.
ReadBit classify_read(const TransientRecord& rec, double t0_s, double t1_s,
                      double threshold_A);

enum class Phase { rising, falling };

struct TransitionSnapshot {
  double fraction_pct = 0.0;
  double v_anode_V = 0.0;
  double t_s = -1.0;
  FieldProfile field;
  BandDiagram bands;
};

/// Snapshots at the points where the anode current has completed the given
/// fractions of its log10-scale excursion over the phase. The sweep must
/// have been run with keep_snapshots.
std::vector<TransitionSnapshot> transition_snapshots(
    const DeviceContext& ctx, const SweepResult& sweep, Phase phase,
    const std::vector<double>& fractions_pct, double floor_A = 1e-16);

std::vector<TransitionSnapshot> transition_snapshots(
    const DeviceContext& ctx, const TransientRecord& rec, Phase phase,
    const std::vector<double>& fractions_pct, double floor_A = 1e-16);

struct HysteresisRun {
  SweepResult up;
  SweepResult down;
};

/// Canonical up/down anode sweep 0 -> v_max -> 0 at fixed gate bias.
HysteresisRun run_hysteresis(const DeviceContext& ctx, double v_max_V,
                             const SolverConfig& cfg = {},
                             bool keep_snapshots = false,
                             double v_gate_V = 0.0);

struct SpeedScanSpec {
  double v_pg_V = 1.0;
  double v_g_V = 0.5;
  double v_hold_V = 0.6;
  double v_read_V = 1.0;
  double threshold_A = 1e-9;
  double lte_tol = 1e-3;
};

/// Called after every probe transient with the pulse width, the full trace,
/// and its read classification.
using SpeedProbeHook =
    std::function<void(double t_pulse_s, const TransientRecord&, ReadBit)>;

/// Smallest programming T_pulse (edges scale as 0.1 T, the hold flat as
/// 10 T), found by geometric bisection to <= 10% relative width.
/// Throws AnalysisError when [t_lo, t_hi] does not bracket the threshold.
double speed_limit_search(const DeviceContext& ctx, const SpeedScanSpec& spec,
                          double t_lo_s, double t_hi_s,
                          const SolverConfig& cfg = {},
                          const SpeedProbeHook& probe = {});

/// Builds the scaled program/hold/read sequence used by the speed scan.
PulseTrain speed_scan_train(const SpeedScanSpec& spec, double t_pulse_s);

enum class Verdict { lower = -1, equal = 0, higher = 1 };

struct StructureComparison {
  MemoryMetrics a, b;
  double v_read_V = 0.0; // shared read/hold points when windows overlap
  double v_hold_V = 0.0;
  Verdict window = Verdict::equal;
  Verdict on_off_ratio = Verdict::equal;
  Verdict i_hold = Verdict::equal;
};

/// Runs the same hysteresis protocol on both devices and compares the
/// memory metrics ordinally (5% tolerance band counts as equal).
StructureComparison compare_structures(const DeviceContext& a,
                                       const DeviceContext& b,
                                       double v_max_V = 3.0,
                                       const SolverConfig& cfg = {},
                                       double on_off_floor_A = 1e-16);

} // namespace tram
