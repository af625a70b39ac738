#pragma once

#include <utility>
#include <vector>

#include "tram/solver.hpp"

namespace tram {

/// Piecewise-linear voltage vs time; constant after the last breakpoint.
struct Waveform {
  std::vector<double> t_s;
  std::vector<double> v_V;

  double at(double time_s) const;
  void validate() const;
};

enum class PulseKind { program, hold, read, erase };

struct PulseOp {
  PulseKind kind = PulseKind::hold;
  double v_anode_V = 0.0;
  double v_gate_V = 0.0;
  double t_rise_s = 0.0;
  double t_flat_s = 0.0;
  double t_fall_s = 0.0;
};

struct OpWindow {
  PulseKind kind;
  double t_begin_s, t_flat_begin_s, t_flat_end_s, t_end_s;
};

struct PulseTrain {
  Waveform anode;
  Waveform gate;
  std::vector<OpWindow> windows;
  double t_end_s = 0.0;
};

/// Concatenates trapezoidal ops. Program/read pulses fall back to the hold
/// level that follows them (or the last established rest level); hold and
/// erase ops set the rest level. The gate pulses with the op and returns
/// to 0 between ops.
PulseTrain build_pulse_train(const std::vector<PulseOp>& ops);

struct TransientSpec {
  Waveform anode;
  Waveform gate;
  double t_end_s = 0.0;
  double dt_init_s = 1e-12;
  double dt_min_s = 1e-17;
  double dt_max_s = 0.0; // <= 0: t_end / 100
  double lte_tol = 1e-3;
  int output_stride = 1;
  int snapshot_stride = 0; // 0 = keep no snapshots
};

struct TransientSample {
  double t_s = 0.0;
  double v_anode_V = 0.0;
  double v_gate_V = 0.0;
  double i_anode_A = 0.0;      // conduction + displacement
  double i_anode_disp_A = 0.0;
  double i_cathode_A = 0.0;
  double i_gate_A = 0.0;
  double dt_s = 0.0;
  double q_device_C = 0.0; // integrated free charge
};

struct TransientRecord {
  std::vector<TransientSample> samples;
  std::vector<std::pair<double, StateVector>> snapshots;
  bool completed = true;
  double fail_time_s = -1.0;
};

/// One backward-Euler step with the bias evaluated at t_prev + dt.
StateVector transient_step(const DeviceContext& ctx, const StateVector& prev,
                           double t_prev_s, double dt_s, const Waveform& anode,
                           const Waveform& gate, const SolverConfig& cfg = {});

/// Adaptive backward-Euler integration with step-doubling error control;
/// lands exactly on every waveform breakpoint. init must be converged at
/// the t = 0 bias.
TransientRecord run_transient(const DeviceContext& ctx,
                              const TransientSpec& spec,
                              const StateVector& init,
                              const SolverConfig& cfg = {});

} // namespace tram
