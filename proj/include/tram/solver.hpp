#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tram/device.hpp"
#include "tram/physics.hpp"

namespace tram {

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// PDE unknowns in physical units: potential [V] and carrier densities
/// [cm^-3] per mesh node.
struct StateVector {
  std::vector<double> psi_V;
  std::vector<double> n_cm3;
  std::vector<double> p_cm3;

  std::size_t size() const { return psi_V.size(); }
};

struct BiasPoint {
  double v_anode_V = 0.0;
  double v_gate_V = 0.0;
  // cathode is always the 0 V reference
};

struct SolverConfig {
  int max_gummel_iters = 200;
  int max_newton_iters = 50;
  double psi_update_tol_vt = 1e-6; // max |dpsi| in V_T units
  double residual_tol = 1e-8;      // scaled residual
  double max_step_vt = 2.0;        // Newton damping cap on |dpsi|
  double dv_init_V = 0.010;        // continuation step
  double dv_min_V = 1e-4;
  bool allow_pseudo_transient = true; // rescue across snap events
};

/// De Mari scaled view of a device (V_T units of potential, n_i units of
/// density, intrinsic Debye lengths). Built once, read-only afterwards.
struct ScaledDevice {
  std::size_t n_nodes = 0;
  std::vector<double> h;    // edge spacings
  std::vector<double> vol;  // dual volumes
  std::vector<double> dop;  // net doping / ni
  std::vector<double> dn;   // edge electron diffusivity / D0
  std::vector<double> dp;   // edge hole diffusivity / D0
  std::vector<double> gcoef; // gate coupling per node (0 if ungated)
  double tau_n = 0.0, tau_p = 0.0;
  double l0_cm = 0.0;  // intrinsic Debye length
  double t0_s = 0.0;   // l0^2 / D0
  double d0_cm2s = 1.0;
  double j0_Acm2 = 0.0; // q D0 ni / l0
  double u_bc[2] = {0, 0};  // equilibrium contact potentials
  double nv_bc[2] = {0, 0}; // contact electron densities (ni units)
  double pv_bc[2] = {0, 0};
};

struct DeviceContext {
  Mesh1D mesh;
  MaterialParams mat;
  ThermalEnv env;
  std::optional<GateSpec> gate;
  double area_cm2 = 0.0;
  ScaledDevice sc;
};

DeviceContext make_context(const DeviceSpec& dev, const MaterialParams& mat,
                           const MeshConfig& mesh_cfg);
DeviceContext make_context(const DeviceSpec& dev, const MaterialParams& mat,
                           const Mesh1D& mesh);

/// Sheet-capacitor gate charge smeared over the body thickness [C/cm^3].
double gate_charge_term(double psi_node_V, double v_gate_V,
                        const GateSpec& gate);

struct SolveStats {
  int gummel_iters = 0;
  int newton_iters = 0;
  int rescue_steps = 0;
  double residual = 0.0;
  bool converged = false;

  int total_iters() const { return gummel_iters + newton_iters + rescue_steps; }
};

/// Nonlinear Poisson with Boltzmann carriers at zero bias.
StateVector solve_equilibrium(const DeviceContext& ctx,
                              const SolverConfig& cfg = {});

/// Coupled Poisson + continuity at a fixed bias point. Gummel iteration
/// finished by damped Newton; pseudo-transient rescue if both stall.
/// Throws ConvergenceError.
StateVector solve_bias(const DeviceContext& ctx, const BiasPoint& bias,
                       const StateVector& init, const SolverConfig& cfg = {},
                       SolveStats* stats = nullptr);

/// One backward-Euler step of length dt from prev, bias fixed at the new
/// time level. Throws ConvergenceError.
StateVector solve_backward_euler(const DeviceContext& ctx,
                                 const BiasPoint& bias,
                                 const StateVector& prev, double dt_s,
                                 const SolverConfig& cfg = {},
                                 SolveStats* stats = nullptr);

struct TerminalCurrents {
  double anode_A = 0.0;   // positive into the anode
  double cathode_A = 0.0; // positive into the cathode
  double gate_A = 0.0;    // displacement through the gate oxide
  double anode_disp_A = 0.0;
  double uniformity = 0.0; // max edge deviation of J_tot, relative
};

/// Terminal currents from edge fluxes; displacement included when prev/dt
/// are given. Steady J_tot must be spatially uniform.
TerminalCurrents terminal_current(const DeviceContext& ctx,
                                  const StateVector& state,
                                  const StateVector* prev = nullptr,
                                  double dt_s = 0.0);

/// Conduction current density J_n + J_p [A/cm^2] on every edge.
std::vector<double> edge_current_density(const DeviceContext& ctx,
                                         const StateVector& state);

/// Total free charge q(p - n + N) integrated over the device [C].
double device_charge(const DeviceContext& ctx, const StateVector& state);

enum class SweepTerminal { anode, gate };
enum class SweepDirection { up, down };

struct SweepSpec {
  SweepTerminal terminal = SweepTerminal::anode;
  double v_start = 0.0;
  double v_stop = 0.0;
  double fixed_other_V = 0.0;
  bool keep_snapshots = false;
};

struct SweepRecord {
  BiasPoint bias;
  double i_anode_A = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct SweepResult {
  SweepDirection direction = SweepDirection::up;
  std::vector<SweepRecord> records;
  std::vector<StateVector> snapshots; // parallel to records when requested
  bool completed = true;
  double fail_voltage_V = 0.0;

  const StateVector& last_snapshot() const { return snapshots.back(); }
};

/// Voltage sweep with previous-solution continuation; halves the step down
/// to dv_min on non-convergence. init defaults to equilibrium.
SweepResult sweep_iv(const DeviceContext& ctx, const SweepSpec& sweep,
                     const SolverConfig& cfg = {},
                     const StateVector* init = nullptr);

/// Device in series with a resistor: finds v_contact such that
/// (v_supply - v_contact)/r = I(v_contact). r = 0 degrades to solve_bias.
StateVector load_line_solve(const DeviceContext& ctx, double v_supply_V,
                            double r_series_ohm, const StateVector& init,
                            const SolverConfig& cfg = {},
                            double* v_contact_out = nullptr);

} // namespace tram
