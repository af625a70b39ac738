#include "tram/transient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tram {

double Waveform::at(double time_s) const {
  if (t_s.empty()) return 0.0;
  if (time_s <= t_s.front()) return v_V.front();
  if (time_s >= t_s.back()) return v_V.back();
  const auto it = std::upper_bound(t_s.begin(), t_s.end(), time_s);
  const std::size_t k = static_cast<std::size_t>(it - t_s.begin());
  if (t_s[k - 1] == time_s) return v_V[k - 1];
  const double f = (time_s - t_s[k - 1]) / (t_s[k] - t_s[k - 1]);
  return v_V[k - 1] + f * (v_V[k] - v_V[k - 1]);
}

void Waveform::validate() const {
  if (t_s.size() != v_V.size())
    throw std::invalid_argument("waveform: time/voltage length mismatch");
  if (!t_s.empty() && t_s.front() != 0.0)
    throw std::invalid_argument("waveform: times must start at 0");
  for (std::size_t i = 1; i < t_s.size(); ++i)
    if (!(t_s[i] > t_s[i - 1]))
      throw std::invalid_argument("waveform: times must be strictly increasing");
}

namespace {

// Zero-duration ramps become 1 fs ramps so breakpoint times stay strictly
// increasing.
constexpr double kJump_s = 1e-15;

void append(Waveform& wf, double t, double v) {
  if (!wf.t_s.empty() && t <= wf.t_s.back()) {
    if (v != wf.v_V.back() && t <= wf.t_s.back())
      t = wf.t_s.back() + kJump_s;
    else
      return;
  }
  wf.t_s.push_back(t);
  wf.v_V.push_back(v);
}

} // namespace

PulseTrain build_pulse_train(const std::vector<PulseOp>& ops) {
  if (ops.empty())
    throw std::invalid_argument("pulse train: at least one op required");
  for (const auto& op : ops)
    if (op.t_rise_s < 0 || op.t_flat_s < 0 || op.t_fall_s < 0)
      throw std::invalid_argument("pulse train: durations must be >= 0");

  PulseTrain tr;
  append(tr.anode, 0.0, 0.0);
  append(tr.gate, 0.0, 0.0);
  double t = 0.0;
  double rest = 0.0; // anode level between ops
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const PulseOp& op = ops[k];
    OpWindow w{};
    w.kind = op.kind;
    w.t_begin_s = t;
    const double rise = std::max(op.t_rise_s, kJump_s);
    if (op.v_anode_V != tr.anode.v_V.back() || op.v_gate_V != 0.0) {
      append(tr.anode, t + rise, op.v_anode_V);
      append(tr.gate, t + rise, op.v_gate_V);
      t += rise;
    }
    w.t_flat_begin_s = t;
    if (op.t_flat_s > 0) {
      t += op.t_flat_s;
      append(tr.anode, t, op.v_anode_V);
      append(tr.gate, t, op.v_gate_V);
    }
    w.t_flat_end_s = t;
    if (op.kind == PulseKind::program || op.kind == PulseKind::read) {
      // fall to the following hold level, or to the last rest level
      double target = rest;
      if (k + 1 < ops.size() && ops[k + 1].kind == PulseKind::hold)
        target = ops[k + 1].v_anode_V;
      const double fall = std::max(op.t_fall_s, kJump_s);
      append(tr.anode, t + fall, target);
      append(tr.gate, t + fall, 0.0);
      t += fall;
    } else {
      rest = op.v_anode_V;
      if (tr.gate.v_V.back() != 0.0) {
        const double fall = std::max(op.t_fall_s, kJump_s);
        append(tr.gate, t + fall, 0.0);
        t += fall;
      }
    }
    w.t_end_s = t;
    tr.windows.push_back(w);
  }
  tr.t_end_s = t;
  tr.anode.validate();
  tr.gate.validate();
  return tr;
}

StateVector transient_step(const DeviceContext& ctx, const StateVector& prev,
                           double t_prev_s, double dt_s, const Waveform& anode,
                           const Waveform& gate, const SolverConfig& cfg) {
  const double t_new = t_prev_s + dt_s;
  const BiasPoint bias{anode.at(t_new), gate.at(t_new)};
  return solve_backward_euler(ctx, bias, prev, dt_s, cfg);
}

namespace {

double gate_sheet_charge(const DeviceContext& ctx, const StateVector& s,
                         double v_gate_V) {
  if (!ctx.gate) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < ctx.sc.n_nodes; ++i) {
    if (!ctx.mesh.gate_mask[i]) continue;
    const double vol_cm = ctx.sc.vol[i] * ctx.sc.l0_cm;
    q += gate_charge_term(s.psi_V[i], v_gate_V, *ctx.gate) * vol_cm;
  }
  return q * ctx.area_cm2;
}

// Step-doubling local error, scaled by lte_tol; accept when <= 1.
double step_error(const DeviceContext& ctx, const StateVector& full,
                  const StateVector& halves, double lte_tol) {
  const double vt = ctx.env.vt_V;
  double umax = 1.0, nmax = 0.0;
  for (std::size_t i = 0; i < halves.size(); ++i) {
    umax = std::max(umax, std::abs(halves.psi_V[i]) / vt);
    nmax = std::max({nmax, halves.n_cm3[i], halves.p_cm3[i]});
  }
  double err = 0.0;
  for (std::size_t i = 0; i < halves.size(); ++i) {
    err = std::max(err, std::abs(full.psi_V[i] - halves.psi_V[i]) / vt /
                            (lte_tol * umax));
    err = std::max(err, std::abs(full.n_cm3[i] - halves.n_cm3[i]) /
                            (lte_tol * (halves.n_cm3[i] + 1e-6 * nmax)));
    err = std::max(err, std::abs(full.p_cm3[i] - halves.p_cm3[i]) /
                            (lte_tol * (halves.p_cm3[i] + 1e-6 * nmax)));
  }
  return err;
}

} // namespace

TransientRecord run_transient(const DeviceContext& ctx,
                              const TransientSpec& spec,
                              const StateVector& init,
                              const SolverConfig& cfg) {
  if (!(spec.t_end_s > 0.0))
    throw std::invalid_argument("transient: t_end must be > 0");
  if (!(spec.dt_min_s <= spec.dt_init_s))
    throw std::invalid_argument("transient: dt_min must be <= dt_init");
  spec.anode.validate();
  spec.gate.validate();
  const double dt_max =
      spec.dt_max_s > 0.0 ? spec.dt_max_s : spec.t_end_s / 100.0;

  // union of waveform breakpoints inside (0, t_end]
  std::vector<double> bps;
  for (const auto* wf : {&spec.anode, &spec.gate})
    for (double tb : wf->t_s)
      if (tb > 0.0 && tb < spec.t_end_s) bps.push_back(tb);
  bps.push_back(spec.t_end_s);
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  TransientRecord rec;
  StateVector state = init;
  double t = 0.0, dt = std::min(spec.dt_init_s, dt_max);
  std::size_t bp_idx = 0;
  long accepted = 0;

  const auto sample = [&](double dt_used, const StateVector* prev) {
    TransientSample s;
    s.t_s = t;
    s.v_anode_V = spec.anode.at(t);
    s.v_gate_V = spec.gate.at(t);
    const auto tc = terminal_current(ctx, state, prev, dt_used);
    s.i_anode_A = tc.anode_A;
    s.i_anode_disp_A = tc.anode_disp_A;
    s.i_cathode_A = tc.cathode_A;
    if (prev && dt_used > 0.0 && ctx.gate) {
      const double vg_prev = spec.gate.at(t - dt_used);
      s.i_gate_A = (gate_sheet_charge(ctx, state, s.v_gate_V) -
                    gate_sheet_charge(ctx, *prev, vg_prev)) /
                   dt_used;
    }
    s.dt_s = dt_used;
    s.q_device_C = device_charge(ctx, state);
    rec.samples.push_back(s);
  };
  sample(0.0, nullptr);
  if (spec.snapshot_stride > 0) rec.snapshots.emplace_back(0.0, state);

  while (t < spec.t_end_s * (1.0 - 1e-15)) {
    while (bp_idx < bps.size() && bps[bp_idx] <= t * (1.0 + 1e-15)) ++bp_idx;
    const double next_bp = bp_idx < bps.size() ? bps[bp_idx] : spec.t_end_s;
    bool lands = false;
    double dt_eff = std::min(dt, dt_max);
    if (t + dt_eff >= next_bp * (1.0 - 1e-15)) {
      dt_eff = next_bp - t;
      lands = true;
    }
    StateVector s_full, s_mid, s_half;
    try {
      s_full = transient_step(ctx, state, t, dt_eff, spec.anode, spec.gate, cfg);
      s_mid =
          transient_step(ctx, state, t, 0.5 * dt_eff, spec.anode, spec.gate, cfg);
      s_half = transient_step(ctx, s_mid, t + 0.5 * dt_eff, 0.5 * dt_eff,
                              spec.anode, spec.gate, cfg);
    } catch (const ConvergenceError&) {
      dt = 0.5 * dt_eff;
      if (dt < spec.dt_min_s) {
        rec.completed = false;
        rec.fail_time_s = t;
        return rec;
      }
      continue;
    }
    const double err = step_error(ctx, s_full, s_half, spec.lte_tol);
    if (err <= 1.0) {
      state = std::move(s_half);
      t = lands ? next_bp : t + dt_eff;
      ++accepted;
      // currents are reported over the final half-step so conduction and
      // displacement refer to the same accepted backward-Euler sub-step
      if (lands || accepted % std::max(spec.output_stride, 1) == 0 ||
          t >= spec.t_end_s * (1.0 - 1e-15))
        sample(0.5 * dt_eff, &s_mid);
      if (spec.snapshot_stride > 0 && accepted % spec.snapshot_stride == 0)
        rec.snapshots.emplace_back(t, state);
      dt = dt_eff * std::clamp(0.9 / std::sqrt(std::max(err, 0.05)), 0.5, 2.5);
    } else {
      dt = dt_eff * std::max(0.3, 0.9 / std::sqrt(err));
      if (dt < spec.dt_min_s) {
        rec.completed = false;
        rec.fail_time_s = t;
        return rec;
      }
    }
  }
  if (spec.snapshot_stride > 0 && rec.snapshots.back().first < t)
    rec.snapshots.emplace_back(t, state);
  return rec;
}

} // namespace tram
