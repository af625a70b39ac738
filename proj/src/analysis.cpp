#include "tram/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace tram {

BandDiagram band_diagram(const DeviceContext& ctx, const StateVector& s) {
  const double vt = ctx.env.vt_V;
  const double ni = ctx.mat.ni_cm3;
  const double eg = ctx.mat.eg_eV;
  const std::size_t n = s.size();
  const double phi_n_cathode =
      s.psi_V[n - 1] - vt * std::log(s.n_cm3[n - 1] / ni);
  BandDiagram bd;
  bd.x_m = ctx.mesh.x_m;
  bd.ec_eV.resize(n);
  bd.ev_eV.resize(n);
  bd.efn_eV.resize(n);
  bd.efp_eV.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ei = -s.psi_V[i] + phi_n_cathode; // intrinsic level
    bd.ec_eV[i] = ei + 0.5 * eg;
    bd.ev_eV[i] = ei - 0.5 * eg;
    const double phi_n = s.psi_V[i] - vt * std::log(s.n_cm3[i] / ni);
    const double phi_p = s.psi_V[i] + vt * std::log(s.p_cm3[i] / ni);
    bd.efn_eV[i] = -phi_n + phi_n_cathode;
    bd.efp_eV[i] = -phi_p + phi_n_cathode;
  }
  return bd;
}

FieldProfile field_profile(const DeviceContext& ctx, const StateVector& s) {
  const std::size_t n = s.size();
  FieldProfile fp;
  fp.x_m.resize(n - 1);
  fp.e_Vcm.resize(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    fp.x_m[e] = 0.5 * (ctx.mesh.x_m[e] + ctx.mesh.x_m[e + 1]);
    const double h_cm = (ctx.mesh.x_m[e + 1] - ctx.mesh.x_m[e]) * 100.0;
    fp.e_Vcm[e] = -(s.psi_V[e + 1] - s.psi_V[e]) / h_cm;
  }
  return fp;
}

namespace {

double log_current(double i_A, double floor_A) {
  return std::log10(std::max(std::abs(i_A), floor_A));
}

double sweep_voltage(const SweepRecord& r) { return r.bias.v_anode_V; }

struct Jump {
  double v_mid;
  double size_decades;
  double i_on_side; // anode current on the high-current side of the jump
};

// Largest log10-current step between adjacent converged records.
Jump largest_jump(const SweepResult& br, bool rising, double floor_A) {
  Jump best{0.0, 0.0, 0.0};
  const auto& rs = br.records;
  for (std::size_t k = 0; k + 1 < rs.size(); ++k) {
    if (!rs[k].converged || !rs[k + 1].converged) continue;
    double d = log_current(rs[k + 1].i_anode_A, floor_A) -
               log_current(rs[k].i_anode_A, floor_A);
    if (!rising) d = -d;
    if (d > best.size_decades) {
      best.size_decades = d;
      best.v_mid = 0.5 * (sweep_voltage(rs[k]) + sweep_voltage(rs[k + 1]));
      best.i_on_side = rising ? rs[k + 1].i_anode_A : rs[k].i_anode_A;
    }
  }
  return best;
}

} // namespace

double branch_current(const SweepResult& branch, double v_V, double floor_A) {
  const auto& rs = branch.records;
  const SweepRecord* lo = nullptr;
  const SweepRecord* hi = nullptr;
  for (const auto& r : rs) {
    if (!r.converged) continue;
    const double v = sweep_voltage(r);
    if (v <= v_V && (!lo || v > sweep_voltage(*lo))) lo = &r;
    if (v >= v_V && (!hi || v < sweep_voltage(*hi))) hi = &r;
  }
  if (!lo && !hi) throw AnalysisError("branch_current: empty branch");
  if (!lo) return hi->i_anode_A;
  if (!hi || lo == hi) return lo->i_anode_A;
  const double f =
      (v_V - sweep_voltage(*lo)) / (sweep_voltage(*hi) - sweep_voltage(*lo));
  const double lg = log_current(lo->i_anode_A, floor_A) +
                    f * (log_current(hi->i_anode_A, floor_A) -
                         log_current(lo->i_anode_A, floor_A));
  return std::pow(10.0, lg);
}

MemoryMetrics memory_metrics(const SweepResult& up, const SweepResult& down,
                             double v_read_V, double v_hold_V,
                             double on_off_floor_A) {
  const Jump bo = largest_jump(up, true, on_off_floor_A);
  const Jump knee = largest_jump(down, false, on_off_floor_A);
  if (bo.size_decades < 1.5 || knee.size_decades < 1.5)
    throw AnalysisError(
        "memory_metrics: no jump detected (device never latched in the swept "
        "range)");
  MemoryMetrics m;
  m.v_breakover_V = bo.v_mid;
  m.v_hold_knee_V = knee.v_mid;
  m.memory_window_V = m.v_breakover_V - m.v_hold_knee_V;
  const double i_on = std::abs(branch_current(down, v_read_V, on_off_floor_A));
  const double i_off =
      std::max(std::abs(branch_current(up, v_read_V, on_off_floor_A)),
               on_off_floor_A);
  m.on_off_ratio = i_on / i_off;
  m.i_hold_A = branch_current(down, v_hold_V, on_off_floor_A);
  m.read_threshold_A = std::sqrt(i_on * i_off);
  return m;
}

ReadBit classify_read(const TransientRecord& rec, double t0_s, double t1_s,
                      double threshold_A) {
  std::vector<double> vals;
  for (const auto& s : rec.samples)
    if (s.t_s >= t0_s && s.t_s <= t1_s)
      vals.push_back(s.i_anode_A - s.i_anode_disp_A);
  if (vals.empty()) throw AnalysisError("classify_read: empty read interval");
  std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
  const double median = vals[vals.size() / 2];
  return median >= threshold_A ? ReadBit::one : ReadBit::zero;
}

namespace {

std::vector<TransitionSnapshot> snapshots_from_series(
    const DeviceContext& ctx, const std::vector<double>& log_i,
    const std::vector<double>& v_a, const std::vector<double>& t_s,
    const std::vector<const StateVector*>& states,
    const std::vector<double>& fractions_pct) {
  std::vector<TransitionSnapshot> out;
  const double l0 = log_i.front(), l1 = log_i.back();
  for (double f : fractions_pct) {
    const double target = l0 + f / 100.0 * (l1 - l0);
    std::size_t pick = log_i.size() - 1;
    const bool up = l1 >= l0;
    for (std::size_t k = 0; k < log_i.size(); ++k) {
      if ((up && log_i[k] >= target) || (!up && log_i[k] <= target)) {
        pick = k;
        break;
      }
    }
    TransitionSnapshot ts;
    ts.fraction_pct = f;
    ts.v_anode_V = v_a[pick];
    ts.t_s = t_s.empty() ? -1.0 : t_s[pick];
    ts.field = field_profile(ctx, *states[pick]);
    ts.bands = band_diagram(ctx, *states[pick]);
    out.push_back(std::move(ts));
  }
  return out;
}

} // namespace

std::vector<TransitionSnapshot> transition_snapshots(
    const DeviceContext& ctx, const SweepResult& sweep, Phase phase,
    const std::vector<double>& fractions_pct, double floor_A) {
  const bool want_up = phase == Phase::rising;
  if ((sweep.direction == SweepDirection::up) != want_up)
    throw AnalysisError("transition_snapshots: sweep direction does not match "
                        "the requested phase");
  if (sweep.snapshots.size() != sweep.records.size())
    throw AnalysisError("transition_snapshots: sweep was run without snapshots");
  std::vector<double> log_i, v_a;
  std::vector<const StateVector*> states;
  for (std::size_t k = 0; k < sweep.records.size(); ++k) {
    if (!sweep.records[k].converged) continue;
    log_i.push_back(log_current(sweep.records[k].i_anode_A, floor_A));
    v_a.push_back(sweep.records[k].bias.v_anode_V);
    states.push_back(&sweep.snapshots[k]);
  }
  if (log_i.size() < 2)
    throw AnalysisError("transition_snapshots: phase not found in record");
  return snapshots_from_series(ctx, log_i, v_a, {}, states, fractions_pct);
}

std::vector<TransitionSnapshot> transition_snapshots(
    const DeviceContext& ctx, const TransientRecord& rec, Phase phase,
    const std::vector<double>& fractions_pct, double floor_A) {
  if (rec.snapshots.empty())
    throw AnalysisError("transition_snapshots: record has no snapshots");
  // anode voltage at each snapshot, via the nearest recorded sample
  std::vector<double> v_a(rec.snapshots.size()), t_s(rec.snapshots.size()),
      log_i(rec.snapshots.size());
  std::size_t si = 0;
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    const double tk = rec.snapshots[k].first;
    while (si + 1 < rec.samples.size() && rec.samples[si + 1].t_s <= tk) ++si;
    v_a[k] = rec.samples[si].v_anode_V;
    t_s[k] = tk;
    log_i[k] =
        log_current(rec.samples[si].i_anode_A - rec.samples[si].i_anode_disp_A,
                    floor_A);
  }
  // longest monotone anode-bias ramp in the requested direction
  const double sgn = phase == Phase::rising ? 1.0 : -1.0;
  std::size_t best_b = 0, best_e = 0;
  std::size_t b = 0;
  for (std::size_t k = 1; k <= v_a.size(); ++k) {
    if (k == v_a.size() || sgn * (v_a[k] - v_a[k - 1]) < -1e-12) {
      if (k - 1 - b > best_e - best_b && sgn * (v_a[k - 1] - v_a[b]) > 0.05) {
        best_b = b;
        best_e = k - 1;
      }
      b = k;
    }
  }
  if (best_e == best_b)
    throw AnalysisError("transition_snapshots: phase not found in record");
  std::vector<double> li(log_i.begin() + best_b, log_i.begin() + best_e + 1);
  std::vector<double> va(v_a.begin() + best_b, v_a.begin() + best_e + 1);
  std::vector<double> ts(t_s.begin() + best_b, t_s.begin() + best_e + 1);
  std::vector<const StateVector*> states;
  for (std::size_t k = best_b; k <= best_e; ++k)
    states.push_back(&rec.snapshots[k].second);
  return snapshots_from_series(ctx, li, va, ts, states, fractions_pct);
}

HysteresisRun run_hysteresis(const DeviceContext& ctx, double v_max_V,
                             const SolverConfig& cfg, bool keep_snapshots,
                             double v_gate_V) {
  SweepSpec up;
  up.terminal = SweepTerminal::anode;
  up.v_start = 0.0;
  up.v_stop = v_max_V;
  up.fixed_other_V = v_gate_V;
  up.keep_snapshots = keep_snapshots;
  HysteresisRun run;
  run.up = sweep_iv(ctx, up, cfg);

  SweepSpec down = up;
  down.v_start = v_max_V;
  down.v_stop = 0.0;
  // continue from the last converged up-sweep state
  StateVector init;
  for (std::size_t k = run.up.records.size(); k-- > 0;) {
    if (run.up.records[k].converged) {
      if (!run.up.snapshots.empty()) {
        init = run.up.snapshots[k];
      }
      break;
    }
  }
  if (init.size() == 0) {
    // snapshots were not kept; re-solve the end point
    StateVector eq = solve_equilibrium(ctx, cfg);
    SweepSpec bridge = up;
    bridge.keep_snapshots = true;
    SweepResult tmp = sweep_iv(ctx, bridge, cfg, &eq);
    init = tmp.snapshots.back();
  }
  run.down = sweep_iv(ctx, down, cfg, &init);
  return run;
}

PulseTrain speed_scan_train(const SpeedScanSpec& spec, double t_pulse_s) {
  const double tr = 0.1 * t_pulse_s;
  std::vector<PulseOp> ops;
  ops.push_back({PulseKind::program, spec.v_pg_V, spec.v_g_V, tr, t_pulse_s, tr});
  ops.push_back({PulseKind::hold, spec.v_hold_V, 0.0, tr, 10.0 * t_pulse_s, 0.0});
  // the read probe has a fixed shape: only the program pulse and the hold
  // scale with t_pulse, so the sensed current reflects the stored state
  // rather than the read edge's own charging transient
  ops.push_back({PulseKind::read, spec.v_read_V, 0.0, 1e-9, 1e-8, 1e-9});
  ops.push_back({PulseKind::erase, 0.0, 0.0, 1e-9, 1e-9, 0.0});
  return build_pulse_train(ops);
}

namespace {

ReadBit classify_speed_point(const DeviceContext& ctx,
                             const SpeedScanSpec& spec, double t_pulse_s,
                             const SolverConfig& cfg,
                             const SpeedProbeHook& probe) {
  const PulseTrain tr = speed_scan_train(spec, t_pulse_s);
  TransientSpec ts;
  ts.anode = tr.anode;
  ts.gate = tr.gate;
  ts.t_end_s = tr.t_end_s;
  ts.lte_tol = spec.lte_tol;
  ts.dt_init_s = std::min(1e-12, 1e-3 * t_pulse_s);
  ts.dt_max_s = tr.t_end_s / 200.0;
  const StateVector eq = solve_equilibrium(ctx, cfg);
  const TransientRecord rec = run_transient(ctx, ts, eq, cfg);
  if (!rec.completed)
    throw ConvergenceError("speed scan: transient failed at t=" +
                           std::to_string(rec.fail_time_s));
  const OpWindow* read = nullptr;
  for (const auto& w : tr.windows)
    if (w.kind == PulseKind::read) read = &w;
  const ReadBit bit = classify_read(rec, read->t_flat_begin_s,
                                    read->t_flat_end_s, spec.threshold_A);
  if (probe) probe(t_pulse_s, rec, bit);
  return bit;
}

} // namespace

double speed_limit_search(const DeviceContext& ctx, const SpeedScanSpec& spec,
                          double t_lo_s, double t_hi_s,
                          const SolverConfig& cfg,
                          const SpeedProbeHook& probe) {
  if (!(t_lo_s > 0.0) || t_lo_s > t_hi_s)
    throw std::invalid_argument("speed_limit_search: need 0 < t_lo <= t_hi");
  if (t_lo_s == t_hi_s) {
    if (classify_speed_point(ctx, spec, t_lo_s, cfg, probe) == ReadBit::one)
      return t_lo_s;
    throw AnalysisError("speed_limit_search: bracket invalid");
  }
  if (classify_speed_point(ctx, spec, t_hi_s, cfg, probe) != ReadBit::one ||
      classify_speed_point(ctx, spec, t_lo_s, cfg, probe) != ReadBit::zero)
    throw AnalysisError(
        "speed_limit_search: bracket invalid (endpoints classify alike)");
  double lo = t_lo_s, hi = t_hi_s;
  while (hi / lo > 1.1) {
    const double mid = std::sqrt(lo * hi);
    if (classify_speed_point(ctx, spec, mid, cfg, probe) == ReadBit::one)
      hi = mid;
    else
      lo = mid;
  }
  return std::sqrt(lo * hi);
}

namespace {

Verdict verdict_of(double a, double b, double rel_tol = 0.05) {
  if (std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b)))
    return Verdict::equal;
  return a > b ? Verdict::higher : Verdict::lower;
}

} // namespace

StructureComparison compare_structures(const DeviceContext& a,
                                       const DeviceContext& b, double v_max_V,
                                       const SolverConfig& cfg,
                                       double on_off_floor_A) {
  const HysteresisRun ra = run_hysteresis(a, v_max_V, cfg);
  const HysteresisRun rb = run_hysteresis(b, v_max_V, cfg);
  const Jump bo_a = largest_jump(ra.up, true, on_off_floor_A);
  const Jump kn_a = largest_jump(ra.down, false, on_off_floor_A);
  const Jump bo_b = largest_jump(rb.up, true, on_off_floor_A);
  const Jump kn_b = largest_jump(rb.down, false, on_off_floor_A);
  if (bo_a.size_decades < 1.5 || kn_a.size_decades < 1.5)
    throw AnalysisError("compare_structures: no jump detected [structure A]");
  if (bo_b.size_decades < 1.5 || kn_b.size_decades < 1.5)
    throw AnalysisError("compare_structures: no jump detected [structure B]");

  // shared read point inside the window overlap when it exists, otherwise
  // each device is probed mid-window
  const double knee_max = std::max(kn_a.v_mid, kn_b.v_mid);
  const double bo_min = std::min(bo_a.v_mid, bo_b.v_mid);
  StructureComparison out;
  double vr_a, vr_b, vh_a, vh_b;
  if (knee_max < bo_min) {
    // both devices latched over the overlap: probe them at shared voltages
    out.v_read_V = vr_a = vr_b = 0.5 * (knee_max + bo_min);
    out.v_hold_V = vh_a = vh_b = knee_max + 0.2 * (bo_min - knee_max);
  } else {
    vr_a = 0.5 * (kn_a.v_mid + bo_a.v_mid);
    vr_b = 0.5 * (kn_b.v_mid + bo_b.v_mid);
    vh_a = kn_a.v_mid + 0.2 * (bo_a.v_mid - kn_a.v_mid);
    vh_b = kn_b.v_mid + 0.2 * (bo_b.v_mid - kn_b.v_mid);
    out.v_read_V = vr_a;
    out.v_hold_V = vh_a;
  }
  out.a = memory_metrics(ra.up, ra.down, vr_a, vh_a, on_off_floor_A);
  out.b = memory_metrics(rb.up, rb.down, vr_b, vh_b, on_off_floor_A);
  out.window = verdict_of(out.a.memory_window_V, out.b.memory_window_V);
  out.on_off_ratio = verdict_of(out.a.on_off_ratio, out.b.on_off_ratio);
  out.i_hold = verdict_of(std::abs(out.a.i_hold_A), std::abs(out.b.i_hold_A));
  return out;
}

} // namespace tram
