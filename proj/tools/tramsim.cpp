// Command-line front end: equilibrium / sweep / transient / metrics /
// speedscan on a device config, emitting CSV artifacts plus a run manifest.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tram/analysis.hpp"
#include "tram/config.hpp"
#include "tram/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitPartial = 3;

struct GlobalOpts {
  std::string out_dir;
  int mesh_points = 0;    // 0 = config value
  double tol_scale = 1.0; // multiplies solver tolerances
};

std::string default_out_dir() {
  const char* env = std::getenv("TRAMSIM_OUT");
  return env && *env ? env : ".";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tram::ParseError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  GlobalOpts g;
  std::string config_path;
  std::string config_text;
  tram::SimConfig cfg;
  tram::ManifestInfo manifest;

  Run(const GlobalOpts& opts, const std::string& path,
      const std::string& command)
      : g(opts), config_path(path), config_text(read_file(path)) {
    cfg = tram::parse_config(config_text);
    if (g.mesh_points > 0) cfg.mesh.points_per_region = g.mesh_points;
    cfg.solver.residual_tol *= g.tol_scale;
    cfg.solver.psi_update_tol_vt *= g.tol_scale;
    manifest.config_path = path;
    manifest.config_digest = tram::fnv1a64(config_text);
    manifest.command = command;
    manifest.started_utc = tram::utc_timestamp();
  }

  tram::DeviceContext context() const {
    return tram::make_context(cfg.device, cfg.material, cfg.mesh);
  }

  void emit(const std::string& name, const std::string& content) {
    tram::write_file(g.out_dir + "/" + name, content);
    manifest.outputs.push_back(name);
  }

  void finish() {
    manifest.finished_utc = tram::utc_timestamp();
    tram::write_manifest(g.out_dir, manifest);
  }
};

std::string field_csv(const tram::FieldProfile& f) {
  std::string out = "x_m,e_Vcm\n";
  for (std::size_t i = 0; i < f.x_m.size(); ++i)
    out += tram::format_sci(f.x_m[i]) + "," + tram::format_sci(f.e_Vcm[i]) +
           "\n";
  return out;
}

std::string bands_csv(const tram::BandDiagram& b) {
  std::string out = "x_m,ec_eV,ev_eV,efn_eV,efp_eV\n";
  for (std::size_t i = 0; i < b.x_m.size(); ++i)
    out += tram::format_sci(b.x_m[i]) + "," + tram::format_sci(b.ec_eV[i]) +
           "," + tram::format_sci(b.ev_eV[i]) + "," +
           tram::format_sci(b.efn_eV[i]) + "," + tram::format_sci(b.efp_eV[i]) +
           "\n";
  return out;
}

int cmd_equilibrium(const GlobalOpts& g, const std::string& config,
                    const std::string& command) {
  Run run(g, config, command);
  const tram::DeviceContext ctx = run.context();
  const tram::StateVector eq = tram::solve_equilibrium(ctx, run.cfg.solver);
  run.emit("snapshot.csv", tram::snapshot_csv(ctx, eq));
  run.emit("bands.csv", bands_csv(tram::band_diagram(ctx, eq)));
  run.finish();
  return kExitOk;
}

struct SweepArgs {
  std::string terminal = "anode";
  double from = 0.0, to = 0.0;
  double vg = 0.0, va = 0.0;
  bool updown = false;
  std::vector<double> snapshot_fractions;
};

void emit_transitions(Run& run, const tram::DeviceContext& ctx,
                      const tram::SweepResult& sweep, tram::Phase phase,
                      const std::vector<double>& fractions,
                      const std::string& prefix) {
  const auto snaps =
      tram::transition_snapshots(ctx, sweep, phase, fractions);
  for (const auto& s : snaps) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%s_f%03d", prefix.c_str(),
                  static_cast<int>(s.fraction_pct + 0.5));
    run.emit(std::string(tag) + "_field.csv", field_csv(s.field));
    run.emit(std::string(tag) + "_bands.csv", bands_csv(s.bands));
  }
}

int cmd_sweep(const GlobalOpts& g, const std::string& config,
              const SweepArgs& a, const std::string& command) {
  if (a.from == a.to) {
    std::cerr << "error: --from and --to must differ\n";
    return kExitUsage;
  }
  Run run(g, config, command);
  const tram::DeviceContext ctx = run.context();

  tram::SweepSpec up;
  up.terminal = a.terminal == "gate" ? tram::SweepTerminal::gate
                                     : tram::SweepTerminal::anode;
  up.v_start = a.from;
  up.v_stop = a.to;
  up.fixed_other_V = up.terminal == tram::SweepTerminal::gate ? a.va : a.vg;
  const bool need_snaps = a.updown || !a.snapshot_fractions.empty();
  up.keep_snapshots = need_snaps;

  const tram::SweepResult fwd = tram::sweep_iv(ctx, up, run.cfg.solver);
  if (!a.updown) {
    run.emit("sweep.csv", tram::sweep_csv(fwd));
    if (!a.snapshot_fractions.empty() && fwd.completed)
      emit_transitions(run, ctx, fwd, tram::Phase::rising,
                       a.snapshot_fractions, "up");
    run.finish();
    if (!fwd.completed) {
      std::cerr << "warning: sweep stalled at "
                << tram::format_sci(fwd.fail_voltage_V)
                << " V; partial CSV retained\n";
      return kExitPartial;
    }
    return kExitOk;
  }

  tram::SweepSpec dn = up;
  dn.v_start = a.to;
  dn.v_stop = a.from;
  dn.keep_snapshots = !a.snapshot_fractions.empty();
  const tram::StateVector* warm =
      fwd.snapshots.empty() ? nullptr : &fwd.last_snapshot();
  const tram::SweepResult rev = tram::sweep_iv(ctx, dn, run.cfg.solver, warm);

  run.emit("sweep.csv", tram::sweep_csv(fwd, rev));
  if (!a.snapshot_fractions.empty()) {
    if (fwd.completed)
      emit_transitions(run, ctx, fwd, tram::Phase::rising,
                       a.snapshot_fractions, "up");
    if (rev.completed)
      emit_transitions(run, ctx, rev, tram::Phase::falling,
                       a.snapshot_fractions, "down");
  }
  run.finish();
  if (!fwd.completed || !rev.completed) {
    std::cerr << "warning: sweep stalled; partial CSV retained\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_transient(const GlobalOpts& g, const std::string& config,
                  const std::string& sequence, const std::string& command) {
  Run run(g, config, command);
  const tram::SequenceConfig seq =
      tram::load_sequence_file(sequence);
  if (seq.ops.empty()) {
    std::cerr << "error: sequence file contains no operations\n";
    return kExitUsage;
  }
  const tram::DeviceContext ctx = run.context();
  const tram::PulseTrain train = tram::build_pulse_train(seq.ops);

  tram::TransientSpec ts;
  ts.anode = train.anode;
  ts.gate = train.gate;
  ts.t_end_s = train.t_end_s;
  ts.lte_tol = seq.lte_tol;
  if (seq.dt_max_s > 0.0) ts.dt_max_s = seq.dt_max_s;
  ts.dt_init_s = std::min(1e-12, train.t_end_s / 1e4);

  const tram::StateVector eq = tram::solve_equilibrium(ctx, run.cfg.solver);
  const tram::TransientRecord rec =
      tram::run_transient(ctx, ts, eq, run.cfg.solver);
  run.emit("transient.csv", tram::transient_csv(rec));

  std::string report;
  int nread = 0;
  for (const auto& w : train.windows) {
    if (w.kind != tram::PulseKind::read) continue;
    ++nread;
    if (!rec.completed && rec.fail_time_s < w.t_flat_end_s) continue;
    const tram::ReadBit bit = tram::classify_read(
        rec, w.t_flat_begin_s, w.t_flat_end_s, seq.read_threshold_A);
    report += "Read" + std::to_string(nread) + ": " +
              (bit == tram::ReadBit::one ? "one" : "zero") + "\n";
  }
  if (nread > 0) run.emit("reads.txt", report);
  run.finish();
  std::cout << report;
  if (!rec.completed) {
    std::cerr << "warning: transient stalled at t="
              << tram::format_sci(rec.fail_time_s)
              << " s; partial trace retained\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_metrics(const GlobalOpts& g, const std::string& config_a,
                const std::string& config_b, double v_max,
                const std::string& command) {
  Run run(g, config_a, command);
  const tram::DeviceContext ctx_a = run.context();

  if (config_b.empty()) {
    const tram::HysteresisRun h =
        tram::run_hysteresis(ctx_a, v_max, run.cfg.solver);
    // First pass locates the window; second pass probes read at mid-window
    // and hold at 20% above the knee.
    tram::MemoryMetrics m = tram::memory_metrics(h.up, h.down, 0.0, 0.0);
    const double v_read = 0.5 * (m.v_breakover_V + m.v_hold_knee_V);
    const double v_hold =
        m.v_hold_knee_V + 0.2 * (m.v_breakover_V - m.v_hold_knee_V);
    m = tram::memory_metrics(h.up, h.down, v_read, v_hold);
    run.emit("sweep.csv", tram::sweep_csv(h.up, h.down));
    run.emit("metrics.csv",
             tram::metrics_csv_header() + tram::metrics_csv_row("device", m));
    run.finish();
    std::cout << tram::metrics_report("device", m);
    return kExitOk;
  }

  Run run_b(g, config_b, command);
  const tram::DeviceContext ctx_b = run_b.context();
  const tram::StructureComparison cmp =
      tram::compare_structures(ctx_a, ctx_b, v_max, run.cfg.solver);
  std::string csv = tram::metrics_csv_header() +
                    tram::metrics_csv_row("a", cmp.a) +
                    tram::metrics_csv_row("b", cmp.b);
  run.emit("metrics.csv", csv);

  auto arrow = [](tram::Verdict v) {
    return v == tram::Verdict::higher ? "higher"
           : v == tram::Verdict::lower ? "lower"
                                       : "equal";
  };
  std::ostringstream rep;
  rep << tram::metrics_report("a: " + run.config_path, cmp.a)
      << tram::metrics_report("b: " + run_b.config_path, cmp.b)
      << "verdicts (a vs b):\n"
      << "  window:       " << arrow(cmp.window) << '\n'
      << "  on_off_ratio: " << arrow(cmp.on_off_ratio) << '\n'
      << "  i_hold:       " << arrow(cmp.i_hold) << '\n';
  run.emit("compare.txt", rep.str());
  run.finish();
  std::cout << rep.str();
  return kExitOk;
}

struct SpeedArgs {
  double t_lo = 0.0, t_hi = 0.0;
  tram::SpeedScanSpec spec;
};

int cmd_speedscan(const GlobalOpts& g, const std::string& config,
                  const SpeedArgs& a, const std::string& command) {
  if (!(a.t_lo > 0.0) || a.t_lo > a.t_hi) {
    std::cerr << "error: need 0 < --tlo <= --thi\n";
    return kExitUsage;
  }
  Run run(g, config, command);
  const tram::DeviceContext ctx = run.context();

  int probe_idx = 0;
  std::string summary = "t_pulse_s,read\n";
  auto hook = [&](double t_pulse, const tram::TransientRecord& rec,
                  tram::ReadBit bit) {
    char name[32];
    std::snprintf(name, sizeof name, "probe%02d.csv", ++probe_idx);
    run.emit(name, tram::transient_csv(rec));
    summary += tram::format_sci(t_pulse) + "," +
               (bit == tram::ReadBit::one ? "one" : "zero") + "\n";
  };
  const double t_thr = tram::speed_limit_search(ctx, a.spec, a.t_lo, a.t_hi,
                                                run.cfg.solver, hook);
  run.emit("probes.csv", summary);
  run.emit("threshold.txt",
           "t_threshold_s = " + tram::format_sci(t_thr) + "\n");
  run.finish();
  std::cout << "t_threshold_s = " << tram::format_sci(t_thr) << '\n';
  return kExitOk;
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"1D drift-diffusion simulator for multi-layer thyristor "
               "memory devices"};
  app.require_subcommand(1);

  GlobalOpts g;
  g.out_dir = default_out_dir();
  bool seedless = false;
  app.add_option("--out", g.out_dir,
                 "output directory (default: $TRAMSIM_OUT or '.')");
  app.add_option("--mesh-points", g.mesh_points,
                 "override mesh points per region");
  app.add_option("--tol-scale", g.tol_scale,
                 "scale solver convergence tolerances");
  app.add_flag("--seedless", seedless,
               "reserved; this tool uses no randomness");

  std::string config, config_b, sequence;
  SweepArgs sw;
  SpeedArgs sp;
  double v_max = 3.0;

  auto* c_eq = app.add_subcommand("equilibrium", "zero-bias solution");
  c_eq->add_option("config", config)->required();

  auto* c_sw = app.add_subcommand("sweep", "quasi-static I-V sweep");
  c_sw->add_option("config", config)->required();
  c_sw->add_option("--terminal", sw.terminal)
      ->check(CLI::IsMember({"anode", "gate"}));
  c_sw->add_option("--from", sw.from)->required();
  c_sw->add_option("--to", sw.to)->required();
  c_sw->add_option("--vg", sw.vg, "fixed gate bias for anode sweeps");
  c_sw->add_option("--va", sw.va, "fixed anode bias for gate sweeps");
  c_sw->add_flag("--updown", sw.updown, "sweep back after reaching --to");
  c_sw->add_option("--snapshots", sw.snapshot_fractions,
                   "transition fractions (%) to export field/band snapshots");

  auto* c_tr = app.add_subcommand("transient", "pulse-sequence transient");
  c_tr->add_option("config", config)->required();
  c_tr->add_option("sequence", sequence)->required();

  auto* c_me = app.add_subcommand("metrics", "hysteresis memory metrics");
  c_me->add_option("config", config)->required();
  c_me->add_option("config_b", config_b);
  c_me->add_option("--vmax", v_max, "sweep ceiling for the protocol");

  auto* c_sp = app.add_subcommand("speedscan", "programming-speed threshold");
  c_sp->add_option("config", config)->required();
  c_sp->add_option("--tlo", sp.t_lo)->required();
  c_sp->add_option("--thi", sp.t_hi)->required();
  c_sp->add_option("--vpg", sp.spec.v_pg_V, "program anode level");
  c_sp->add_option("--vgate", sp.spec.v_g_V, "program gate level");
  c_sp->add_option("--vhold", sp.spec.v_hold_V);
  c_sp->add_option("--vread", sp.spec.v_read_V);
  c_sp->add_option("--ithresh", sp.spec.threshold_A, "read current threshold");
  c_sp->add_option("--lte", sp.spec.lte_tol, "transient error tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (seedless) {
    std::cerr << "error: --seedless is reserved; this tool uses no "
                 "randomness\n";
    return kExitUsage;
  }

  const std::string command = join_args(argc, argv);
  try {
    if (*c_eq) return cmd_equilibrium(g, config, command);
    if (*c_sw) return cmd_sweep(g, config, sw, command);
    if (*c_tr) return cmd_transient(g, config, sequence, command);
    if (*c_me) return cmd_metrics(g, config, config_b, v_max, command);
    if (*c_sp) return cmd_speedscan(g, config, sp, command);
  } catch (const tram::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const tram::MeshError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const tram::ConvergenceError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const tram::AnalysisError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
