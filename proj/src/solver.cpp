#include "tram/solver.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstring>

namespace tram {

namespace {

double cexp(double x) { return std::exp(std::clamp(x, -600.0, 600.0)); }

constexpr double kDensityFloor = 1e-25; // in ni units

struct Work {
  std::vector<double> u, v, w; // scaled unknowns
};

Work to_scaled(const DeviceContext& ctx, const StateVector& s) {
  const std::size_t n = ctx.sc.n_nodes;
  Work wk;
  wk.u.resize(n);
  wk.v.resize(n);
  wk.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    wk.u[i] = s.psi_V[i] / ctx.env.vt_V;
    wk.v[i] = std::max(s.n_cm3[i] / ctx.mat.ni_cm3, kDensityFloor);
    wk.w[i] = std::max(s.p_cm3[i] / ctx.mat.ni_cm3, kDensityFloor);
  }
  return wk;
}

StateVector from_scaled(const DeviceContext& ctx, const Work& wk) {
  const std::size_t n = ctx.sc.n_nodes;
  StateVector s;
  s.psi_V.resize(n);
  s.n_cm3.resize(n);
  s.p_cm3.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.psi_V[i] = wk.u[i] * ctx.env.vt_V;
    s.n_cm3[i] = wk.v[i] * ctx.mat.ni_cm3;
    s.p_cm3[i] = wk.w[i] * ctx.mat.ni_cm3;
  }
  return s;
}

// ---- scalar tridiagonal (Thomas) ----------------------------------------
void thomas(std::vector<double>& a, std::vector<double>& b,
            std::vector<double>& c, std::vector<double>& r) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    r[i] -= m * r[i - 1];
  }
  r[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) r[i] = (r[i] - c[i] * r[i + 1]) / b[i];
}

// ---- 3x3 blocks -----------------------------------------------------------
struct B3 {
  double m[3][3];
  void zero() { std::memset(m, 0, sizeof(m)); }
};

// LU with partial pivoting of a 3x3, solving in place for k columns.
struct LU3 {
  double a[3][3];
  int piv[3];

  bool factor(const B3& b) {
    std::memcpy(a, b.m, sizeof(a));
    for (int c = 0; c < 3; ++c) {
      int p = c;
      for (int r = c + 1; r < 3; ++r)
        if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
      piv[c] = p;
      if (p != c)
        for (int k = 0; k < 3; ++k) std::swap(a[c][k], a[p][k]);
      if (a[c][c] == 0.0) return false;
      for (int r = c + 1; r < 3; ++r) {
        a[r][c] /= a[c][c];
        for (int k = c + 1; k < 3; ++k) a[r][k] -= a[r][c] * a[c][k];
      }
    }
    return true;
  }
  void solve(double x[3]) const {
    for (int c = 0; c < 3; ++c)
      if (piv[c] != c) std::swap(x[c], x[piv[c]]);
    x[1] -= a[1][0] * x[0];
    x[2] -= a[2][0] * x[0] + a[2][1] * x[1];
    x[2] /= a[2][2];
    x[1] = (x[1] - a[1][2] * x[2]) / a[1][1];
    x[0] = (x[0] - a[0][1] * x[1] - a[0][2] * x[2]) / a[0][0];
  }
  void solve(B3& x) const {
    double col[3];
    for (int c = 0; c < 3; ++c) {
      for (int r = 0; r < 3; ++r) col[r] = x.m[r][c];
      solve(col);
      for (int r = 0; r < 3; ++r) x.m[r][c] = col[r];
    }
  }
};

B3 mul(const B3& a, const B3& b) {
  B3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a.m[i][k] * b.m[k][j];
      r.m[i][j] = s;
    }
  return r;
}

// Block-tridiagonal elimination; overwrites inputs, solution in f.
bool block_thomas(std::vector<B3>& lo, std::vector<B3>& di,
                  std::vector<B3>& up, std::vector<std::array<double, 3>>& f) {
  const std::size_t n = di.size();
  std::vector<B3> wmat(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      // di[i] -= lo[i] * wmat[i-1]; f[i] -= lo[i] * f[i-1]
      const B3 lw = mul(lo[i], wmat[i - 1]);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) di[i].m[r][c] -= lw.m[r][c];
      for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += lo[i].m[r][k] * f[i - 1][k];
        f[i][r] -= s;
      }
    }
    LU3 lu;
    if (!lu.factor(di[i])) return false;
    wmat[i] = up[i];
    lu.solve(wmat[i]);
    double rhs[3] = {f[i][0], f[i][1], f[i][2]};
    lu.solve(rhs);
    f[i] = {rhs[0], rhs[1], rhs[2]};
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    for (int r = 0; r < 3; ++r) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += wmat[i].m[r][k] * f[i + 1][k];
      f[i][r] -= s;
    }
  }
  return true;
}

// ---- boundary values -------------------------------------------------------
struct BcValues {
  double u[2], nv[2], pv[2], ug;
};

BcValues bias_bcs(const DeviceContext& ctx, const BiasPoint& bias) {
  const auto& sc = ctx.sc;
  BcValues bc;
  bc.u[0] = sc.u_bc[0] + bias.v_anode_V / ctx.env.vt_V;
  bc.u[1] = sc.u_bc[1];
  bc.nv[0] = sc.nv_bc[0];
  bc.nv[1] = sc.nv_bc[1];
  bc.pv[0] = sc.pv_bc[0];
  bc.pv[1] = sc.pv_bc[1];
  bc.ug = ctx.gate ? (bias.v_gate_V - ctx.gate->vfb_V) / ctx.env.vt_V : 0.0;
  return bc;
}

// ---- nonlinear Poisson with frozen quasi-Fermi levels ----------------------
// Carriers follow v = vref exp(u - uref), w = wref exp(-(u - uref)).
int poisson_newton(const DeviceContext& ctx, Work& wk,
                   const std::vector<double>& uref,
                   const std::vector<double>& vref,
                   const std::vector<double>& wref, const BcValues& bc,
                   double tol, double max_step, int max_iters) {
  const auto& sc = ctx.sc;
  const std::size_t n = sc.n_nodes;
  std::vector<double> a(n), b(n), c(n), r(n);
  wk.u[0] = bc.u[0];
  wk.u[n - 1] = bc.u[1];
  int it = 0;
  for (; it < max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i == 0 || i == n - 1) {
        a[i] = c[i] = 0.0;
        b[i] = 1.0;
        r[i] = 0.0;
        continue;
      }
      const double vi = vref[i] * cexp(wk.u[i] - uref[i]);
      const double wi = wref[i] * cexp(uref[i] - wk.u[i]);
      const double gc = sc.gcoef[i];
      const double lap = (wk.u[i + 1] - wk.u[i]) / sc.h[i] -
                         (wk.u[i] - wk.u[i - 1]) / sc.h[i - 1];
      const double charge = wi - vi + sc.dop[i] + gc * (bc.ug - wk.u[i]);
      r[i] = -(lap + sc.vol[i] * charge);
      a[i] = 1.0 / sc.h[i - 1];
      c[i] = 1.0 / sc.h[i];
      b[i] = -1.0 / sc.h[i] - 1.0 / sc.h[i - 1] -
             sc.vol[i] * (vi + wi + gc);
    }
    thomas(a, b, c, r); // r now holds du
    double dumax = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double du = std::clamp(r[i], -max_step, max_step);
      wk.u[i] += du;
      dumax = std::max(dumax, std::abs(r[i]));
    }
    if (!std::isfinite(dumax))
      throw ConvergenceError("poisson: diverged (non-finite update)");
    if (dumax < tol) return it + 1;
  }
  return -max_iters;
}

// ---- linear Gummel continuity solves ---------------------------------------
void continuity_solve(const DeviceContext& ctx, Work& wk, Carrier carrier,
                      const BcValues& bc) {
  const auto& sc = ctx.sc;
  const std::size_t n = sc.n_nodes;
  std::vector<double> a(n), b(n), c(n), r(n);
  const bool el = carrier == Carrier::electron;
  std::vector<double>& x = el ? wk.v : wk.w;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || i == n - 1) {
      a[i] = c[i] = 0.0;
      b[i] = 1.0;
      r[i] = el ? bc.nv[i == 0 ? 0 : 1] : bc.pv[i == 0 ? 0 : 1];
      continue;
    }
    const double dR = sc.h[i], dL = sc.h[i - 1];
    const double delR = wk.u[i + 1] - wk.u[i];
    const double delL = wk.u[i] - wk.u[i - 1];
    const double den = sc.tau_p * (wk.v[i] + 1.0) + sc.tau_n * (wk.w[i] + 1.0);
    if (el) {
      const double eR = sc.dn[i] / dR, eL = sc.dn[i - 1] / dL;
      c[i] = eR * bernoulli(delR);
      a[i] = eL * bernoulli(-delL);
      b[i] = -eR * bernoulli(-delR) - eL * bernoulli(delL) -
             sc.vol[i] * wk.w[i] / den;
      r[i] = -sc.vol[i] / den;
    } else {
      const double eR = sc.dp[i] / dR, eL = sc.dp[i - 1] / dL;
      c[i] = eR * bernoulli(-delR);
      a[i] = eL * bernoulli(delL);
      b[i] = -eR * bernoulli(delR) - eL * bernoulli(-delL) -
             sc.vol[i] * wk.v[i] / den;
      r[i] = -sc.vol[i] / den;
    }
  }
  thomas(a, b, c, r);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::max(r[i], kDensityFloor);
}

// ---- coupled Newton ---------------------------------------------------------
// Edge fluxes in Slotboom form: the difference of slowly varying exponentials
// keeps tiny currents above the cancellation floor of the naive form.
struct EdgeFlux {
  double jn, jp;       // scaled current densities
  double an, cp;       // dJn/du_r, dJp/du_r
  double bn_l, bn_r;   // dJn/dv_l, dJn/dv_r
  double bp_l, bp_r;   // dJp/dw_l, dJp/dw_r
  double mag;          // term magnitude, for residual scaling
};

EdgeFlux edge_flux(const ScaledDevice& sc, const Work& wk, std::size_t e) {
  EdgeFlux f;
  const double del = wk.u[e + 1] - wk.u[e];
  const double bp = bernoulli(del), bm = bernoulli(-del);
  const double en = sc.dn[e] / sc.h[e], ep = sc.dp[e] / sc.h[e];
  const double sn_l = wk.v[e] * cexp(-wk.u[e]);
  const double sn_r = wk.v[e + 1] * cexp(-wk.u[e + 1]);
  const double sp_l = wk.w[e] * cexp(wk.u[e]);
  const double sp_r = wk.w[e + 1] * cexp(wk.u[e + 1]);
  f.jn = en * bp * cexp(wk.u[e + 1]) * (sn_r - sn_l);
  f.jp = ep * bm * cexp(-wk.u[e + 1]) * (sp_l - sp_r);
  const double dbp = bernoulli_deriv(del), dbm = bernoulli_deriv(-del);
  f.an = en * (dbp * wk.v[e + 1] + dbm * wk.v[e]);
  f.cp = ep * (dbp * wk.w[e] + dbm * wk.w[e + 1]);
  f.bn_l = -en * bm;
  f.bn_r = en * bp;
  f.bp_l = ep * bp;
  f.bp_r = -ep * bm;
  f.mag = en * (bp * wk.v[e + 1] + bm * wk.v[e]) +
          ep * (bp * wk.w[e] + bm * wk.w[e + 1]);
  return f;
}

struct NewtonOpts {
  // inv_dt > 0 adds the backward-Euler time term against *old
  double inv_dt = 0.0;
  const std::vector<double>* v_old = nullptr;
  const std::vector<double>* w_old = nullptr;
};

// Assembles residual + Jacobian; returns the scaled residual norm.
double assemble(const DeviceContext& ctx, const Work& wk, const BcValues& bc,
                const NewtonOpts& op, std::vector<B3>& lo, std::vector<B3>& di,
                std::vector<B3>& up, std::vector<std::array<double, 3>>& f) {
  const auto& sc = ctx.sc;
  const std::size_t n = sc.n_nodes;
  std::vector<EdgeFlux> ef(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) ef[e] = edge_flux(sc, wk, e);

  double res = 0.0;
  double scale_floor_u = 0.0, scale_floor_c = 0.0;
  std::vector<double> ru(n), rv(n), rw(n), su(n), sv(n), sw(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i].zero();
    di[i].zero();
    up[i].zero();
    if (i == 0 || i == n - 1) {
      const int k = i == 0 ? 0 : 1;
      ru[i] = wk.u[i] - bc.u[k];
      rv[i] = wk.v[i] - bc.nv[k];
      rw[i] = wk.w[i] - bc.pv[k];
      su[i] = std::max(1.0, std::abs(bc.u[k]));
      sv[i] = bc.nv[k];
      sw[i] = bc.pv[k];
      di[i].m[0][0] = di[i].m[1][1] = di[i].m[2][2] = 1.0;
      continue;
    }
    const double gc = sc.gcoef[i];
    const double lapR = (wk.u[i + 1] - wk.u[i]) / sc.h[i];
    const double lapL = (wk.u[i] - wk.u[i - 1]) / sc.h[i - 1];
    const double rho_g = gc * (bc.ug - wk.u[i]);
    ru[i] = lapR - lapL +
            sc.vol[i] * (wk.w[i] - wk.v[i] + sc.dop[i] + rho_g);
    su[i] = std::abs(lapR) + std::abs(lapL) +
            sc.vol[i] * (wk.w[i] + wk.v[i] + std::abs(sc.dop[i]) +
                         std::abs(rho_g));

    const double den =
        sc.tau_p * (wk.v[i] + 1.0) + sc.tau_n * (wk.w[i] + 1.0);
    const double rec = (wk.v[i] * wk.w[i] - 1.0) / den;
    const double drdv = (wk.w[i] - rec * sc.tau_p) / den;
    const double drdw = (wk.v[i] - rec * sc.tau_n) / den;

    double tv = 0.0, tw = 0.0;
    if (op.inv_dt > 0.0) {
      tv = op.inv_dt * (wk.v[i] - (*op.v_old)[i]);
      tw = op.inv_dt * (wk.w[i] - (*op.w_old)[i]);
    }
    const EdgeFlux &fr = ef[i], &fl = ef[i - 1];
    rv[i] = fr.jn - fl.jn - sc.vol[i] * (rec + tv);
    rw[i] = -(fr.jp - fl.jp) - sc.vol[i] * (rec + tw);
    sv[i] = fr.mag + fl.mag + sc.vol[i] * (std::abs(rec) + std::abs(tv));
    sw[i] = fr.mag + fl.mag + sc.vol[i] * (std::abs(rec) + std::abs(tw));

    // u row
    lo[i].m[0][0] = 1.0 / sc.h[i - 1];
    up[i].m[0][0] = 1.0 / sc.h[i];
    di[i].m[0][0] = -1.0 / sc.h[i] - 1.0 / sc.h[i - 1] - sc.vol[i] * gc;
    di[i].m[0][1] = -sc.vol[i];
    di[i].m[0][2] = sc.vol[i];
    // v row
    up[i].m[1][0] = fr.an;
    di[i].m[1][0] = -fr.an - fl.an;
    lo[i].m[1][0] = fl.an;
    up[i].m[1][1] = fr.bn_r;
    di[i].m[1][1] =
        fr.bn_l - fl.bn_r - sc.vol[i] * (drdv + op.inv_dt);
    lo[i].m[1][1] = -fl.bn_l;
    di[i].m[1][2] = -sc.vol[i] * drdw;
    // w row
    up[i].m[2][0] = -fr.cp;
    di[i].m[2][0] = fr.cp + fl.cp;
    lo[i].m[2][0] = -fl.cp;
    up[i].m[2][2] = -fr.bp_r;
    di[i].m[2][2] =
        -fr.bp_l + fl.bp_r - sc.vol[i] * (drdw + op.inv_dt);
    lo[i].m[2][2] = fl.bp_l;
    di[i].m[2][1] = -sc.vol[i] * drdv;

    scale_floor_u = std::max(scale_floor_u, su[i]);
    scale_floor_c = std::max(scale_floor_c, std::max(sv[i], sw[i]));
  }
  const double fu = 1e-10 * scale_floor_u + DBL_MIN;
  const double fc = 1e-10 * scale_floor_c + DBL_MIN;
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = {-ru[i], -rv[i], -rw[i]};
    res = std::max(res, std::abs(ru[i]) / std::max(su[i], fu));
    res = std::max(res, std::abs(rv[i]) / std::max(sv[i], fc));
    res = std::max(res, std::abs(rw[i]) / std::max(sw[i], fc));
  }
  return res;
}

struct NewtonResult {
  bool converged = false;
  int iters = 0;
  double residual = 0.0;
};

NewtonResult newton_coupled(const DeviceContext& ctx, Work& wk,
                            const BcValues& bc, const NewtonOpts& op,
                            const SolverConfig& cfg, int max_iters) {
  const std::size_t n = ctx.sc.n_nodes;
  std::vector<B3> lo(n), di(n), up(n);
  std::vector<std::array<double, 3>> f(n);
  NewtonResult out;
  double du_applied = 1e30;
  for (int it = 0; it < max_iters; ++it) {
    const double res = assemble(ctx, wk, bc, op, lo, di, up, f);
    out.residual = res;
    out.iters = it;
    if (!std::isfinite(res)) return out;
    if (res < cfg.residual_tol && du_applied < cfg.psi_update_tol_vt) {
      out.converged = true;
      return out;
    }
    if (!block_thomas(lo, di, up, f)) return out;
    double dumax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      dumax = std::max(dumax, std::abs(f[i][0]));
    if (!std::isfinite(dumax)) return out;
    const double damp = dumax > cfg.max_step_vt ? cfg.max_step_vt / dumax : 1.0;
    const Work base = wk;
    const auto apply = [&](double lam) {
      for (std::size_t i = 0; i < n; ++i) {
        wk.u[i] = base.u[i] + lam * f[i][0];
        double vn = base.v[i] + lam * f[i][1];
        double wn = base.w[i] + lam * f[i][2];
        // keep densities positive; cap the per-iteration reduction
        vn = std::max(vn, 0.1 * base.v[i]);
        wn = std::max(wn, 0.1 * base.w[i]);
        wk.v[i] = std::max(vn, kDensityFloor);
        wk.w[i] = std::max(wn, kDensityFloor);
      }
    };
    // Backtracking line search on the scaled residual: without it the damped
    // iteration can settle into a limit cycle near deep-depletion kinks.
    double lam = damp;
    apply(lam);
    double res_new = assemble(ctx, wk, bc, op, lo, di, up, f);
    for (int bt = 0;
         bt < 6 && !(std::isfinite(res_new) && res_new < res); ++bt) {
      lam *= 0.5;
      apply(lam);
      res_new = assemble(ctx, wk, bc, op, lo, di, up, f);
    }
    du_applied = lam * dumax;
  }
  return out;
}

// Backward-Euler relaxation toward the steady state at fixed bias; used to
// cross snap events where no nearby steady solution exists.
bool pseudo_transient_rescue(const DeviceContext& ctx, Work& wk,
                             const BcValues& bc, const SolverConfig& cfg,
                             SolveStats* stats) {
  double dt_s = 1e-12;
  std::vector<double> v_old, w_old;
  int steps = 0;
  while (steps < 400 && dt_s < 1e-2) {
    v_old = wk.v;
    w_old = wk.w;
    Work trial = wk;
    NewtonOpts op;
    op.inv_dt = ctx.sc.t0_s / dt_s;
    op.v_old = &v_old;
    op.w_old = &w_old;
    const auto r = newton_coupled(ctx, trial, bc, op, cfg, 40);
    ++steps;
    if (stats) ++stats->rescue_steps;
    if (r.converged) {
      wk = trial;
      dt_s *= 3.0;
    } else {
      dt_s *= 0.25;
      if (dt_s < 1e-18) return false;
    }
  }
  return true;
}

} // namespace

// ---- context ---------------------------------------------------------------

double gate_charge_term(double psi_node_V, double v_gate_V,
                        const GateSpec& gate) {
  const double cox = gate.eps_ox_rel * consts::eps0_Fcm / (gate.tox_m * 100.0);
  return cox * (v_gate_V - gate.vfb_V - psi_node_V) /
         (gate.body_thickness_m * 100.0);
}

DeviceContext make_context(const DeviceSpec& dev, const MaterialParams& mat,
                           const Mesh1D& mesh) {
  dev.validate();
  mat.validate();
  DeviceContext ctx;
  ctx.mesh = mesh;
  ctx.mat = mat;
  ctx.env = ThermalEnv::at(dev.temperature_K);
  ctx.gate = dev.gate;
  ctx.area_cm2 = dev.area_cm2;

  ScaledDevice& sc = ctx.sc;
  const std::size_t n = mesh.node_count();
  sc.n_nodes = n;
  const double eps_si = mat.eps_r * consts::eps0_Fcm;
  const double vt = ctx.env.vt_V;
  sc.l0_cm = std::sqrt(eps_si * vt / (consts::q_C * mat.ni_cm3));
  sc.d0_cm2s = 1.0;
  sc.t0_s = sc.l0_cm * sc.l0_cm / sc.d0_cm2s;
  sc.j0_Acm2 = consts::q_C * sc.d0_cm2s * mat.ni_cm3 / sc.l0_cm;
  sc.tau_n = mat.tau_n_s / sc.t0_s;
  sc.tau_p = mat.tau_p_s / sc.t0_s;

  sc.h.resize(n - 1);
  sc.dn.resize(n - 1);
  sc.dp.resize(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double h_cm = (mesh.x_m[e + 1] - mesh.x_m[e]) * 100.0;
    sc.h[e] = h_cm / sc.l0_cm;
    const double mun = 0.5 * (mobility(mesh.net_doping_cm3[e],
                                       Carrier::electron, mat) +
                              mobility(mesh.net_doping_cm3[e + 1],
                                       Carrier::electron, mat));
    const double mup =
        0.5 * (mobility(mesh.net_doping_cm3[e], Carrier::hole, mat) +
               mobility(mesh.net_doping_cm3[e + 1], Carrier::hole, mat));
    sc.dn[e] = mun * vt / sc.d0_cm2s;
    sc.dp[e] = mup * vt / sc.d0_cm2s;
  }
  sc.vol.resize(n);
  sc.dop.resize(n);
  sc.gcoef.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double hl = i > 0 ? sc.h[i - 1] : 0.0;
    const double hr = i + 1 < n ? sc.h[i] : 0.0;
    sc.vol[i] = 0.5 * (hl + hr);
    sc.dop[i] = mesh.net_doping_cm3[i] / mat.ni_cm3;
    if (ctx.gate && mesh.gate_mask[i]) {
      const double cox =
          ctx.gate->eps_ox_rel * consts::eps0_Fcm / (ctx.gate->tox_m * 100.0);
      sc.gcoef[i] = cox * vt /
                    (ctx.gate->body_thickness_m * 100.0 * consts::q_C *
                     mat.ni_cm3);
    }
  }
  for (int k = 0; k < 2; ++k) {
    const double nd = mesh.net_doping_cm3[k == 0 ? 0 : n - 1];
    sc.u_bc[k] = std::asinh(nd / (2.0 * mat.ni_cm3));
    double nn, pp;
    neutral_densities(nd, mat.ni_cm3, nn, pp);
    sc.nv_bc[k] = nn / mat.ni_cm3;
    sc.pv_bc[k] = pp / mat.ni_cm3;
  }
  return ctx;
}

DeviceContext make_context(const DeviceSpec& dev, const MaterialParams& mat,
                           const MeshConfig& mesh_cfg) {
  return make_context(dev, mat, build_mesh(dev, mesh_cfg));
}

// ---- equilibrium -------------------------------------------------------------

StateVector solve_equilibrium(const DeviceContext& ctx,
                              const SolverConfig& cfg) {
  const auto& sc = ctx.sc;
  const std::size_t n = sc.n_nodes;
  Work wk;
  wk.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) wk.u[i] = std::asinh(0.5 * sc.dop[i]);
  wk.v.assign(n, 1.0);
  wk.w.assign(n, 1.0);
  const std::vector<double> uref(n, 0.0), one(n, 1.0);
  const BcValues bc = bias_bcs(ctx, BiasPoint{});
  const int it =
      poisson_newton(ctx, wk, uref, one, one, bc, cfg.psi_update_tol_vt,
                     cfg.max_step_vt, std::max(cfg.max_newton_iters, 200));
  if (it < 0)
    throw ConvergenceError("equilibrium Poisson did not converge in " +
                           std::to_string(-it) + " iterations");
  for (std::size_t i = 0; i < n; ++i) {
    wk.v[i] = cexp(wk.u[i]);
    wk.w[i] = cexp(-wk.u[i]);
  }
  wk.v[0] = bc.nv[0];
  wk.w[0] = bc.pv[0];
  wk.v[n - 1] = bc.nv[1];
  wk.w[n - 1] = bc.pv[1];
  return from_scaled(ctx, wk);
}

// ---- bias solve ---------------------------------------------------------------

StateVector solve_bias(const DeviceContext& ctx, const BiasPoint& bias,
                       const StateVector& init, const SolverConfig& cfg,
                       SolveStats* stats) {
  if (init.size() != ctx.sc.n_nodes)
    throw std::invalid_argument("solve_bias: init has wrong node count");
  const BcValues bc = bias_bcs(ctx, bias);
  Work wk = to_scaled(ctx, init);
  const std::size_t n = ctx.sc.n_nodes;
  wk.u[0] = bc.u[0];
  wk.u[n - 1] = bc.u[1];
  wk.v[0] = bc.nv[0];
  wk.w[0] = bc.pv[0];
  wk.v[n - 1] = bc.nv[1];
  wk.w[n - 1] = bc.pv[1];

  SolveStats local;
  SolveStats& st = stats ? *stats : local;
  st = SolveStats{};

  // Gummel: decoupled fixed point, cheap way into the Newton basin.
  const int gummel_cap = std::min(cfg.max_gummel_iters, 25);
  for (int g = 0; g < gummel_cap; ++g) {
    const std::vector<double> uref = wk.u, vref = wk.v, wref = wk.w;
    poisson_newton(ctx, wk, uref, vref, wref, bc, 0.1 * cfg.psi_update_tol_vt,
                   cfg.max_step_vt, 60);
    double du = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      du = std::max(du, std::abs(wk.u[i] - uref[i]));
    continuity_solve(ctx, wk, Carrier::electron, bc);
    continuity_solve(ctx, wk, Carrier::hole, bc);
    ++st.gummel_iters;
    if (du < 1e-3) break;
  }

  Work trial = wk;
  auto r = newton_coupled(ctx, trial, bc, NewtonOpts{}, cfg,
                          cfg.max_newton_iters);
  st.newton_iters += r.iters;
  if (!r.converged && cfg.allow_pseudo_transient) {
    trial = wk;
    if (pseudo_transient_rescue(ctx, trial, bc, cfg, &st)) {
      r = newton_coupled(ctx, trial, bc, NewtonOpts{}, cfg,
                         cfg.max_newton_iters);
      st.newton_iters += r.iters;
    }
  }
  st.residual = r.residual;
  st.converged = r.converged;
  if (!r.converged)
    throw ConvergenceError(
        "solve_bias: no convergence at v_anode=" +
        std::to_string(bias.v_anode_V) + " V (scaled residual " +
        std::to_string(r.residual) + ", " + std::to_string(st.total_iters()) +
        " iterations)");
  return from_scaled(ctx, trial);
}

StateVector solve_backward_euler(const DeviceContext& ctx,
                                 const BiasPoint& bias,
                                 const StateVector& prev, double dt_s,
                                 const SolverConfig& cfg, SolveStats* stats) {
  if (prev.size() != ctx.sc.n_nodes)
    throw std::invalid_argument("solve_backward_euler: wrong node count");
  if (!(dt_s > 0.0))
    throw std::invalid_argument("solve_backward_euler: dt must be positive");
  const BcValues bc = bias_bcs(ctx, bias);
  Work wk = to_scaled(ctx, prev);
  const std::size_t n = ctx.sc.n_nodes;
  const std::vector<double> v_old = wk.v, w_old = wk.w;
  wk.u[0] = bc.u[0];
  wk.u[n - 1] = bc.u[1];
  wk.v[0] = bc.nv[0];
  wk.w[0] = bc.pv[0];
  wk.v[n - 1] = bc.nv[1];
  wk.w[n - 1] = bc.pv[1];
  NewtonOpts op;
  op.inv_dt = ctx.sc.t0_s / dt_s;
  op.v_old = &v_old;
  op.w_old = &w_old;
  const auto r = newton_coupled(ctx, wk, bc, op, cfg, cfg.max_newton_iters);
  if (stats) {
    stats->newton_iters = r.iters;
    stats->residual = r.residual;
    stats->converged = r.converged;
  }
  if (!r.converged)
    throw ConvergenceError("transient step: Newton failed at dt=" +
                           std::to_string(dt_s) + " s");
  return from_scaled(ctx, wk);
}

// ---- currents -----------------------------------------------------------------

std::vector<double> edge_current_density(const DeviceContext& ctx,
                                         const StateVector& state) {
  const auto& sc = ctx.sc;
  const Work wk = to_scaled(ctx, state);
  std::vector<double> j(sc.n_nodes - 1);
  for (std::size_t e = 0; e + 1 < sc.n_nodes; ++e) {
    const EdgeFlux f = edge_flux(sc, wk, e);
    j[e] = sc.j0_Acm2 * (f.jn + f.jp);
  }
  return j;
}

double device_charge(const DeviceContext& ctx, const StateVector& state) {
  const auto& sc = ctx.sc;
  double q_sum = 0.0;
  for (std::size_t i = 0; i < sc.n_nodes; ++i) {
    const double vol_cm = sc.vol[i] * sc.l0_cm;
    q_sum += (state.p_cm3[i] - state.n_cm3[i] + ctx.mesh.net_doping_cm3[i]) *
             vol_cm;
  }
  return consts::q_C * q_sum * ctx.area_cm2;
}

TerminalCurrents terminal_current(const DeviceContext& ctx,
                                  const StateVector& state,
                                  const StateVector* prev, double dt_s) {
  const auto& sc = ctx.sc;
  const std::size_t n = sc.n_nodes;
  const Work wk = to_scaled(ctx, state);
  const double eps_si = ctx.mat.eps_r * consts::eps0_Fcm;

  std::vector<double> j(n - 1);
  double mean = 0.0, total_h = 0.0, term_max = 0.0;
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const EdgeFlux f = edge_flux(sc, wk, e);
    j[e] = sc.j0_Acm2 * (f.jn + f.jp);
    mean += j[e] * sc.h[e];
    total_h += sc.h[e];
    term_max = std::max(term_max, sc.j0_Acm2 * f.mag);
  }
  mean /= total_h;
  // Uniformity is measured against the double-precision conditioning floor
  // of the flux evaluation, below which "relative" is not meaningful.
  const double j_floor = DBL_EPSILON * term_max;
  double dev = 0.0;
  for (double je : j) dev = std::max(dev, std::abs(je - mean));

  TerminalCurrents out;
  out.uniformity = dev / std::max(std::abs(mean), j_floor);

  double jd0 = 0.0, jd1 = 0.0;
  if (prev && dt_s > 0.0) {
    const auto efield = [&](const StateVector& s, std::size_t e) {
      const double h_cm = (ctx.mesh.x_m[e + 1] - ctx.mesh.x_m[e]) * 100.0;
      return -(s.psi_V[e + 1] - s.psi_V[e]) / h_cm;
    };
    jd0 = eps_si * (efield(state, 0) - efield(*prev, 0)) / dt_s;
    jd1 = eps_si * (efield(state, n - 2) - efield(*prev, n - 2)) / dt_s;
  }
  out.anode_A = ctx.area_cm2 * (j.front() + jd0);
  out.cathode_A = -ctx.area_cm2 * (j.back() + jd1);
  out.anode_disp_A = ctx.area_cm2 * jd0;
  out.gate_A = 0.0;
  return out;
}

// ---- sweep ---------------------------------------------------------------------

namespace {

BiasPoint sweep_bias(const SweepSpec& sw, double v) {
  BiasPoint b;
  if (sw.terminal == SweepTerminal::anode) {
    b.v_anode_V = v;
    b.v_gate_V = sw.fixed_other_V;
  } else {
    b.v_gate_V = v;
    b.v_anode_V = sw.fixed_other_V;
  }
  return b;
}

} // namespace

SweepResult sweep_iv(const DeviceContext& ctx, const SweepSpec& sweep,
                     const SolverConfig& cfg, const StateVector* init) {
  if (sweep.v_start == sweep.v_stop)
    throw std::invalid_argument("sweep_iv: v_start must differ from v_stop");
  SweepResult out;
  out.direction =
      sweep.v_stop > sweep.v_start ? SweepDirection::up : SweepDirection::down;
  const double sgn = sweep.v_stop > sweep.v_start ? 1.0 : -1.0;

  StateVector state = init ? *init : solve_equilibrium(ctx, cfg);
  // walk to the starting point if it is not where the init state lives
  {
    SolveStats st;
    double v0 = 0.0;
    bool have = false;
    while (!have) {
      try {
        state = solve_bias(ctx, sweep_bias(sweep, sweep.v_start), state, cfg,
                           &st);
        have = true;
      } catch (const ConvergenceError&) {
        // bridge in a few continuation steps from 0
        const double step = (sweep.v_start - v0) / 4.0;
        if (std::abs(step) < cfg.dv_min_V)
          throw;
        for (int k = 1; k <= 4; ++k)
          state = solve_bias(ctx, sweep_bias(sweep, v0 + k * step), state, cfg);
        v0 = sweep.v_start;
        have = true;
      }
    }
    auto tc = terminal_current(ctx, state);
    out.records.push_back(
        {sweep_bias(sweep, sweep.v_start), tc.anode_A, true, st.total_iters()});
    if (sweep.keep_snapshots) out.snapshots.push_back(state);
  }

  double v = sweep.v_start;
  double dv = cfg.dv_init_V;
  while (sgn * (sweep.v_stop - v) > 1e-12) {
    double v_next = v + sgn * dv;
    if (sgn * (v_next - sweep.v_stop) > 0.0) v_next = sweep.v_stop;
    SolveStats st;
    try {
      StateVector next =
          solve_bias(ctx, sweep_bias(sweep, v_next), state, cfg, &st);
      state = std::move(next);
      v = v_next;
      auto tc = terminal_current(ctx, state);
      out.records.push_back(
          {sweep_bias(sweep, v), tc.anode_A, true, st.total_iters()});
      if (sweep.keep_snapshots) out.snapshots.push_back(state);
      dv = std::min(dv * 1.6, cfg.dv_init_V);
    } catch (const ConvergenceError&) {
      dv *= 0.5;
      if (dv < cfg.dv_min_V) {
        out.records.push_back({sweep_bias(sweep, v_next), 0.0, false,
                               st.total_iters()});
        if (sweep.keep_snapshots) out.snapshots.push_back(state);
        out.completed = false;
        out.fail_voltage_V = v_next;
        break;
      }
    }
  }
  return out;
}

StateVector load_line_solve(const DeviceContext& ctx, double v_supply_V,
                            double r_series_ohm, const StateVector& init,
                            const SolverConfig& cfg, double* v_contact_out) {
  if (r_series_ohm < 0.0)
    throw std::invalid_argument("load_line_solve: r_series must be >= 0");
  if (r_series_ohm == 0.0) {
    if (v_contact_out) *v_contact_out = v_supply_V;
    return solve_bias(ctx, BiasPoint{v_supply_V, 0.0}, init, cfg);
  }
  StateVector state = init;
  const auto eval = [&](double vc) {
    state = solve_bias(ctx, BiasPoint{vc, 0.0}, state, cfg);
    const double i = terminal_current(ctx, state).anode_A;
    return (v_supply_V - vc) / r_series_ohm - i;
  };
  double lo = std::min(0.0, v_supply_V), hi = std::max(0.0, v_supply_V);
  double glo = eval(lo), ghi = eval(hi);
  if (glo * ghi > 0.0)
    throw ConvergenceError("load_line_solve: no bracket on [0, v_supply]");
  double vc = lo;
  for (int it = 0; it < 200; ++it) {
    vc = 0.5 * (lo + hi);
    const double g = eval(vc);
    if (g == 0.0) break;
    if ((g > 0.0) == (glo > 0.0)) {
      lo = vc;
      glo = g;
    } else {
      hi = vc;
      ghi = g;
    }
    if (hi - lo < 1e-13 * std::max(1.0, std::abs(v_supply_V))) break;
  }
  state = solve_bias(ctx, BiasPoint{vc, 0.0}, state, cfg);
  if (v_contact_out) *v_contact_out = vc;
  return state;
}

} // namespace tram
