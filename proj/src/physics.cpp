#include "tram/physics.hpp"

#include <cmath>

namespace tram {

void MaterialParams::validate() const {
  auto chk = [](double v, const char* name) {
    if (!(v > 0.0))
      throw std::invalid_argument(std::string("MaterialParams: ") + name +
                                  " must be positive");
  };
  chk(eps_r, "eps_r");
  chk(ni_cm3, "ni_cm3");
  chk(mu_n, "mu_n");
  chk(mu_p, "mu_p");
  chk(tau_n_s, "tau_n_s");
  chk(tau_p_s, "tau_p_s");
  chk(eg_eV, "eg_eV");
}

double bernoulli(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) {
    // x/(e^x-1) = 1 - x/2 + x^2/12 - x^4/720 + O(x^6)
    return 1.0 - 0.5 * x + x * x / 12.0 - x * x * x * x / 720.0;
  }
  if (x < 0.0) return x / std::expm1(x);
  const double t = std::exp(-x); // underflows harmlessly for huge x
  return x * t / (1.0 - t);
}

double bernoulli_deriv(double x) {
  if (std::abs(x) < 1e-3) {
    return -0.5 + x / 6.0 - x * x * x / 180.0;
  }
  const double b = bernoulli(x);
  return b * (1.0 - x - b) / x;
}

double sg_flux(double n_left_cm3, double n_right_cm3, double dpsi_V,
               double spacing_cm, double diffusivity_cm2s, Carrier carrier,
               const ThermalEnv& env) {
  if (!(spacing_cm > 0.0))
    throw std::invalid_argument("sg_flux: spacing must be positive");
  const double delta = dpsi_V / env.vt_V;
  const double c = consts::q_C * diffusivity_cm2s / spacing_cm;
  if (carrier == Carrier::electron)
    return c * (bernoulli(delta) * n_right_cm3 - bernoulli(-delta) * n_left_cm3);
  return c * (bernoulli(delta) * n_left_cm3 - bernoulli(-delta) * n_right_cm3);
}

double srh_rate(double n_cm3, double p_cm3, const MaterialParams& mat) {
  const double ni = mat.ni_cm3;
  const double num = n_cm3 * p_cm3 - ni * ni;
  const double den =
      mat.tau_p_s * (n_cm3 + ni) + mat.tau_n_s * (p_cm3 + ni);
  return num / den;
}

double equilibrium_guess(double net_doping_cm3, const MaterialParams& mat,
                         const ThermalEnv& env) {
  return env.vt_V * std::asinh(net_doping_cm3 / (2.0 * mat.ni_cm3));
}

double built_in_potential(double na_cm3, double nd_cm3,
                          const MaterialParams& mat, const ThermalEnv& env) {
  if (!(na_cm3 > 0.0) || !(nd_cm3 > 0.0))
    throw std::invalid_argument("built_in_potential: doping must be positive");
  return env.vt_V *
         std::log(na_cm3 * nd_cm3 / (mat.ni_cm3 * mat.ni_cm3));
}

double mobility(double net_doping_cm3, Carrier carrier,
                const MaterialParams& mat) {
  const double mu_max = carrier == Carrier::electron ? mat.mu_n : mat.mu_p;
  if (mat.mobility_model == MobilityModel::constant) return mu_max;
  // Caughey-Thomas, standard silicon fit parameters.
  const double nd = std::abs(net_doping_cm3);
  double mu_min, n_ref, alpha;
  if (carrier == Carrier::electron) {
    mu_min = 68.5;
    n_ref = 9.2e16;
    alpha = 0.711;
  } else {
    mu_min = 44.9;
    n_ref = 2.23e17;
    alpha = 0.719;
  }
  return mu_min + (mu_max - mu_min) / (1.0 + std::pow(nd / n_ref, alpha));
}

void neutral_densities(double net_doping_cm3, double ni_cm3, double& n_cm3,
                       double& p_cm3) {
  const double half = 0.5 * net_doping_cm3 / ni_cm3;
  const double root = std::sqrt(half * half + 1.0); // in ni units
  if (net_doping_cm3 >= 0.0) {
    n_cm3 = ni_cm3 * (half + root);
    p_cm3 = ni_cm3 * ni_cm3 / n_cm3;
  } else {
    p_cm3 = ni_cm3 * (root - half);
    n_cm3 = ni_cm3 * ni_cm3 / p_cm3;
  }
}

} // namespace tram
