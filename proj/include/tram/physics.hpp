#pragma once

#include <stdexcept>

#include "tram/constants.hpp"

namespace tram {

enum class Carrier { electron, hole };
enum class MobilityModel { constant, caughey_thomas };

/// Bulk silicon parameters used by all kernels. Densities in cm^-3,
/// mobilities in cm^2/(V s), lifetimes in seconds.
struct MaterialParams {
  double eps_r = 11.7;
  double ni_cm3 = 1.0e10; // at 300 K
  double mu_n = 1400.0;
  double mu_p = 450.0;
  double tau_n_s = 1e-7;
  double tau_p_s = 1e-7;
  double eg_eV = 1.12; // band-diagram rendering only
  MobilityModel mobility_model = MobilityModel::constant;

  void validate() const;
};

struct ThermalEnv {
  double temperature_K = 300.0;
  double vt_V = consts::kB_JK * 300.0 / consts::q_C;

  static ThermalEnv at(double temperature_K) {
    return {temperature_K, consts::kB_JK * temperature_K / consts::q_C};
  }
};

/// B(x) = x / (e^x - 1). Series branch near zero, overflow-safe elsewhere.
double bernoulli(double x);

/// dB/dx, with the same branch structure as bernoulli().
double bernoulli_deriv(double x);

/// Scharfetter-Gummel edge current density [A/cm^2] between two nodes.
/// dpsi = psi_right - psi_left. Positive result = conventional current
/// flowing left -> right.
double sg_flux(double n_left_cm3, double n_right_cm3, double dpsi_V,
               double spacing_cm, double diffusivity_cm2s, Carrier carrier,
               const ThermalEnv& env);

/// Shockley-Read-Hall net recombination rate [cm^-3 s^-1], midgap trap.
/// Positive = net recombination.
double srh_rate(double n_cm3, double p_cm3, const MaterialParams& mat);

/// Charge-neutral electrostatic potential for a given net doping [V].
double equilibrium_guess(double net_doping_cm3, const MaterialParams& mat,
                         const ThermalEnv& env);

/// V_bi = V_T ln(Na Nd / ni^2). Throws std::invalid_argument on
/// nonpositive doping.
double built_in_potential(double na_cm3, double nd_cm3,
                          const MaterialParams& mat, const ThermalEnv& env);

/// Low-field mobility at the given net doping. The constant model returns
/// the MaterialParams value; caughey_thomas applies the standard silicon
/// doping dependence.
double mobility(double net_doping_cm3, Carrier carrier,
                const MaterialParams& mat);

/// Charge-neutral majority/minority carrier densities for a net doping.
void neutral_densities(double net_doping_cm3, double ni_cm3, double& n_cm3,
                       double& p_cm3);

} // namespace tram
