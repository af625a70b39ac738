#pragma once

namespace tram::consts {

inline constexpr double q_C = 1.602176634e-19;     // elementary charge
inline constexpr double kB_JK = 1.380649e-23;      // Boltzmann constant
inline constexpr double eps0_Fcm = 8.8541878128e-14;

} // namespace tram::consts
