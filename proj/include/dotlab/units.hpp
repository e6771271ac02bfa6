#pragma once

// Unit system used throughout dotlab:
//   length nm, energy ueV, frequency MHz, voltage V, field T, time us.

namespace dotlab::units {

/// Planck constant expressed as ueV per MHz.
inline constexpr double kUeVPerMHz = 4.135667696e-3;

/// Bohr magneton in ueV/T.
inline constexpr double kBohrMagneton = 57.883818;

/// hbar^2 / (2 m_e) in ueV nm^2.
inline constexpr double kHbar2Over2Me = 38099.8212;

/// e^2 / (4 pi eps0) in ueV nm.
inline constexpr double kCoulombConstant = 1.439964548e6;

/// Electron potential energy of one volt, ueV.
inline constexpr double kUeVPerVolt = 1.0e6;

inline constexpr double mhz_to_ueV(double f_mhz) { return f_mhz * kUeVPerMHz; }
inline constexpr double ueV_to_mhz(double e_ueV) { return e_ueV / kUeVPerMHz; }

/// Zeeman resonance frequency (MHz) of a spin with g-factor g in field b (T).
inline constexpr double larmor_mhz(double g, double b_tesla) {
  return g * kBohrMagneton * b_tesla / kUeVPerMHz;
}

}  // namespace dotlab::units
