#pragma once

// Physical constants and the spectroscopic unit conversions shared by the
// analysis modules. Wavelengths are vacuum values in nm, frequencies in GHz,
// temperatures in K. Values that look like plain doubles at module
// boundaries carry their unit in the name (_nm, _ghz, _k, _ns, _mw, _kcps).

#include <cmath>
#include <stdexcept>
#include <string>

namespace zplkit {

namespace constants {
// CODATA exact values (SI).
inline constexpr double planck_j_s = 6.62607015e-34;
inline constexpr double boltzmann_j_per_k = 1.380649e-23;
inline constexpr double light_speed_m_per_s = 2.99792458e8;
}  // namespace constants

// First-order diamond Raman shift. Used as the default wherever a Raman
// shift is needed; callers can pass their own value.
inline constexpr double diamond_raman_shift_inv_cm = 1332.5;

namespace detail {
inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::domain_error(msg);
}
}  // namespace detail

struct WavelengthNm {
  double value;
  explicit WavelengthNm(double v) : value(v) {
    detail::require(std::isfinite(v) && v > 0.0,
                    "wavelength must be a finite positive nm value, got " + std::to_string(v));
  }
};

// Holds both absolute frequencies and signed intervals (splittings,
// linewidths). Positivity is checked by the operations that need it.
struct FrequencyGHz {
  double value;
  explicit FrequencyGHz(double v) : value(v) {
    detail::require(std::isfinite(v), "frequency must be finite, got " + std::to_string(v));
  }
};

struct TemperatureK {
  double value;
  explicit TemperatureK(double v) : value(v) {
    detail::require(std::isfinite(v) && v > 0.0,
                    "temperature must be a finite positive K value, got " + std::to_string(v));
  }
};

// c/lambda with c in m/s and lambda in nm yields GHz directly.
inline FrequencyGHz wavelength_to_frequency(WavelengthNm lambda) {
  return FrequencyGHz(constants::light_speed_m_per_s / lambda.value);
}

inline WavelengthNm frequency_to_wavelength(FrequencyGHz nu) {
  detail::require(nu.value > 0.0, "absolute frequency must be > 0 GHz");
  return WavelengthNm(constants::light_speed_m_per_s / nu.value);
}

// Doublet splitting c*(1/shorter - 1/longer); positive by construction.
inline FrequencyGHz splitting_from_wavelengths(WavelengthNm shorter, WavelengthNm longer) {
  detail::require(shorter.value < longer.value,
                  "splitting expects shorter wavelength first (got " +
                      std::to_string(shorter.value) + " >= " + std::to_string(longer.value) + " nm)");
  return FrequencyGHz(constants::light_speed_m_per_s * (1.0 / shorter.value - 1.0 / longer.value));
}

// FWHM in nm around a center wavelength -> FWHM in GHz, c*dl/l^2.
inline FrequencyGHz linewidth_to_ghz(WavelengthNm center, double fwhm_nm) {
  detail::require(std::isfinite(fwhm_nm) && fwhm_nm >= 0.0, "linewidth in nm must be >= 0");
  return FrequencyGHz(constants::light_speed_m_per_s * fwhm_nm / (center.value * center.value));
}

// Stokes line of a scatterer with the given shift, in wavenumber space:
// 1/lambda_out = 1/lambda_exc - shift. Shift may be negative (anti-Stokes).
inline WavelengthNm raman_line(WavelengthNm excitation, double shift_inv_cm = diamond_raman_shift_inv_cm) {
  const double k_exc_inv_cm = 1e7 / excitation.value;  // nm -> cm^-1
  detail::require(std::isfinite(shift_inv_cm) && shift_inv_cm < k_exc_inv_cm,
                  "Raman shift must be < excitation wavenumber (" + std::to_string(k_exc_inv_cm) +
                      " cm^-1), got " + std::to_string(shift_inv_cm));
  return WavelengthNm(1e7 / (k_exc_inv_cm - shift_inv_cm));
}

// counts/ns -> kcps (1 count/ns = 1e9 cps = 1e6 kcps).
inline constexpr double kcps_per_count_per_ns = 1e6;

}  // namespace zplkit
