#pragma once

// Tool-level defaults, overridable by pointing ZPLKIT_DEFAULTS at a JSON
// file. Unknown keys are rejected so typos fail loudly instead of silently
// keeping the built-in value.

#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "zplkit/units.hpp"

namespace zplkit {

struct Defaults {
  double raman_shift_inv_cm = diamond_raman_shift_inv_cm;
  double raman_window_nm = 0.5;
  double reference_delta_ghz = 80.0;
  double reference_temperature_k = 0.4;
  double g2_bin_width_ns = 0.5;
  double g2_max_delay_ns = 150.0;
  int plot_samples = 256;
};

inline Defaults load_defaults() {
  Defaults d;
  const char* env = std::getenv("ZPLKIT_DEFAULTS");
  if (env == nullptr || *env == '\0') return d;
  std::ifstream f(env);
  if (!f) throw std::runtime_error(std::string("cannot read defaults file: ") + env);
  nlohmann::json j;
  f >> j;
  if (!j.is_object()) throw std::runtime_error("defaults file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "raman_shift_inv_cm")
      d.raman_shift_inv_cm = value.get<double>();
    else if (key == "raman_window_nm")
      d.raman_window_nm = value.get<double>();
    else if (key == "reference_delta_ghz")
      d.reference_delta_ghz = value.get<double>();
    else if (key == "reference_temperature_k")
      d.reference_temperature_k = value.get<double>();
    else if (key == "g2_bin_width_ns")
      d.g2_bin_width_ns = value.get<double>();
    else if (key == "g2_max_delay_ns")
      d.g2_max_delay_ns = value.get<double>();
    else if (key == "plot_samples")
      d.plot_samples = value.get<int>();
    else
      throw std::runtime_error("unknown defaults key: " + key);
  }
  if (!(d.raman_shift_inv_cm > 0.0) || !(d.raman_window_nm > 0.0) ||
      !(d.reference_delta_ghz > 0.0) || !(d.reference_temperature_k > 0.0) ||
      !(d.g2_bin_width_ns > 0.0) || !(d.g2_max_delay_ns > d.g2_bin_width_ns) ||
      d.plot_samples < 2)
    throw std::runtime_error("defaults file holds out-of-range values");
  return d;
}

}  // namespace zplkit
