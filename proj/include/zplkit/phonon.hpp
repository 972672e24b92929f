#pragma once

// Single-phonon orbital relaxation between ground-state branches: the rate
// scales as splitting^3 times the thermal phonon occupation, which is all
// that is needed to compare centers once a common reference is picked. The
// unknown electron-phonon prefactor cancels in every normalized quantity.

#include <cctype>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zplkit/units.hpp"

namespace zplkit {

// Dimensionless phonon energy h*delta/(kB*T).
inline double phonon_x(double delta_ghz, double temperature_k) {
  if (!(delta_ghz > 0.0)) throw std::domain_error("splitting must be > 0 GHz");
  if (!(temperature_k > 0.0)) throw std::domain_error("temperature must be > 0 K");
  return constants::planck_j_s * delta_ghz * 1e9 /
         (constants::boltzmann_j_per_k * temperature_k);
}

// Upward rate in units of prefactor * GHz^3: delta^3 * n_bose(delta, T).
inline double relative_rate(double delta_ghz, double temperature_k, double prefactor = 1.0) {
  const double x = phonon_x(delta_ghz, temperature_k);
  if (x > 700.0) return 0.0;  // occupation below double-precision range
  return prefactor * delta_ghz * delta_ghz * delta_ghz / std::expm1(x);
}

struct RateReference {
  double delta_ghz = 80.0;       // SiV-II ground-state splitting
  double temperature_k = 0.4;    // dilution-refrigerator operating point
};

inline double normalized_rate(double delta_ghz, double temperature_k,
                              const RateReference& ref = {}) {
  const double denom = relative_rate(ref.delta_ghz, ref.temperature_k);
  if (denom == 0.0)
    throw std::domain_error("reference rate underflows to zero; pick a warmer reference");
  return relative_rate(delta_ghz, temperature_k) / denom;
}

// Temperature at which a center with the given splitting relaxes as fast as
// the reference does at its own operating point. Bisection over a fixed
// bracket; the rate is strictly increasing in T.
inline double equivalent_temperature(double delta_ghz, const RateReference& ref = {}) {
  const double target = relative_rate(ref.delta_ghz, ref.temperature_k);
  if (target == 0.0) throw std::domain_error("reference rate underflows to zero");
  if (!(delta_ghz > 0.0)) throw std::domain_error("splitting must be > 0 GHz");
  double lo = 1e-6, hi = 1e6;
  if (relative_rate(delta_ghz, lo) > target || relative_rate(delta_ghz, hi) < target)
    throw std::domain_error("equivalent temperature falls outside [1e-6, 1e6] K");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (relative_rate(delta_ghz, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct CenterSpecies {
  std::string name;
  double delta_gs_ghz = 0.0;
  std::optional<double> delta_es_ghz;
  std::string source;  // where the splitting value comes from
  std::vector<std::string> aliases;
};

inline std::vector<CenterSpecies> default_species() {
  return {
      {"SiV-I", 48.0, {},
       "Clark et al., Phys. Rev. B 51, 16681 (1995)", {"siv1", "siv-i"}},
      {"SiV-II", 80.0, {},
       "Sukachev et al., Phys. Rev. Lett. 119, 223602 (2017)", {"siv2", "siv-ii", "siv"}},
      {"GeV", 169.0, {},
       "Palyanov et al., Sci. Rep. 5, 14789 (2015)", {"gev"}},
      {"SnV", 850.0, {},
       "Iwasaki et al., Phys. Rev. Lett. 119, 253601 (2017)", {"snv"}},
      {"PbV", 3878.0, 6920.0,
       "this work; excited-state value from Thiering and Gali, "
       "Phys. Rev. X 8, 021063 (2018)",
       {"pbv"}},
  };
}

namespace detail_phonon {

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace detail_phonon

inline const CenterSpecies* find_species(const std::vector<CenterSpecies>& table,
                                         std::string_view key) {
  for (const auto& s : table) {
    if (detail_phonon::iequals(s.name, key)) return &s;
    for (const auto& a : s.aliases)
      if (detail_phonon::iequals(a, key)) return &s;
  }
  return nullptr;
}

struct RateTableRow {
  std::string species;
  double delta_gs_ghz = 0.0;
  std::vector<double> normalized;  // one entry per grid temperature
  double equivalent_temperature_k = 0.0;
};

struct RateTable {
  std::vector<double> temperatures_k;
  std::vector<RateTableRow> rows;
  RateReference reference;
};

inline RateTable rate_table(const std::vector<CenterSpecies>& species,
                            const std::vector<double>& temperatures_k,
                            const RateReference& ref = {}) {
  if (species.empty()) throw std::invalid_argument("rate_table needs >= 1 species");
  if (temperatures_k.empty()) throw std::invalid_argument("rate_table needs >= 1 temperature");
  for (double t : temperatures_k)
    if (!(t > 0.0) || !std::isfinite(t))
      throw std::invalid_argument("grid temperatures must be finite and > 0");
  RateTable out;
  out.temperatures_k = temperatures_k;
  out.reference = ref;
  for (const auto& s : species) {
    RateTableRow row;
    row.species = s.name;
    row.delta_gs_ghz = s.delta_gs_ghz;
    for (double t : temperatures_k)
      row.normalized.push_back(normalized_rate(s.delta_gs_ghz, t, ref));
    row.equivalent_temperature_k = equivalent_temperature(s.delta_gs_ghz, ref);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace zplkit
