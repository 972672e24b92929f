// Compare single-phonon orbital relaxation across the group-IV centers and
// print the temperature at which each matches the reference operating point.

#include <cstdio>

#include "zplkit/phonon.hpp"

int main() {
  using namespace zplkit;

  const auto table = rate_table(default_species(), {0.4, 2.0, 4.0, 10.0});
  std::printf("reference: %.0f GHz at %.1f K\n\n", table.reference.delta_ghz,
              table.reference.temperature_k);
  std::printf("%-8s %10s %14s %14s\n", "species", "gs (GHz)", "rate @ 0.4 K", "T_equiv (K)");
  for (const auto& row : table.rows)
    std::printf("%-8s %10.0f %14.3e %14.3f\n", row.species.c_str(), row.delta_gs_ghz,
                row.normalized.front(), row.equivalent_temperature_k);
  return 0;
}
