// Build a synthetic low-temperature spectrum with a C/D doublet plus the
// first-order diamond Raman line, then fit it and print the splitting.

#include <cstdio>
#include <vector>

#include "zplkit/spectra.hpp"
#include "zplkit/units.hpp"

int main() {
  using namespace zplkit;

  const double excitation_nm = 515.0;
  const double raman_nm = raman_line(WavelengthNm(excitation_nm)).value;

  std::vector<SpectrumPoint> pts;
  for (double wl = 546.0; wl <= 558.0 + 1e-9; wl += 0.02) {
    double y = 120.0;
    y += peak_profile(PeakShape::lorentzian, wl, 550.0, 0.10, 4200.0, 0.0);
    y += peak_profile(PeakShape::lorentzian, wl, 554.0, 0.12, 2600.0, 0.0);
    y += peak_profile(PeakShape::lorentzian, wl, raman_nm, 0.06, 900.0, 0.0);
    pts.push_back({wl, y});
  }
  const auto spectrum = make_spectrum(std::move(pts), 5.7, excitation_nm, "synthetic");

  const auto candidates = detect_peaks(spectrum);
  const auto res = fit_doublet(spectrum, candidates, PeakShape::lorentzian, excitation_nm);

  for (const auto& d : res.doublets)
    std::printf("C %.4f nm, D %.4f nm, splitting %.2f +- %.2f GHz\n", d.c_peak.center_nm,
                d.d_peak.center_nm, d.splitting_ghz, d.splitting_err_ghz);
  if (res.excluded_raman)
    std::printf("Raman line at %.3f nm excluded from assignment\n",
                res.excluded_raman->center_nm);
  return res.engine.converged ? 0 : 1;
}
