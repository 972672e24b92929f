#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "zplkit/spectra.hpp"

using namespace zplkit;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct SynthPeak {
  double center, fwhm, amplitude;
};

Spectrum synth(const std::vector<SynthPeak>& peaks, PeakShape shape = PeakShape::lorentzian,
               double baseline = 50.0, double lo = 546.0, double hi = 558.0,
               double step = 0.02, double eta = 0.5) {
  std::vector<SpectrumPoint> pts;
  for (double l = lo; l <= hi + 1e-9; l += step) {
    double y = baseline;
    for (const auto& p : peaks) y += peak_profile(shape, l, p.center, p.fwhm, p.amplitude, eta);
    pts.push_back({l, y});
  }
  return make_spectrum(std::move(pts));
}

std::string to_csv(const Spectrum& s) {
  std::ostringstream os;
  os << "wavelength_nm,counts\n";
  os.precision(17);
  for (const auto& p : s.points) os << p.wavelength_nm << "," << p.counts << "\n";
  return os.str();
}

}  // namespace

TEST_CASE("parse_spectrum reads the documented schema") {
  const Spectrum ref = synth({{550.0, 0.15, 1000.0}});
  const Spectrum s = parse_spectrum(to_csv(ref), "sample");
  REQUIRE(s.points.size() == ref.points.size());
  REQUIRE(s.label == "sample");
  REQUIRE_THAT(s.points[3].counts, WithinRel(ref.points[3].counts, 1e-15));
}

TEST_CASE("parse_spectrum names the offending row") {
  std::string text = "wavelength_nm,counts\n";
  for (int i = 0; i < 20; ++i) {
    const double l = 550.0 + 0.1 * i;
    text += std::to_string(l) + "," + (i == 16 ? std::string("-3") : std::string("10")) + "\n";
  }
  REQUIRE_THROWS_MATCHES(parse_spectrum(text), CsvError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("row 17")));
}

TEST_CASE("parse_spectrum rejects non-monotone wavelengths instead of sorting") {
  std::string text = "wavelength_nm,counts\n550,1\n551,1\n550.5,1\n552,1\n553,1\n554,1\n555,1\n556,1\n";
  REQUIRE_THROWS_MATCHES(parse_spectrum(text), CsvError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("increasing")));
}

TEST_CASE("spectra require at least 8 points") {
  std::vector<SpectrumPoint> pts;
  for (int i = 0; i < 7; ++i) pts.push_back({550.0 + i, 1.0});
  REQUIRE_THROWS_AS(make_spectrum(pts), std::invalid_argument);
}

TEST_CASE("detect_peaks finds a doublet and nothing else") {
  const Spectrum s = synth({{550.0, 0.15, 1000.0}, {554.0, 0.18, 700.0}});
  const auto c = detect_peaks(s);
  REQUIRE(c.size() == 2);
  REQUIRE_THAT(c[0], WithinAbs(550.0, 0.2));
  REQUIRE_THAT(c[1], WithinAbs(554.0, 0.2));
}

TEST_CASE("detect_peaks sees the Raman line as a third candidate") {
  const Spectrum s =
      synth({{550.0, 0.15, 1000.0}, {552.945, 0.10, 400.0}, {554.0, 0.18, 700.0}});
  REQUIRE(detect_peaks(s).size() == 3);
}

TEST_CASE("detect_peaks returns nothing for a flat spectrum") {
  std::vector<SpectrumPoint> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({540.0 + 0.1 * i, 123.0});
  REQUIRE(detect_peaks(make_spectrum(pts)).empty());
}

TEST_CASE("doublet fit assigns C and D around the excluded Raman line") {
  const Spectrum s =
      synth({{550.0, 0.15, 1000.0}, {552.945, 0.10, 400.0}, {554.0, 0.18, 700.0}});
  const auto cand = detect_peaks(s);
  const auto res = fit_doublet(s, cand, PeakShape::lorentzian, 515.0);
  REQUIRE(res.doublets.size() == 1);
  const auto& d = res.doublets[0];
  REQUIRE_THAT(d.c_peak.center_nm, WithinAbs(550.0, 0.05));
  REQUIRE_THAT(d.d_peak.center_nm, WithinAbs(554.0, 0.05));
  REQUIRE_THAT(d.splitting_ghz, WithinRel(3935.575425, 0.02));
  REQUIRE(res.excluded_raman.has_value());
  REQUIRE_THAT(res.excluded_raman->center_nm, WithinAbs(552.945, 0.05));
}

TEST_CASE("without an excitation wavelength no Raman exclusion happens") {
  const Spectrum s =
      synth({{550.0, 0.15, 1000.0}, {552.945, 0.10, 400.0}, {554.0, 0.18, 700.0}});
  const auto res = fit_doublet(s, detect_peaks(s), PeakShape::lorentzian);
  REQUIRE_FALSE(res.excluded_raman.has_value());
  // C/D are simply the two shortest-wavelength peaks now
  REQUIRE_THAT(res.doublets[0].d_peak.center_nm, WithinAbs(552.945, 0.05));
}

TEST_CASE("zero-noise synthesis is recovered to tight tolerances") {
  for (PeakShape shape : {PeakShape::lorentzian, PeakShape::gaussian}) {
    const Spectrum s = synth({{550.0, 0.15, 1000.0}, {554.0, 0.18, 700.0}}, shape);
    const auto res = fit_doublet(s, detect_peaks(s), shape);
    const auto& d = res.doublets[0];
    REQUIRE_THAT(d.c_peak.center_nm, WithinAbs(550.0, 1e-4));
    REQUIRE_THAT(d.d_peak.center_nm, WithinAbs(554.0, 1e-4));
    REQUIRE_THAT(d.c_peak.fwhm_nm, WithinRel(0.15, 1e-3));
    REQUIRE_THAT(d.d_peak.fwhm_nm, WithinRel(0.18, 1e-3));
    REQUIRE_THAT(d.c_peak.amplitude, WithinRel(1000.0, 1e-3));
    REQUIRE_THAT(d.c_peak.baseline, WithinAbs(50.0, 0.1));
  }
}

TEST_CASE("pseudo-Voigt mixing parameter is recovered") {
  const Spectrum s = synth({{550.0, 0.15, 1000.0}, {554.0, 0.18, 700.0}},
                           PeakShape::pseudo_voigt, 50.0, 546.0, 558.0, 0.02, 0.3);
  const auto res = fit_doublet(s, detect_peaks(s), PeakShape::pseudo_voigt);
  REQUIRE_THAT(res.doublets[0].c_peak.eta, WithinAbs(0.3, 0.02));
  REQUIRE_THAT(res.doublets[0].c_peak.center_nm, WithinAbs(550.0, 1e-3));
}

TEST_CASE("scaling all counts rescales amplitudes but not positions or widths") {
  const Spectrum a = synth({{550.0, 0.15, 1000.0}, {554.0, 0.18, 700.0}});
  std::vector<SpectrumPoint> scaled = a.points;
  for (auto& p : scaled) p.counts *= 1000.0;
  const Spectrum b = make_spectrum(scaled);
  const auto ra = fit_doublet(a, detect_peaks(a));
  const auto rb = fit_doublet(b, detect_peaks(b));
  REQUIRE_THAT(rb.doublets[0].c_peak.center_nm,
               WithinRel(ra.doublets[0].c_peak.center_nm, 1e-6));
  REQUIRE_THAT(rb.doublets[0].c_peak.fwhm_nm, WithinRel(ra.doublets[0].c_peak.fwhm_nm, 1e-6));
  REQUIRE_THAT(rb.doublets[0].d_peak.fwhm_nm, WithinRel(ra.doublets[0].d_peak.fwhm_nm, 1e-6));
  REQUIRE_THAT(rb.doublets[0].c_peak.amplitude,
               WithinRel(1000.0 * ra.doublets[0].c_peak.amplitude, 1e-6));
  REQUIRE_THAT(rb.doublets[0].splitting_ghz, WithinRel(ra.doublets[0].splitting_ghz, 1e-9));
}

TEST_CASE("a single usable peak is rejected") {
  const Spectrum s = synth({{550.0, 0.15, 1000.0}});
  REQUIRE_THROWS_MATCHES(fit_doublet(s, detect_peaks(s)), std::invalid_argument,
                         Catch::Matchers::MessageMatches(ContainsSubstring("non-Raman")));
}

TEST_CASE("two-doublet mode pairs strained components in wavelength order") {
  const double c_ms = constants::light_speed_m_per_s;
  auto partner = [&](double lc, double split_ghz) { return c_ms / (c_ms / lc - split_ghz); };
  const double c1 = 550.0, c2 = 550.3;
  const double d1 = partner(c1, 3876.0), d2 = partner(c2, 3898.0);
  const Spectrum s = synth({{c1, 0.12, 1000.0}, {c2, 0.12, 800.0},
                            {d1, 0.14, 650.0}, {d2, 0.14, 500.0}});
  const auto cand = detect_peaks(s, 0.05, 3);
  REQUIRE(cand.size() == 4);
  const auto res = fit_doublet(s, cand, PeakShape::lorentzian, {}, 2);
  REQUIRE(res.doublets.size() == 2);
  REQUIRE_THAT(res.doublets[0].splitting_ghz, WithinAbs(3876.0, 2.0));
  REQUIRE_THAT(res.doublets[1].splitting_ghz, WithinAbs(3898.0, 2.0));
}

TEST_CASE("candidates outside the spectrum are rejected") {
  const Spectrum s = synth({{550.0, 0.15, 1000.0}, {554.0, 0.18, 700.0}});
  REQUIRE_THROWS_AS(fit_doublet(s, {545.0, 554.0}), std::invalid_argument);
}

TEST_CASE("splitting uncertainties are reported and small for clean data") {
  Spectrum s = synth({{550.0, 0.15, 1000.0}, {554.0, 0.18, 700.0}});
  // add a deterministic ripple so residuals are non-zero
  for (std::size_t i = 0; i < s.points.size(); ++i)
    s.points[i].counts += 2.0 * std::sin(0.37 * static_cast<double>(i));
  const auto res = fit_doublet(s, detect_peaks(s));
  REQUIRE(res.doublets[0].splitting_err_ghz > 0.0);
  REQUIRE(res.doublets[0].splitting_err_ghz < 5.0);
  REQUIRE(res.doublets[0].c_peak.fwhm_err_ghz > 0.0);
}
