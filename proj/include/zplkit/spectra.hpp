#pragma once

// PL spectrum handling: CSV parsing, prominence-based peak detection, and
// simultaneous multi-peak fits that assign zero-phonon-line doublets while
// excluding the first-order Raman line of the excitation laser.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "zplkit/csv.hpp"
#include "zplkit/fit.hpp"
#include "zplkit/units.hpp"

namespace zplkit {

enum class PeakShape { lorentzian, gaussian, pseudo_voigt };

inline const char* to_string(PeakShape s) {
  switch (s) {
    case PeakShape::lorentzian: return "lorentzian";
    case PeakShape::gaussian: return "gaussian";
    case PeakShape::pseudo_voigt: return "pseudo_voigt";
  }
  return "?";
}

struct SpectrumPoint {
  double wavelength_nm = 0.0;
  double counts = 0.0;
};

struct Spectrum {
  std::vector<SpectrumPoint> points;
  std::optional<double> temperature_k;
  std::optional<double> excitation_nm;
  std::string label;
};

// Validating constructor; all library entry points go through this.
inline Spectrum make_spectrum(std::vector<SpectrumPoint> points,
                              std::optional<double> temperature_k = {},
                              std::optional<double> excitation_nm = {}, std::string label = {}) {
  if (points.size() < 8)
    throw std::invalid_argument("spectrum needs >= 8 points, got " +
                                std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.wavelength_nm) || p.wavelength_nm <= 0.0)
      throw std::invalid_argument("spectrum row " + std::to_string(i + 1) +
                                  ": wavelength must be finite and > 0");
    if (!std::isfinite(p.counts) || p.counts < 0.0)
      throw std::invalid_argument("spectrum row " + std::to_string(i + 1) +
                                  ": counts must be finite and >= 0");
    if (i > 0 && !(p.wavelength_nm > points[i - 1].wavelength_nm))
      throw std::invalid_argument("spectrum row " + std::to_string(i + 1) +
                                  ": wavelengths must be strictly increasing");
  }
  if (temperature_k && !(*temperature_k > 0.0))
    throw std::invalid_argument("spectrum temperature must be > 0 K");
  if (excitation_nm && !(*excitation_nm > 0.0))
    throw std::invalid_argument("excitation wavelength must be > 0 nm");
  Spectrum s;
  s.points = std::move(points);
  s.temperature_k = temperature_k;
  s.excitation_nm = excitation_nm;
  s.label = std::move(label);
  return s;
}

// CSV schema: header "wavelength_nm,counts". Monotonicity violations are
// rejected, never silently sorted.
inline Spectrum parse_spectrum(std::string_view csv_text, std::string label = {}) {
  const auto rows = read_two_column_csv(csv_text, "wavelength_nm", "counts");
  std::vector<SpectrumPoint> pts;
  pts.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][1] < 0.0)
      throw CsvError("row " + std::to_string(i + 1) + ": counts must be >= 0, got " +
                     std::to_string(rows[i][1]));
    if (i > 0 && !(rows[i][0] > rows[i - 1][0]))
      throw CsvError("row " + std::to_string(i + 1) +
                     ": wavelengths must be strictly increasing");
    pts.push_back({rows[i][0], rows[i][1]});
  }
  return make_spectrum(std::move(pts), {}, {}, std::move(label));
}

namespace detail_spectra {

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace detail_spectra

// Local maxima rising at least min_prominence * max(counts) above the 10th
// percentile baseline, strictly dominating a +-window neighborhood. Returns
// candidate center wavelengths in increasing order. Points closer than
// `window` samples to either edge are not eligible.
inline std::vector<double> detect_peaks(const Spectrum& s, double min_prominence = 0.05,
                                        int window = 5) {
  if (!(min_prominence > 0.0) || min_prominence > 1.0)
    throw std::invalid_argument("min_prominence must be in (0, 1]");
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  const auto& pts = s.points;
  std::vector<double> counts(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) counts[i] = pts[i].counts;
  const double baseline = detail_spectra::percentile(counts, 0.10);
  const double cmax = *std::max_element(counts.begin(), counts.end());
  const double threshold = min_prominence * cmax;

  std::vector<double> candidates;
  const std::size_t w = static_cast<std::size_t>(window);
  if (pts.size() < 2 * w + 1) return candidates;
  for (std::size_t i = w; i + w < pts.size(); ++i) {
    if (counts[i] - baseline < threshold) continue;
    bool is_peak = true;
    for (std::size_t k = i - w; k <= i + w && is_peak; ++k) {
      if (k == i) continue;
      if (counts[k] > counts[i]) is_peak = false;
      if (counts[k] == counts[i] && k < i) is_peak = false;  // plateau: keep leftmost
    }
    if (is_peak) candidates.push_back(pts[i].wavelength_nm);
  }
  return candidates;
}

struct PeakFit {
  double center_nm = 0.0, center_err_nm = 0.0;
  double fwhm_nm = 0.0, fwhm_err_nm = 0.0;
  double fwhm_ghz = 0.0, fwhm_err_ghz = 0.0;
  double amplitude = 0.0, amplitude_err = 0.0;
  double baseline = 0.0, baseline_err = 0.0;  // shared constant background
  PeakShape shape = PeakShape::lorentzian;
  double eta = 0.0, eta_err = 0.0;  // pseudo-Voigt mixing; 0 otherwise
};

struct DoubletAssignment {
  PeakFit c_peak;  // shorter wavelength
  PeakFit d_peak;
  double splitting_ghz = 0.0;
  double splitting_err_ghz = 0.0;
};

struct DoubletOptions {
  double raman_shift_inv_cm = diamond_raman_shift_inv_cm;
  double raman_window_nm = 0.5;  // exclusion half-width around the predicted line
  FitOptions fit;
};

struct DoubletFitResult {
  std::vector<DoubletAssignment> doublets;
  std::vector<PeakFit> peaks;  // all fitted peaks, increasing wavelength
  std::optional<PeakFit> excluded_raman;
  std::optional<double> raman_prediction_nm;
  FitResult engine;
};

// Peak profiles with amplitude = height at center and a common FWHM meaning.
inline double peak_profile(PeakShape shape, double x, double center, double fwhm,
                           double amplitude, double eta) {
  const double d = x - center;
  const double lor = amplitude * (fwhm * fwhm / 4.0) / (d * d + fwhm * fwhm / 4.0);
  if (shape == PeakShape::lorentzian) return lor;
  constexpr double four_ln2 = 2.772588722239781;
  const double gau = amplitude * std::exp(-four_ln2 * d * d / (fwhm * fwhm));
  if (shape == PeakShape::gaussian) return gau;
  return eta * lor + (1.0 - eta) * gau;
}

namespace detail_spectra {

// Full width at half prominence around the sample nearest to center.
inline double estimate_fwhm(const Spectrum& s, double center, double baseline) {
  const auto& pts = s.points;
  std::size_t ic = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::abs(pts[i].wavelength_nm - center);
    if (d < best) {
      best = d;
      ic = i;
    }
  }
  const double half = baseline + (pts[ic].counts - baseline) / 2.0;
  double left = pts.front().wavelength_nm, right = pts.back().wavelength_nm;
  for (std::size_t i = ic; i-- > 0;)
    if (pts[i].counts <= half) {
      left = pts[i].wavelength_nm;
      break;
    }
  for (std::size_t i = ic + 1; i < pts.size(); ++i)
    if (pts[i].counts <= half) {
      right = pts[i].wavelength_nm;
      break;
    }
  const double w = right - left;
  const double grid = (pts.back().wavelength_nm - pts.front().wavelength_nm) / (pts.size() - 1);
  return std::max(w, 2.0 * grid);
}

}  // namespace detail_spectra

// Fits baseline + one peak per candidate simultaneously, then assigns C/D
// doublets among the non-Raman peaks in wavelength order. With n_doublets=N
// the first N remaining peaks are the C components and the next N the D
// components, paired in order (strain-split doublets keep that ordering as
// long as the inter-doublet offset is small against the splitting).
inline DoubletFitResult fit_doublet(const Spectrum& s, const std::vector<double>& candidates,
                                    PeakShape shape = PeakShape::lorentzian,
                                    std::optional<double> excitation_nm = {}, int n_doublets = 1,
                                    const DoubletOptions& opt = {}) {
  if (n_doublets < 1) throw std::invalid_argument("n_doublets must be >= 1");
  if (candidates.empty()) throw std::invalid_argument("no peak candidates supplied");
  for (double c : candidates)
    if (!(c >= s.points.front().wavelength_nm && c <= s.points.back().wavelength_nm))
      throw std::invalid_argument("candidate " + std::to_string(c) +
                                  " nm lies outside the spectrum");

  std::optional<double> raman_nm;
  if (excitation_nm) raman_nm = raman_line(WavelengthNm(*excitation_nm), opt.raman_shift_inv_cm).value;

  // Upfront feasibility: enough non-Raman candidates to assign.
  std::size_t non_raman = 0;
  for (double c : candidates)
    if (!raman_nm || std::abs(c - *raman_nm) > opt.raman_window_nm) ++non_raman;
  if (non_raman < 2 * static_cast<std::size_t>(n_doublets))
    throw std::invalid_argument("need " + std::to_string(2 * n_doublets) +
                                " non-Raman peaks, found " + std::to_string(non_raman) +
                                " candidates");

  std::vector<double> counts(s.points.size());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = s.points[i].counts;
  const double baseline0 = detail_spectra::percentile(counts, 0.10);
  const double cmax = *std::max_element(counts.begin(), counts.end());

  const bool voigt = shape == PeakShape::pseudo_voigt;
  const std::size_t per_peak = voigt ? 4 : 3;
  const std::size_t npk = candidates.size();

  FitProblem prob;
  prob.params.push_back({"baseline", baseline0, Transform::free, 0, 1,
                         std::max(cmax, 1.0) * 1e-3});
  std::vector<double> sorted_candidates = candidates;
  std::sort(sorted_candidates.begin(), sorted_candidates.end());
  for (std::size_t k = 0; k < npk; ++k) {
    const double c0 = sorted_candidates[k];
    double height = 0.0, bestd = 1e300;
    for (const auto& p : s.points) {
      const double d = std::abs(p.wavelength_nm - c0);
      if (d < bestd) {
        bestd = d;
        height = p.counts;
      }
    }
    const double amp0 = std::max(height - baseline0, std::max(cmax - baseline0, 1.0) * 1e-3);
    const double fwhm0 = detail_spectra::estimate_fwhm(s, c0, baseline0);
    const std::string tag = std::to_string(k);
    prob.params.push_back({"center" + tag, c0, Transform::free, 0, 1, 0.05});
    prob.params.push_back({"fwhm" + tag, fwhm0, Transform::log_positive});
    prob.params.push_back({"amp" + tag, amp0, Transform::log_positive});
    if (voigt) prob.params.push_back({"eta" + tag, 0.5, Transform::bounded, 0.0, 1.0});
  }

  prob.model = [npk, per_peak, shape](std::span<const double> p, double x) {
    double y = p[0];
    for (std::size_t k = 0; k < npk; ++k) {
      const std::size_t b = 1 + k * per_peak;
      y += peak_profile(shape, x, p[b], p[b + 1], p[b + 2], per_peak == 4 ? p[b + 3] : 0.0);
    }
    return y;
  };
  for (const auto& p : s.points) prob.data.push_back({p.wavelength_nm, p.counts, 1.0});

  DoubletFitResult out;
  out.engine = fit(prob, opt.fit);
  out.raman_prediction_nm = raman_nm;
  const auto& r = out.engine;
  const bool have_err = r.errors_defined;

  std::vector<PeakFit> peaks(npk);
  for (std::size_t k = 0; k < npk; ++k) {
    const std::size_t b = 1 + k * per_peak;
    PeakFit pf;
    pf.shape = shape;
    pf.center_nm = r.params[b];
    pf.fwhm_nm = r.params[b + 1];
    pf.amplitude = r.params[b + 2];
    pf.baseline = r.params[0];
    if (voigt) pf.eta = r.params[b + 3];
    if (have_err) {
      pf.center_err_nm = r.std_errors[b];
      pf.fwhm_err_nm = r.std_errors[b + 1];
      pf.amplitude_err = r.std_errors[b + 2];
      pf.baseline_err = r.std_errors[0];
      if (voigt) pf.eta_err = r.std_errors[b + 3];
    }
    pf.fwhm_ghz = linewidth_to_ghz(WavelengthNm(pf.center_nm), pf.fwhm_nm).value;
    if (have_err) {
      // fwhm_ghz = c w / l^2: propagate (w, l) with their covariance
      const double c_ms = constants::light_speed_m_per_s;
      const double l = pf.center_nm, w = pf.fwhm_nm;
      const std::size_t idx[] = {b, b + 1};
      const double grad[] = {-2.0 * c_ms * w / (l * l * l), c_ms / (l * l)};
      pf.fwhm_err_ghz = std::sqrt(propagate_variance(r.covariance, idx, grad));
    }
    peaks[k] = pf;
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const PeakFit& a, const PeakFit& b) { return a.center_nm < b.center_nm; });

  // Raman exclusion: the fitted peak nearest the predicted line, if inside
  // the window, is reported separately and never assigned as C or D.
  std::vector<PeakFit> assignable;
  if (raman_nm) {
    std::size_t best = npk;
    double bestd = opt.raman_window_nm;
    for (std::size_t k = 0; k < npk; ++k) {
      const double d = std::abs(peaks[k].center_nm - *raman_nm);
      if (d <= bestd) {
        bestd = d;
        best = k;
      }
    }
    for (std::size_t k = 0; k < npk; ++k) {
      if (k == best)
        out.excluded_raman = peaks[k];
      else
        assignable.push_back(peaks[k]);
    }
  } else {
    assignable = peaks;
  }
  out.peaks = peaks;

  const std::size_t need = 2 * static_cast<std::size_t>(n_doublets);
  if (assignable.size() < need)
    throw std::invalid_argument("only " + std::to_string(assignable.size()) +
                                " non-Raman peaks after fitting, need " + std::to_string(need));

  // Map an assigned peak back to its engine parameter block by center match.
  auto param_base = [&](const PeakFit& pf) {
    for (std::size_t k = 0; k < npk; ++k) {
      const std::size_t b = 1 + k * per_peak;
      if (r.params[b] == pf.center_nm) return b;
    }
    return std::size_t{1};
  };

  for (int d = 0; d < n_doublets; ++d) {
    DoubletAssignment da;
    da.c_peak = assignable[d];
    da.d_peak = assignable[n_doublets + d];
    da.splitting_ghz = splitting_from_wavelengths(WavelengthNm(da.c_peak.center_nm),
                                                  WavelengthNm(da.d_peak.center_nm))
                           .value;
    if (have_err) {
      const double c_ms = constants::light_speed_m_per_s;
      const double lc = da.c_peak.center_nm, ld = da.d_peak.center_nm;
      const std::size_t idx[] = {param_base(da.c_peak), param_base(da.d_peak)};
      const double grad[] = {-c_ms / (lc * lc), c_ms / (ld * ld)};
      da.splitting_err_ghz = std::sqrt(propagate_variance(r.covariance, idx, grad));
    }
    out.doublets.push_back(da);
  }
  return out;
}

}  // namespace zplkit
