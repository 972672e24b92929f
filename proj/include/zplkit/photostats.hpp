#pragma once

// Photon-statistics analysis: two-exponential g2 model with a shelving
// shoulder, Poisson-background correction, emitter counting, and power
// saturation with linear background subtraction.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zplkit/csv.hpp"
#include "zplkit/fit.hpp"

namespace zplkit {

struct G2Bin {
  double tau_ns = 0.0;
  double g2 = 0.0;
};

struct G2Histogram {
  std::vector<G2Bin> bins;
};

inline G2Histogram make_g2_histogram(std::vector<G2Bin> bins) {
  if (bins.size() < 2) throw std::invalid_argument("g2 histogram needs >= 2 bins");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!std::isfinite(bins[i].tau_ns) || !std::isfinite(bins[i].g2) || bins[i].g2 < 0.0)
      throw std::invalid_argument("g2 histogram row " + std::to_string(i + 1) +
                                  ": g2 must be finite and >= 0");
    if (i > 0 && !(bins[i].tau_ns > bins[i - 1].tau_ns))
      throw std::invalid_argument("g2 histogram row " + std::to_string(i + 1) +
                                  ": delays must be strictly increasing");
  }
  G2Histogram h;
  h.bins = std::move(bins);
  return h;
}

// CSV schema: header "tau_ns,g2".
inline G2Histogram load_g2_histogram(std::string_view csv_text) {
  const auto rows = read_two_column_csv(csv_text, "tau_ns", "g2");
  std::vector<G2Bin> bins;
  bins.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][1] < 0.0)
      throw CsvError("row " + std::to_string(i + 1) + ": g2 must be >= 0");
    bins.push_back({rows[i][0], rows[i][1]});
  }
  return make_g2_histogram(std::move(bins));
}

struct G2FitParams {
  double c = 0.0;        // dip depth, g2(0) = 1 - c
  double b = 0.0;        // shelving shoulder amplitude, >= 0
  double tau1_ns = 0.0;  // antibunching timescale
  double tau2_ns = 0.0;  // shelving timescale, > tau1 (== tau1 when b = 0)
};

// g2(tau) = 1 - c[(1+b) exp(-|tau|/tau1) - b exp(-|tau|/tau2)]; even in tau.
inline double g2_model(double tau_ns, const G2FitParams& p) {
  if (!(p.tau1_ns > 0.0) || !(p.tau2_ns > 0.0))
    throw std::domain_error("g2_model: timescales must be > 0");
  const double a = std::abs(tau_ns);
  return 1.0 - p.c * ((1.0 + p.b) * std::exp(-a / p.tau1_ns) - p.b * std::exp(-a / p.tau2_ns));
}

struct G2Fit {
  G2FitParams params;
  G2FitParams errors;
  double g2_zero = 0.0;          // fitted value 1 - c
  bool no_antibunching = false;  // data never dips below 1
  bool shoulder = false;         // two-timescale model selected over b = 0
  FitResult engine;
};

// Fits the dip model with c, b, tau1 log-positive and tau2 = tau1(1+e^q),
// which keeps the two timescales ordered without clipping. A reduced
// single-exponential fit (b pinned to 0) runs alongside it and the Bayesian
// information criterion picks between the two, so data without a shelving
// shoulder is not distorted by two parameters it cannot constrain.
inline G2Fit fit_g2(const G2Histogram& h, const FitOptions& opt = {}) {
  if (h.bins.size() < 8)
    throw std::invalid_argument("fit_g2 needs >= 8 bins, got " + std::to_string(h.bins.size()));
  if (!(h.bins.front().tau_ns < 0.0 && h.bins.back().tau_ns > 0.0))
    throw std::invalid_argument("fit_g2 needs delays on both sides of tau = 0");

  double gmin = 1e300, gmax = -1e300, span = 0.0;
  for (const auto& b : h.bins) {
    gmin = std::min(gmin, b.g2);
    gmax = std::max(gmax, b.g2);
  }
  span = h.bins.back().tau_ns - h.bins.front().tau_ns;

  const double c0 = std::clamp(1.0 - gmin, 0.05, 1.0);
  // first |tau| at which the dip has half recovered
  double tau1_0 = span / 10.0;
  for (const auto& b : h.bins)
    if (b.g2 >= 1.0 - c0 / 2.0) {
      const double a = std::abs(b.tau_ns);
      if (a > 1e-12 && a < tau1_0) tau1_0 = a;
    }
  const double b0 = std::max(gmax - 1.0, 0.01);
  const double q0 = std::log(9.0);  // tau2_0 = 10 * tau1_0

  FitProblem full;
  full.model = [](std::span<const double> p, double tau) {
    const double a = std::abs(tau);
    const double tau1 = p[2], tau2 = p[2] * (1.0 + std::exp(p[3]));
    return 1.0 - p[0] * ((1.0 + p[1]) * std::exp(-a / tau1) - p[1] * std::exp(-a / tau2));
  };
  for (const auto& b : h.bins) full.data.push_back({b.tau_ns, b.g2, 1.0});
  full.params = {{"c", c0, Transform::log_positive},
                 {"b", b0, Transform::log_positive},
                 {"tau1", tau1_0, Transform::log_positive},
                 {"q", q0, Transform::free}};

  FitProblem reduced;
  reduced.model = [](std::span<const double> p, double tau) {
    return 1.0 - p[0] * std::exp(-std::abs(tau) / p[1]);
  };
  reduced.data = full.data;
  reduced.params = {{"c", c0, Transform::log_positive},
                    {"tau1", tau1_0, Transform::log_positive}};

  const auto rf = fit(full, opt);
  const auto rr = fit(reduced, opt);

  const double n = static_cast<double>(h.bins.size());
  const auto bic = [n](const FitResult& r, double np) {
    return n * std::log(r.cost / n) + np * std::log(n);
  };
  // a converged fit beats a stalled one; otherwise the shoulder parameters
  // must pay for themselves
  const bool use_full =
      rf.converged != rr.converged ? rf.converged : bic(rf, 4.0) < bic(rr, 2.0);

  G2Fit out;
  out.shoulder = use_full;
  if (use_full) {
    out.engine = rf;
    const double c = rf.params[0], b = rf.params[1], tau1 = rf.params[2], q = rf.params[3];
    const double eq = std::exp(q);
    out.params = {c, b, tau1, tau1 * (1.0 + eq)};
    if (rf.errors_defined) {
      out.errors.c = rf.std_errors[0];
      out.errors.b = rf.std_errors[1];
      out.errors.tau1_ns = rf.std_errors[2];
      // tau2 = tau1 (1 + e^q): delta method over (tau1, q)
      const std::size_t idx[] = {2, 3};
      const double grad[] = {1.0 + eq, tau1 * eq};
      out.errors.tau2_ns = std::sqrt(propagate_variance(rf.covariance, idx, grad));
    }
  } else {
    out.engine = rr;
    const double c = rr.params[0], tau1 = rr.params[1];
    out.params = {c, 0.0, tau1, tau1};
    if (rr.errors_defined) {
      out.errors.c = rr.std_errors[0];
      out.errors.tau1_ns = rr.std_errors[1];
    }
  }
  out.g2_zero = 1.0 - out.params.c;
  out.no_antibunching = gmin >= 1.0;
  return out;
}

// rho = S/(S+B), the emitter's share of the detected rate.
inline double signal_fraction(double signal, double background) {
  if (!(signal > 0.0) || !std::isfinite(signal))
    throw std::domain_error("signal rate must be > 0");
  if (!(background >= 0.0) || !std::isfinite(background))
    throw std::domain_error("background rate must be >= 0");
  return signal / (signal + background);
}

// Removes uncorrelated-background dilution: g2_corr = (g2 - (1-rho^2))/rho^2.
// Values are deliberately not clamped; see corrected histograms' flag.
inline double correct_g2_background(double g2, double rho) {
  if (!(rho > 0.0 && rho <= 1.0))
    throw std::domain_error("rho must be in (0, 1], got " + std::to_string(rho));
  if (!(g2 >= 0.0) || !std::isfinite(g2)) throw std::domain_error("g2 must be finite and >= 0");
  return (g2 - (1.0 - rho * rho)) / (rho * rho);
}

struct CorrectedG2 {
  G2Histogram histogram;
  bool strongly_negative = false;  // any corrected bin < -0.1
};

inline CorrectedG2 correct_g2_background(const G2Histogram& h, double rho) {
  CorrectedG2 out;
  out.histogram.bins.reserve(h.bins.size());
  for (const auto& b : h.bins) {
    const double g = correct_g2_background(b.g2, rho);
    if (g < -0.1) out.strongly_negative = true;
    out.histogram.bins.push_back({b.tau_ns, g});
  }
  return out;
}

struct EmitterCount {
  double n_real = 0.0;
  int n_int = 0;       // nearest positive integer
  double margin = 0.0;  // |n_real - n_int|
};

// n = 1/(1 - g2(0)) for n independent identical emitters.
inline EmitterCount emitter_count(double g2_zero) {
  if (!(g2_zero < 1.0))
    throw std::domain_error("emitter count needs g2(0) < 1, got " + std::to_string(g2_zero));
  EmitterCount out;
  out.n_real = 1.0 / (1.0 - g2_zero);
  out.n_int = std::max(1, static_cast<int>(std::llround(out.n_real)));
  out.margin = std::abs(out.n_real - out.n_int);
  return out;
}

struct SaturationPoint {
  double power_mw = 0.0;
  double intensity_kcps = 0.0;
};

enum class SaturationKind { total, background, corrected };

struct SaturationSeries {
  std::vector<SaturationPoint> points;
  SaturationKind kind = SaturationKind::total;
};

inline SaturationSeries make_saturation_series(std::vector<SaturationPoint> points,
                                               SaturationKind kind = SaturationKind::total) {
  if (points.size() < 4)
    throw std::invalid_argument("saturation series needs >= 4 points, got " +
                                std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.power_mw) || p.power_mw <= 0.0)
      throw std::invalid_argument("saturation row " + std::to_string(i + 1) +
                                  ": power must be finite and > 0");
    if (!std::isfinite(p.intensity_kcps) || p.intensity_kcps < 0.0)
      throw std::invalid_argument("saturation row " + std::to_string(i + 1) +
                                  ": intensity must be finite and >= 0");
    if (i > 0 && !(p.power_mw > points[i - 1].power_mw))
      throw std::invalid_argument("saturation row " + std::to_string(i + 1) +
                                  ": powers must be strictly increasing");
  }
  SaturationSeries out;
  out.points = std::move(points);
  out.kind = kind;
  return out;
}

// CSV schema: header "power_mw,intensity_kcps".
inline SaturationSeries load_saturation_series(std::string_view csv_text,
                                               SaturationKind kind = SaturationKind::total) {
  const auto rows = read_two_column_csv(csv_text, "power_mw", "intensity_kcps");
  std::vector<SaturationPoint> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) pts.push_back({r[0], r[1]});
  return make_saturation_series(std::move(pts), kind);
}

struct SaturationParams {
  double i_inf_kcps = 0.0;
  double p_sat_mw = 0.0;
};

inline double saturation_model(double power_mw, const SaturationParams& p) {
  if (!(power_mw >= 0.0)) throw std::domain_error("saturation_model: power must be >= 0");
  return p.i_inf_kcps * power_mw / (power_mw + p.p_sat_mw);
}

struct SaturationFitOutcome {
  SaturationParams params;  // corrected fit when a background series is given
  SaturationParams errors;
  SaturationParams raw_params;  // fit on the series as handed in
  SaturationParams raw_errors;
  double background_slope_kcps_per_mw = 0.0;
  bool background_corrected = false;
  std::vector<std::size_t> negative_corrected_rows;  // zero-weighted points
  FitResult engine;      // corrected (or only) fit
  FitResult engine_raw;  // raw fit
};

namespace detail_photostats {

inline FitResult fit_saturation_curve(const std::vector<SaturationPoint>& pts,
                                      const std::vector<double>& weights,
                                      const FitOptions& opt) {
  FitProblem prob;
  prob.model = [](std::span<const double> p, double x) { return p[0] * x / (x + p[1]); };
  double imax = 0.0;
  for (const auto& p : pts) imax = std::max(imax, p.intensity_kcps);
  imax = std::max(imax, 1e-9);
  // power at which the curve passes half of its running maximum
  double phalf = pts[pts.size() / 2].power_mw;
  for (const auto& p : pts)
    if (p.intensity_kcps >= imax / 2.0) {
      phalf = p.power_mw;
      break;
    }
  for (std::size_t i = 0; i < pts.size(); ++i)
    prob.data.push_back({pts[i].power_mw, pts[i].intensity_kcps, weights[i]});
  prob.params = {{"i_inf", imax, Transform::log_positive},
                 {"p_sat", std::max(phalf, 1e-6), Transform::log_positive}};
  return fit(prob, opt);
}

}  // namespace detail_photostats

// Background is modeled as a straight line through the origin (scattering
// scales linearly with power), subtracted, and the saturation law fitted on
// the difference. Corrected intensities that go negative are flagged and
// dropped from the corrected fit by zero weight.
inline SaturationFitOutcome fit_saturation(const SaturationSeries& total,
                                           const std::optional<SaturationSeries>& background = {},
                                           const FitOptions& opt = {}) {
  const auto& pts = total.points;
  SaturationFitOutcome out;

  std::vector<double> unit_weights(pts.size(), 1.0);
  out.engine_raw = detail_photostats::fit_saturation_curve(pts, unit_weights, opt);
  out.raw_params = {out.engine_raw.params[0], out.engine_raw.params[1]};
  if (out.engine_raw.errors_defined)
    out.raw_errors = {out.engine_raw.std_errors[0], out.engine_raw.std_errors[1]};

  if (!background) {
    out.params = out.raw_params;
    out.errors = out.raw_errors;
    out.engine = out.engine_raw;
    out.background_corrected = false;
    return out;
  }

  // Align background powers with the total's grid (1% tolerance), falling
  // back to linear interpolation between background samples.
  const auto& bg = background->points;
  std::vector<double> bg_at(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double p = pts[i].power_mw;
    double matched = -1.0;
    for (const auto& bp : bg)
      if (std::abs(bp.power_mw - p) <= 0.01 * p) {
        matched = bp.intensity_kcps;
        break;
      }
    if (matched >= 0.0) {
      bg_at[i] = matched;
      continue;
    }
    // linear interpolation with end-segment extrapolation
    std::size_t k = 1;
    while (k + 1 < bg.size() && bg[k].power_mw < p) ++k;
    const auto& a = bg[k - 1];
    const auto& b = bg[k];
    const double t = (p - a.power_mw) / (b.power_mw - a.power_mw);
    bg_at[i] = a.intensity_kcps + t * (b.intensity_kcps - a.intensity_kcps);
  }

  // least-squares slope through the origin on the aligned pairs
  double spb = 0.0, spp = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    spb += pts[i].power_mw * bg_at[i];
    spp += pts[i].power_mw * pts[i].power_mw;
  }
  out.background_slope_kcps_per_mw = spb / spp;

  std::vector<SaturationPoint> corrected(pts.size());
  std::vector<double> weights(pts.size(), 1.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    corrected[i].power_mw = pts[i].power_mw;
    corrected[i].intensity_kcps =
        pts[i].intensity_kcps - out.background_slope_kcps_per_mw * pts[i].power_mw;
    if (corrected[i].intensity_kcps < 0.0) {
      weights[i] = 0.0;
      out.negative_corrected_rows.push_back(i + 1);
      corrected[i].intensity_kcps = 0.0;
    }
  }
  out.engine = detail_photostats::fit_saturation_curve(corrected, weights, opt);
  out.params = {out.engine.params[0], out.engine.params[1]};
  if (out.engine.errors_defined)
    out.errors = {out.engine.std_errors[0], out.engine.std_errors[1]};
  out.background_corrected = true;
  return out;
}

}  // namespace zplkit
