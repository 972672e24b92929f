#pragma once

// Temperature dependence of ZPL linewidth and position. Linewidth follows
// a cubic law w0 + a3*T^3 (both coefficients positive); the line position
// follows lambda0 + b2*T^2 + b4*T^4 with sign-free polynomial coefficients.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "zplkit/csv.hpp"
#include "zplkit/fit.hpp"

namespace zplkit {

enum class ThermalMode { linewidth, shift };

struct ThermalPoint {
  double temperature_k = 0.0;
  double value = 0.0;  // GHz for linewidth series, nm for shift series
};

struct ThermalSeries {
  std::vector<ThermalPoint> points;
  ThermalMode mode = ThermalMode::linewidth;
  std::string peak_label;  // e.g. "C" or "D"
};

inline ThermalSeries make_thermal_series(std::vector<ThermalPoint> points, ThermalMode mode,
                                         std::string peak_label = {}) {
  if (points.size() < 4)
    throw std::invalid_argument("thermal series needs >= 4 points, got " +
                                std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.temperature_k) || p.temperature_k <= 0.0)
      throw std::invalid_argument("thermal series row " + std::to_string(i + 1) +
                                  ": temperature must be finite and > 0");
    if (!std::isfinite(p.value) || p.value <= 0.0)
      throw std::invalid_argument("thermal series row " + std::to_string(i + 1) +
                                  ": value must be finite and > 0");
    if (i > 0 && !(p.temperature_k > points[i - 1].temperature_k))
      throw std::invalid_argument("thermal series row " + std::to_string(i + 1) +
                                  ": temperatures must be strictly increasing");
  }
  ThermalSeries s;
  s.points = std::move(points);
  s.mode = mode;
  s.peak_label = std::move(peak_label);
  return s;
}

// CSV schema: header "temperature_k,value".
inline ThermalSeries load_thermal_series(std::string_view csv_text, ThermalMode mode,
                                         std::string peak_label = {}) {
  const auto rows = read_two_column_csv(csv_text, "temperature_k", "value");
  std::vector<ThermalPoint> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) pts.push_back({r[0], r[1]});
  return make_thermal_series(std::move(pts), mode, std::move(peak_label));
}

struct LinewidthParams {
  double w0_ghz = 0.0;
  double a3_ghz_per_k3 = 0.0;
};

struct ShiftParams {
  double lambda0_nm = 0.0;
  double b2_nm_per_k2 = 0.0;
  double b4_nm_per_k4 = 0.0;
};

inline double linewidth_model(double temperature_k, const LinewidthParams& p) {
  if (!(temperature_k > 0.0)) throw std::domain_error("linewidth_model: T must be > 0 K");
  return p.w0_ghz + p.a3_ghz_per_k3 * temperature_k * temperature_k * temperature_k;
}

inline double shift_model(double temperature_k, const ShiftParams& p) {
  if (!(temperature_k > 0.0)) throw std::domain_error("shift_model: T must be > 0 K");
  const double t2 = temperature_k * temperature_k;
  return p.lambda0_nm + p.b2_nm_per_k2 * t2 + p.b4_nm_per_k4 * t2 * t2;
}

struct LinewidthFit {
  LinewidthParams params;
  LinewidthParams errors;
  FitResult engine;
};

struct ShiftFit {
  ShiftParams params;
  ShiftParams errors;
  FitResult engine;
};

// Both fits run on the reduced temperature t = T/Tmax so the polynomial
// regressors are O(1) and the normal equations stay well conditioned over
// ranges like 5.7-263 K; coefficients and their errors are rescaled back.

inline LinewidthFit fit_linewidth_series(const ThermalSeries& s, const FitOptions& opt = {}) {
  if (s.mode != ThermalMode::linewidth)
    throw std::invalid_argument("fit_linewidth_series: series is not a linewidth series");
  const double tmax = s.points.back().temperature_k;
  FitProblem prob;
  prob.model = [](std::span<const double> p, double t) { return p[0] + p[1] * t * t * t; };
  for (const auto& pt : s.points) prob.data.push_back({pt.temperature_k / tmax, pt.value, 1.0});

  const double vmin = s.points.front().value;
  const double vspan = std::max(s.points.back().value - vmin, 1e-6 * vmin);
  prob.params = {{"w0", std::max(vmin, 1e-12), Transform::log_positive},
                 {"a3_scaled", vspan, Transform::log_positive}};
  LinewidthFit out;
  out.engine = fit(prob, opt);
  const double t3 = tmax * tmax * tmax;
  out.params = {out.engine.params[0], out.engine.params[1] / t3};
  if (out.engine.errors_defined)
    out.errors = {out.engine.std_errors[0], out.engine.std_errors[1] / t3};
  return out;
}

inline ShiftFit fit_shift_series(const ThermalSeries& s, const FitOptions& opt = {}) {
  if (s.mode != ThermalMode::shift)
    throw std::invalid_argument("fit_shift_series: series is not a shift series");
  const double tmax = s.points.back().temperature_k;
  FitProblem prob;
  prob.model = [](std::span<const double> p, double t) {
    const double t2 = t * t;
    return p[0] + p[1] * t2 + p[2] * t2 * t2;
  };
  for (const auto& pt : s.points) prob.data.push_back({pt.temperature_k / tmax, pt.value, 1.0});

  const double v0 = s.points.front().value;
  const double dv = s.points.back().value - v0;
  prob.params = {{"lambda0", v0, Transform::log_positive},
                 {"b2_scaled", dv, Transform::free, 0, 1, std::max(std::abs(dv), 1e-6)},
                 {"b4_scaled", 0.0, Transform::free, 0, 1, std::max(std::abs(dv), 1e-6)}};
  ShiftFit out;
  out.engine = fit(prob, opt);
  const double t2 = tmax * tmax, t4 = t2 * t2;
  out.params = {out.engine.params[0], out.engine.params[1] / t2, out.engine.params[2] / t4};
  if (out.engine.errors_defined)
    out.errors = {out.engine.std_errors[0], out.engine.std_errors[1] / t2,
                  out.engine.std_errors[2] / t4};
  return out;
}

}  // namespace zplkit
