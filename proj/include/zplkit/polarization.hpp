#pragma once

// Dipole geometry for <111>-oriented defects in diamond viewed along [001],
// plus the cos^2 polarization fit used on measured polar scans.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zplkit/csv.hpp"
#include "zplkit/fit.hpp"

namespace zplkit {

// Polarization visibility reported for this defect family in earlier
// room-temperature work; a handy yardstick next to predicted values.
inline constexpr double reference_visibility = 0.268;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// One of the four <111> bond directions, written with explicit signs.
struct MillerIndex {
  int h = 1, k = 1, l = 1;
};

struct DefectFrame {
  Vec3 x, y, z;  // orthonormal; z is the symmetry axis
};

inline DefectFrame defect_frame(const MillerIndex& m) {
  if (std::abs(m.h) != 1 || std::abs(m.k) != 1 || std::abs(m.l) != 1)
    throw std::invalid_argument("orientation indices must each be +1 or -1");
  const double h = m.h, k = m.k, l = m.l;
  const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
  DefectFrame f;
  f.z = {h / s3, k / s3, l / s3};
  f.x = {h / s6, k / s6, -2.0 * l / s6};
  f.y = cross(f.z, f.x);
  return f;
}

enum class DipoleAxis { x, y, z };

// In-plane components after projecting onto the (001) surface, expressed in
// the u = [110]/sqrt2, v = [-110]/sqrt2 basis the polarizer sweeps through.
struct ProjectedDipole {
  double u = 0.0, v = 0.0;
};

inline ProjectedDipole project_dipole(const DefectFrame& f, DipoleAxis axis) {
  const Vec3& d = axis == DipoleAxis::x ? f.x : axis == DipoleAxis::y ? f.y : f.z;
  constexpr double inv_s2 = 0.7071067811865476;
  return {(d.x + d.y) * inv_s2, (d.y - d.x) * inv_s2};
}

struct WeightedDipole {
  ProjectedDipole p;
  double weight = 1.0;
};

namespace detail_pol {

// 2x2 symmetric form M = sum_i w_i p_i p_i^T; I(theta) = e(theta)^T M e(theta)
struct Form {
  double uu = 0.0, uv = 0.0, vv = 0.0;
};

inline Form form_of(std::span<const WeightedDipole> dipoles) {
  Form m;
  for (const auto& d : dipoles) {
    if (!(d.weight >= 0.0)) throw std::invalid_argument("dipole weights must be >= 0");
    m.uu += d.weight * d.p.u * d.p.u;
    m.uv += d.weight * d.p.u * d.p.v;
    m.vv += d.weight * d.p.v * d.p.v;
  }
  return m;
}

}  // namespace detail_pol

inline double polar_intensity_curve(std::span<const WeightedDipole> dipoles, double theta_deg) {
  const auto m = detail_pol::form_of(dipoles);
  const double t = theta_deg * 0.017453292519943295;
  const double c = std::cos(t), s = std::sin(t);
  return m.uu * c * c + 2.0 * m.uv * c * s + m.vv * s * s;
}

// Visibility of the ideal polar curve: (Imax - Imin)/(Imax + Imin), from the
// eigenvalues of the quadratic form.
inline double model_visibility(std::span<const WeightedDipole> dipoles) {
  const auto m = detail_pol::form_of(dipoles);
  const double tr = m.uu + m.vv;
  if (!(tr > 0.0)) throw std::invalid_argument("visibility needs a nonzero dipole set");
  const double d = std::sqrt((m.uu - m.vv) * (m.uu - m.vv) + 4.0 * m.uv * m.uv);
  return d / tr;
}

struct PolarizationSample {
  double angle_deg = 0.0;
  double intensity = 0.0;
};

struct PolarizationSeries {
  std::vector<PolarizationSample> samples;
  std::string label;
};

inline PolarizationSeries make_polarization_series(std::vector<PolarizationSample> samples,
                                                   std::string label = {}) {
  if (samples.size() < 4)
    throw std::invalid_argument("polarization series needs >= 4 samples, got " +
                                std::to_string(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.angle_deg) || !std::isfinite(s.intensity) || s.intensity < 0.0)
      throw std::invalid_argument("polarization row " + std::to_string(i + 1) +
                                  ": intensity must be finite and >= 0");
    if (i > 0 && !(s.angle_deg > samples[i - 1].angle_deg))
      throw std::invalid_argument("polarization row " + std::to_string(i + 1) +
                                  ": angles must be strictly increasing");
  }
  if (samples.back().angle_deg - samples.front().angle_deg < 180.0)
    throw std::invalid_argument("polarization series must span at least 180 degrees");
  PolarizationSeries out;
  out.samples = std::move(samples);
  out.label = std::move(label);
  return out;
}

// CSV schema: header "angle_deg,intensity".
inline PolarizationSeries load_polarization_series(std::string_view csv_text,
                                                   std::string label = {}) {
  const auto rows = read_two_column_csv(csv_text, "angle_deg", "intensity");
  std::vector<PolarizationSample> samples;
  samples.reserve(rows.size());
  for (const auto& r : rows) samples.push_back({r[0], r[1]});
  return make_polarization_series(std::move(samples), std::move(label));
}

struct PolarizationFit {
  double amplitude = 0.0;  // A in A cos^2(theta - theta0) + C
  double amplitude_err = 0.0;
  double offset = 0.0;  // C
  double offset_err = 0.0;
  double theta0_deg = 0.0;  // normalized to [0, 180)
  double theta0_err_deg = 0.0;
  double visibility = 0.0;  // A/(A + 2C)
  double visibility_err = 0.0;
  FitResult engine;
};

inline PolarizationFit fit_polarization(const PolarizationSeries& series,
                                        const FitOptions& opt = {}) {
  const auto& ss = series.samples;
  double imin = 1e300, imax = -1e300, arg_max = 0.0;
  for (const auto& s : ss) {
    if (s.intensity < imin) imin = s.intensity;
    if (s.intensity > imax) {
      imax = s.intensity;
      arg_max = s.angle_deg;
    }
  }

  FitProblem prob;
  prob.model = [](std::span<const double> p, double theta) {
    const double c = std::cos((theta - p[2]) * 0.017453292519943295);
    return p[0] * c * c + p[1];
  };
  for (const auto& s : ss) prob.data.push_back({s.angle_deg, s.intensity, 1.0});
  const double a0 = std::max(imax - imin, 1e-9);
  const double c0 = std::max(imin, 1e-9 * imax + 1e-300);
  prob.params = {{"amplitude", a0, Transform::log_positive},
                 {"offset", std::max(c0, a0 * 1e-6), Transform::log_positive},
                 {"theta0", arg_max, Transform::free, 0, 1, 10.0}};

  PolarizationFit out;
  out.engine = fit(prob, opt);
  const auto& r = out.engine;
  out.amplitude = r.params[0];
  out.offset = r.params[1];
  double t0 = std::fmod(r.params[2], 180.0);
  if (t0 < 0.0) t0 += 180.0;
  out.theta0_deg = t0;
  const double a = out.amplitude, c = out.offset;
  out.visibility = a / (a + 2.0 * c);
  if (r.errors_defined) {
    out.amplitude_err = r.std_errors[0];
    out.offset_err = r.std_errors[1];
    out.theta0_err_deg = r.std_errors[2];
    const double denom = (a + 2.0 * c) * (a + 2.0 * c);
    const std::size_t idx[] = {0, 1};
    const double grad[] = {2.0 * c / denom, -2.0 * a / denom};
    out.visibility_err = std::sqrt(propagate_variance(r.covariance, idx, grad));
  }
  return out;
}

// Angle between two polarization axes, folded into [0, 90] degrees since an
// axis is headless.
inline double orthogonality_deg(double theta_a_deg, double theta_b_deg) {
  double d = std::fmod(std::abs(theta_a_deg - theta_b_deg), 180.0);
  return std::min(d, 180.0 - d);
}

}  // namespace zplkit
