#pragma once

// Damped least-squares (Levenberg-Marquardt) fitting with numeric Jacobians,
// smooth parameter transforms for positivity/box constraints, and
// covariance-based uncertainties. Every fit in the library runs through
// this engine, so results are deterministic functions of (data, options).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zplkit/linalg.hpp"

namespace zplkit {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Transform {
  free,          // unconstrained
  log_positive,  // parameter = exp(u), stays strictly positive
  bounded,       // parameter = lo + (hi-lo)*sigmoid(u), stays in (lo, hi)
};

struct ParamSpec {
  std::string name;
  double init = 0.0;
  Transform transform = Transform::free;
  double lower = 0.0;  // bounded only
  double upper = 1.0;  // bounded only
  double scale = 1.0;  // finite-difference scale hint for small |value|
};

struct DataPoint {
  double x = 0.0;
  double y = 0.0;
  double weight = 1.0;
};

using ModelFn = std::function<double(std::span<const double>, double)>;

struct FitProblem {
  ModelFn model;
  std::vector<DataPoint> data;
  std::vector<ParamSpec> params;
};

struct FitOptions {
  double rel_tol = 1e-10;   // relative cost decrease considered converged
  double grad_tol = 1e-10;  // max |gradient| considered converged
  int max_iter = 200;
  double damping_init_scale = 1e-3;  // lambda0 = scale * max diag(J^T J)
};

struct FitResult {
  std::vector<double> params;      // natural (untransformed) space
  std::vector<double> std_errors;  // sqrt(diag covariance); empty when undefined
  Matrix covariance;               // natural space
  double cost = 0.0;               // sum of squared weighted residuals
  int n_iter = 0;
  bool converged = false;
  bool rank_deficient = false;
  bool errors_defined = false;  // false when residual dof < 1
  std::vector<double> residuals;
  std::vector<double> cost_trace;  // cost after each accepted step
};

namespace detail_fit {

inline std::string format_params(const std::vector<double>& p) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << "]";
  return os.str();
}

inline double to_internal(const ParamSpec& s, double p) {
  switch (s.transform) {
    case Transform::free:
      return p;
    case Transform::log_positive:
      if (!(p > 0.0))
        throw FitError("parameter '" + s.name + "' must start > 0 for log transform, got " +
                       std::to_string(p));
      return std::log(p);
    case Transform::bounded: {
      if (!(s.lower < s.upper))
        throw FitError("parameter '" + s.name + "' has an empty bound interval");
      if (!(p > s.lower && p < s.upper))
        throw FitError("parameter '" + s.name + "' must start strictly inside (" +
                       std::to_string(s.lower) + ", " + std::to_string(s.upper) + "), got " +
                       std::to_string(p));
      const double t = (p - s.lower) / (s.upper - s.lower);
      return std::log(t / (1.0 - t));
    }
  }
  return p;
}

inline double to_natural(const ParamSpec& s, double u) {
  switch (s.transform) {
    case Transform::free:
      return u;
    case Transform::log_positive:
      return std::exp(u);
    case Transform::bounded: {
      const double sig = 1.0 / (1.0 + std::exp(-u));
      return s.lower + (s.upper - s.lower) * sig;
    }
  }
  return u;
}

inline double dnatural_du(const ParamSpec& s, double u) {
  switch (s.transform) {
    case Transform::free:
      return 1.0;
    case Transform::log_positive:
      return std::exp(u);
    case Transform::bounded: {
      const double sig = 1.0 / (1.0 + std::exp(-u));
      return (s.upper - s.lower) * sig * (1.0 - sig);
    }
  }
  return 1.0;
}

}  // namespace detail_fit

// Central-difference Jacobian of model predictions with respect to natural
// parameters; step = max(|p|, scale_hint) * cbrt(machine epsilon).
inline Matrix numeric_jacobian(const ModelFn& model, std::span<const double> params,
                               std::span<const double> xs, std::span<const double> scales = {}) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  Matrix jac(xs.size(), params.size());
  std::vector<double> p(params.begin(), params.end());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double scale = j < scales.size() ? scales[j] : 1.0;
    const double h = h0 * std::max(std::abs(params[j]), scale);
    p[j] = params[j] + h;
    std::vector<double> up(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) up[i] = model(p, xs[i]);
    p[j] = params[j] - h;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double down = model(p, xs[i]);
      const double d = (up[i] - down) / (2.0 * h);
      if (!std::isfinite(d))
        throw FitError("numeric_jacobian: non-finite derivative for parameter " +
                       std::to_string(j) + " at parameters " + detail_fit::format_params(p));
      jac(i, j) = d;
    }
    p[j] = params[j];
  }
  return jac;
}

namespace detail_fit {

// Residuals r_i = sqrt(w_i) * (model(p, x_i) - y_i); nullopt on non-finite.
inline std::optional<std::vector<double>> residuals_at(const FitProblem& prob,
                                                       const std::vector<double>& p) {
  std::vector<double> r(prob.data.size());
  for (std::size_t i = 0; i < prob.data.size(); ++i) {
    const auto& d = prob.data[i];
    const double m = prob.model(p, d.x);
    if (!std::isfinite(m)) return std::nullopt;
    r[i] = std::sqrt(d.weight) * (m - d.y);
  }
  return r;
}

inline double cost_of(const std::vector<double>& r) {
  double c = 0.0;
  for (double v : r) c += v * v;
  return c;
}

// Jacobian of weighted residuals with respect to the internal coordinates.
// Free parameters are stepped in natural space exactly as numeric_jacobian
// does; transformed parameters are stepped in their internal coordinate so
// trial evaluations always stay inside the parameter domain.
inline Matrix jacobian_internal(const FitProblem& prob, const std::vector<double>& u) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  const std::size_t n = prob.data.size(), np = u.size();
  Matrix jac(n, np);
  std::vector<double> ut = u;
  std::vector<double> pt(np);
  auto natural = [&](const std::vector<double>& uu, std::vector<double>& pp) {
    for (std::size_t j = 0; j < np; ++j) pp[j] = to_natural(prob.params[j], uu[j]);
  };
  for (std::size_t j = 0; j < np; ++j) {
    const bool is_free = prob.params[j].transform == Transform::free;
    const double scale = is_free ? prob.params[j].scale : 1.0;
    const double h = h0 * std::max(std::abs(u[j]), scale);
    ut[j] = u[j] + h;
    natural(ut, pt);
    std::vector<double> up(n);
    for (std::size_t i = 0; i < n; ++i) up[i] = prob.model(pt, prob.data[i].x);
    ut[j] = u[j] - h;
    natural(ut, pt);
    for (std::size_t i = 0; i < n; ++i) {
      const double down = prob.model(pt, prob.data[i].x);
      const double d = std::sqrt(prob.data[i].weight) * (up[i] - down) / (2.0 * h);
      if (!std::isfinite(d)) {
        natural(ut, pt);
        throw FitError("fit: non-finite model output while differentiating parameter '" +
                       prob.params[j].name + "' at parameters " + format_params(pt));
      }
      jac(i, j) = d;
    }
    ut[j] = u[j];
  }
  return jac;
}

}  // namespace detail_fit

inline FitResult fit(const FitProblem& prob, const FitOptions& opt = {}) {
  using namespace detail_fit;
  if (!prob.model) throw FitError("fit: no model function supplied");
  if (prob.data.empty()) throw FitError("fit: empty data set");
  if (prob.params.empty()) throw FitError("fit: no parameters to fit");
  for (const auto& d : prob.data)
    if (!std::isfinite(d.x) || !std::isfinite(d.y) || !std::isfinite(d.weight) || d.weight < 0.0)
      throw FitError("fit: data contains non-finite values or negative weights");

  const std::size_t np = prob.params.size();
  std::vector<double> u(np), p(np);
  for (std::size_t j = 0; j < np; ++j) u[j] = to_internal(prob.params[j], prob.params[j].init);
  auto natural_of = [&](const std::vector<double>& uu) {
    std::vector<double> pp(np);
    for (std::size_t j = 0; j < np; ++j) pp[j] = to_natural(prob.params[j], uu[j]);
    return pp;
  };

  p = natural_of(u);
  auto r_opt = residuals_at(prob, p);
  if (!r_opt)
    throw FitError("fit: model returned a non-finite value at the initial parameters " +
                   format_params(p));
  std::vector<double> r = *r_opt;
  double cost = cost_of(r);

  FitResult res;
  res.cost_trace.push_back(cost);
  double lambda = -1.0;  // set from the first J^T J
  bool converged = false;
  int iter = 0;
  Matrix jac;

  while (iter < opt.max_iter) {
    ++iter;
    jac = jacobian_internal(prob, u);
    const Matrix a = normal_matrix(jac);
    const std::vector<double> g = mul_transposed(jac, r);

    double gmax = 0.0, dmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    for (std::size_t j = 0; j < np; ++j) dmax = std::max(dmax, a(j, j));
    if (gmax < opt.grad_tol) {
      converged = true;
      break;
    }
    if (lambda < 0.0) lambda = opt.damping_init_scale * (dmax > 0.0 ? dmax : 1.0);

    bool accepted = false;
    const double prev_cost = cost;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Matrix damped = a;
      for (std::size_t j = 0; j < np; ++j) damped(j, j) += lambda;
      std::vector<double> neg_g(np), delta;
      for (std::size_t j = 0; j < np; ++j) neg_g[j] = -g[j];
      if (!cholesky_solve(damped, neg_g, delta)) {
        lambda = std::max(lambda * 2.0, 1e-300);
        continue;
      }
      std::vector<double> u_try(np);
      for (std::size_t j = 0; j < np; ++j) u_try[j] = u[j] + delta[j];
      const std::vector<double> p_try = natural_of(u_try);
      const auto r_try = residuals_at(prob, p_try);
      if (!r_try) {  // trial left the model's domain; damp harder
        lambda *= 2.0;
        continue;
      }
      const double cost_try = cost_of(*r_try);
      if (cost_try <= cost) {
        u = u_try;
        r = *r_try;
        cost = cost_try;
        lambda = std::max(lambda / 3.0, 1e-300);
        res.cost_trace.push_back(cost);
        accepted = true;
        break;
      }
      lambda *= 2.0;
    }
    if (!accepted) break;  // no damping value yields progress; report best-so-far
    if (cost == 0.0 || prev_cost - cost <= opt.rel_tol * prev_cost) {
      converged = true;
      break;
    }
  }

  p = natural_of(u);
  res.params = p;
  res.cost = cost;
  res.n_iter = iter;
  res.converged = converged;
  res.residuals = r;

  // Covariance in natural space: D (J_u^T J_u)^+ D * s^2 with D = d(natural)/d(internal).
  // The normal matrix is equilibrated (unit diagonal) before pseudo-inversion
  // so wildly different parameter scales do not masquerade as rank deficiency.
  jac = jacobian_internal(prob, u);
  Matrix a = normal_matrix(jac);
  const std::size_t n = prob.data.size();
  res.errors_defined = n > np;
  std::vector<double> eq(np, 1.0);
  for (std::size_t j = 0; j < np; ++j)
    if (a(j, j) > 0.0) eq[j] = 1.0 / std::sqrt(a(j, j));
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < np; ++j) a(i, j) *= eq[i] * eq[j];
  Matrix cov_u = pseudo_inverse_sym(a, res.rank_deficient);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < np; ++j) cov_u(i, j) *= eq[i] * eq[j];
  res.covariance = Matrix(np, np);
  if (res.errors_defined) {
    const double s2 = cost / static_cast<double>(n - np);
    res.std_errors.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
      const double di = dnatural_du(prob.params[i], u[i]);
      for (std::size_t j = 0; j < np; ++j) {
        const double dj = dnatural_du(prob.params[j], u[j]);
        res.covariance(i, j) = di * cov_u(i, j) * dj * s2;
      }
      res.std_errors[i] = std::sqrt(std::max(res.covariance(i, i), 0.0));
    }
  }
  return res;
}

// Optional Poisson weighting for count data: weight = 1/max(y, 1).
inline void apply_poisson_weights(FitProblem& prob) {
  for (auto& d : prob.data) d.weight = 1.0 / std::max(d.y, 1.0);
}

// Variance of a scalar function of the fitted parameters by the delta
// method: grad^T Cov grad over the given parameter indices.
inline double propagate_variance(const Matrix& cov, std::span<const std::size_t> idx,
                                 std::span<const double> grad) {
  double v = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) v += grad[i] * cov(idx[i], idx[j]) * grad[j];
  return std::max(v, 0.0);
}

}  // namespace zplkit
