// zplkit: command-line front end for the analysis library. Every command
// reads CSV/JSON inputs, runs one analysis, and writes a JSON report that is
// byte-stable apart from its timestamp.
//
// Exit codes: 0 success, 2 usage error, 3 invalid input, 4 fit did not
// converge (a report is still written with converged = false).

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "zplkit/defaults.hpp"
#include "zplkit/emitter_sim.hpp"
#include "zplkit/phonon.hpp"
#include "zplkit/photostats.hpp"
#include "zplkit/polarization.hpp"
#include "zplkit/report.hpp"
#include "zplkit/spectra.hpp"
#include "zplkit/svg.hpp"
#include "zplkit/thermal.hpp"
#include "zplkit/units.hpp"

using nlohmann::ordered_json;

namespace {

struct IoOpts {
  std::string out;        // report JSON path; stdout when empty
  std::string plot;       // SVG path
  std::string plot_data;  // sampled-curve CSV path
};

void add_io(CLI::App* cmd, IoOpts& io, bool with_plot = true) {
  cmd->add_option("--out", io.out, "write the JSON report here instead of stdout");
  if (with_plot) {
    cmd->add_option("--plot", io.plot, "write an SVG quick-look plot");
    cmd->add_option("--plot-data", io.plot_data, "write the sampled fit curve as CSV");
  }
}

void emit_report(const ordered_json& rep, const std::string& out_path) {
  const std::string text = rep.dump(2) + "\n";
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw std::runtime_error("cannot write report: " + out_path);
  f << text;
}

ordered_json convergence_block(const zplkit::FitResult& r) {
  return {{"converged", r.converged},
          {"iterations", r.n_iter},
          {"cost", r.cost},
          {"rank_deficient", r.rank_deficient}};
}

int finish_fit_report(ordered_json& rep, const zplkit::FitResult& engine, const IoOpts& io) {
  rep["convergence"] = convergence_block(engine);
  if (!engine.converged)
    rep["warnings"].push_back("fit did not converge; parameters are best-effort");
  emit_report(rep, io.out);
  return engine.converged ? 0 : 4;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("cannot parse ") + what + " entry '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument(std::string(what) + " list is empty");
  return out;
}

void write_rows_csv(const std::string& path, const char* header,
                    const std::vector<std::array<double, 2>>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f << header << "\n";
  char buf[80];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r[0], r[1]);
    f << buf;
  }
}

// Samples the fitted model over [x_min, x_max], writes the requested plot
// outputs, and records the sampling grid in the report.
void attach_curve(ordered_json& rep, const IoOpts& io, const std::vector<double>& dx,
                  const std::vector<double>& dy, const std::function<double(double)>& model,
                  int n_samples, const std::string& title, const std::string& x_label,
                  const std::string& y_label) {
  if (io.plot.empty() && io.plot_data.empty()) return;
  const double xmin = *std::min_element(dx.begin(), dx.end());
  const double xmax = *std::max_element(dx.begin(), dx.end());
  std::vector<double> gx(n_samples), gy(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    gx[i] = xmin + (xmax - xmin) * i / (n_samples - 1.0);
    gy[i] = model(gx[i]);
  }
  if (!io.plot_data.empty()) {
    std::vector<std::array<double, 2>> rows(gx.size());
    for (std::size_t i = 0; i < gx.size(); ++i) rows[i] = {gx[i], gy[i]};
    write_rows_csv(io.plot_data, "x,y", rows);
    rep["plot_data_file"] = io.plot_data;
  }
  if (!io.plot.empty()) {
    zplkit::write_svg_plot(io.plot, {{dx, dy, "#cc6677", false}, {gx, gy, "#4477aa", true}},
                           title, x_label, y_label);
    rep["plot"] = io.plot;
  }
  rep["plot_grid"] = {{"x_min", xmin}, {"x_max", xmax}, {"n_samples", n_samples}};
}

zplkit::FitOptions fit_options(int max_iter) {
  zplkit::FitOptions o;
  if (max_iter > 0) o.max_iter = max_iter;
  return o;
}

// ---------------------------------------------------------------- spectrum

struct SpectrumArgs {
  std::string path;
  std::string candidates;
  zplkit::PeakShape shape = zplkit::PeakShape::lorentzian;
  double excitation_nm = 0.0;
  int n_doublets = 1;
  int max_iter = 0;
  IoOpts io;
};

int run_fit_spectrum(const SpectrumArgs& a, const zplkit::Defaults& defs) {
  const std::string text = zplkit::read_text_file(a.path);
  const auto spectrum = zplkit::parse_spectrum(text, a.path);

  std::vector<double> candidates;
  if (!a.candidates.empty())
    candidates = parse_double_list(a.candidates, "candidate");
  else
    candidates = zplkit::detect_peaks(spectrum);
  if (candidates.empty())
    throw std::invalid_argument("no peaks detected; pass --candidates explicitly");

  std::optional<double> excitation;
  if (a.excitation_nm > 0.0) excitation = a.excitation_nm;
  zplkit::DoubletOptions opt;
  opt.raman_shift_inv_cm = defs.raman_shift_inv_cm;
  opt.raman_window_nm = defs.raman_window_nm;
  opt.fit = fit_options(a.max_iter);

  const auto res = zplkit::fit_doublet(spectrum, candidates, a.shape, excitation, a.n_doublets, opt);

  auto rep = zplkit::base_report("fit-spectrum");
  zplkit::add_input(rep, a.path, text);
  rep["parameters"]["shape"] = zplkit::to_string(a.shape);
  rep["parameters"]["baseline"] =
      zplkit::value_with_error(res.peaks.front().baseline, res.peaks.front().baseline_err);
  auto peaks = ordered_json::array();
  for (const auto& p : res.peaks) {
    ordered_json jp;
    jp["center_nm"] = zplkit::value_with_error(p.center_nm, p.center_err_nm);
    jp["fwhm_nm"] = zplkit::value_with_error(p.fwhm_nm, p.fwhm_err_nm);
    jp["fwhm_ghz"] = zplkit::value_with_error(p.fwhm_ghz, p.fwhm_err_ghz);
    jp["amplitude"] = zplkit::value_with_error(p.amplitude, p.amplitude_err);
    if (a.shape == zplkit::PeakShape::pseudo_voigt)
      jp["eta"] = zplkit::value_with_error(p.eta, p.eta_err);
    peaks.push_back(jp);
  }
  rep["parameters"]["peaks"] = peaks;

  auto doublets = ordered_json::array();
  for (const auto& d : res.doublets) {
    ordered_json jd;
    jd["c_center_nm"] = d.c_peak.center_nm;
    jd["d_center_nm"] = d.d_peak.center_nm;
    jd["splitting_ghz"] = zplkit::value_with_error(d.splitting_ghz, d.splitting_err_ghz);
    doublets.push_back(jd);
  }
  rep["derived"]["doublets"] = doublets;
  if (res.raman_prediction_nm) rep["derived"]["raman_prediction_nm"] = *res.raman_prediction_nm;
  if (res.excluded_raman) {
    rep["derived"]["excluded_raman_center_nm"] = res.excluded_raman->center_nm;
    rep["warnings"].push_back("one fitted peak was assigned to the diamond Raman line");
  }

  std::vector<double> dx, dy;
  for (const auto& p : spectrum.points) {
    dx.push_back(p.wavelength_nm);
    dy.push_back(p.counts);
  }
  const auto model = [&res, shape = a.shape](double x) {
    double y = res.peaks.front().baseline;
    for (const auto& p : res.peaks)
      y += zplkit::peak_profile(shape, x, p.center_nm, p.fwhm_nm, p.amplitude, p.eta);
    return y;
  };
  attach_curve(rep, a.io, dx, dy, model, defs.plot_samples, "fit-spectrum",
               "wavelength (nm)", "counts");
  return finish_fit_report(rep, res.engine, a.io);
}

// ------------------------------------------------------------- temperature

struct TemperatureArgs {
  std::string path;
  zplkit::ThermalMode mode = zplkit::ThermalMode::linewidth;
  int max_iter = 0;
  IoOpts io;
};

int run_fit_temperature(const TemperatureArgs& a, const zplkit::Defaults& defs) {
  const std::string text = zplkit::read_text_file(a.path);
  const auto series = zplkit::load_thermal_series(text, a.mode);

  auto rep = zplkit::base_report("fit-temperature");
  zplkit::add_input(rep, a.path, text);

  std::vector<double> dx, dy;
  for (const auto& p : series.points) {
    dx.push_back(p.temperature_k);
    dy.push_back(p.value);
  }

  const zplkit::FitResult* engine = nullptr;
  std::function<double(double)> model;
  std::string y_label;
  zplkit::LinewidthFit lw;
  zplkit::ShiftFit sh;
  if (a.mode == zplkit::ThermalMode::linewidth) {
    lw = zplkit::fit_linewidth_series(series, fit_options(a.max_iter));
    rep["parameters"]["mode"] = "linewidth";
    rep["parameters"]["w0_ghz"] = zplkit::value_with_error(lw.params.w0_ghz, lw.errors.w0_ghz);
    rep["parameters"]["a3_ghz_per_k3"] =
        zplkit::value_with_error(lw.params.a3_ghz_per_k3, lw.errors.a3_ghz_per_k3);
    engine = &lw.engine;
    model = [p = lw.params](double t) { return zplkit::linewidth_model(t, p); };
    y_label = "FWHM (GHz)";
  } else {
    sh = zplkit::fit_shift_series(series, fit_options(a.max_iter));
    rep["parameters"]["mode"] = "shift";
    rep["parameters"]["lambda0_nm"] =
        zplkit::value_with_error(sh.params.lambda0_nm, sh.errors.lambda0_nm);
    rep["parameters"]["b2_nm_per_k2"] =
        zplkit::value_with_error(sh.params.b2_nm_per_k2, sh.errors.b2_nm_per_k2);
    rep["parameters"]["b4_nm_per_k4"] =
        zplkit::value_with_error(sh.params.b4_nm_per_k4, sh.errors.b4_nm_per_k4);
    engine = &sh.engine;
    model = [p = sh.params](double t) { return zplkit::shift_model(t, p); };
    y_label = "center (nm)";
  }
  rep["derived"]["n_points"] = series.points.size();
  rep["derived"]["t_min_k"] = dx.front();
  rep["derived"]["t_max_k"] = dx.back();
  attach_curve(rep, a.io, dx, dy, model, defs.plot_samples, "fit-temperature",
               "temperature (K)", y_label);
  return finish_fit_report(rep, *engine, a.io);
}

// --------------------------------------------------------------------- g2

struct G2Args {
  std::string path;
  double rho = 0.0;
  double signal = 0.0;
  double background = -1.0;
  bool low_power = false;
  int max_iter = 0;
  IoOpts io;
};

int run_fit_g2(const G2Args& a, const zplkit::Defaults& defs) {
  const std::string text = zplkit::read_text_file(a.path);
  const auto raw = zplkit::load_g2_histogram(text);

  auto rep = zplkit::base_report("fit-g2");
  zplkit::add_input(rep, a.path, text);

  double rho = 1.0;
  if (a.rho > 0.0 && (a.signal > 0.0 || a.background >= 0.0))
    throw std::invalid_argument("pass either --rho or --signal/--background, not both");
  if (a.rho > 0.0) {
    rho = a.rho;
  } else if (a.signal > 0.0) {
    if (a.background < 0.0)
      throw std::invalid_argument("--signal requires --background");
    rho = zplkit::signal_fraction(a.signal, a.background);
  } else {
    rep["warnings"].push_back("no signal fraction given; histogram used uncorrected");
  }

  const auto corrected = zplkit::correct_g2_background(raw, rho);
  if (corrected.strongly_negative)
    rep["warnings"].push_back(
        "background correction drove bins below -0.1; check the signal fraction");

  const auto fit = zplkit::fit_g2(corrected.histogram, fit_options(a.max_iter));

  rep["parameters"]["c"] = zplkit::value_with_error(fit.params.c, fit.errors.c);
  rep["parameters"]["b"] = zplkit::value_with_error(fit.params.b, fit.errors.b);
  rep["parameters"]["tau1_ns"] = zplkit::value_with_error(fit.params.tau1_ns, fit.errors.tau1_ns);
  rep["parameters"]["tau2_ns"] = zplkit::value_with_error(fit.params.tau2_ns, fit.errors.tau2_ns);

  rep["derived"]["rho"] = rho;
  rep["derived"]["g2_zero"] = fit.g2_zero;
  rep["derived"]["no_antibunching"] = fit.no_antibunching;
  rep["derived"]["shoulder"] = fit.shoulder;
  if (fit.no_antibunching) {
    rep["warnings"].push_back("histogram never dips below one; no antibunching present");
  } else if (fit.g2_zero < 1.0) {
    const auto count = zplkit::emitter_count(fit.g2_zero);
    rep["derived"]["emitter_count"] = {
        {"n_real", count.n_real}, {"n_int", count.n_int}, {"margin", count.margin}};
    if (fit.g2_zero < 0.5) rep["derived"]["single_emitter"] = true;
  }
  if (a.low_power)
    // at vanishing pump power the antibunching time approaches the excited
    // state lifetime
    rep["derived"]["lifetime_ns"] =
        zplkit::value_with_error(fit.params.tau1_ns, fit.errors.tau1_ns);

  std::vector<double> dx, dy;
  for (const auto& b : corrected.histogram.bins) {
    dx.push_back(b.tau_ns);
    dy.push_back(b.g2);
  }
  const auto model = [p = fit.params](double tau) { return zplkit::g2_model(tau, p); };
  attach_curve(rep, a.io, dx, dy, model, defs.plot_samples, "fit-g2", "delay (ns)",
               "g2");
  return finish_fit_report(rep, fit.engine, a.io);
}

// ------------------------------------------------------------- saturation

struct SaturationArgs {
  std::string path;
  std::string background_path;
  int max_iter = 0;
  IoOpts io;
};

int run_fit_saturation(const SaturationArgs& a, const zplkit::Defaults& defs) {
  const std::string text = zplkit::read_text_file(a.path);
  const auto total = zplkit::load_saturation_series(text);

  auto rep = zplkit::base_report("fit-saturation");
  zplkit::add_input(rep, a.path, text);

  std::optional<zplkit::SaturationSeries> background;
  std::string bg_text;
  if (!a.background_path.empty()) {
    bg_text = zplkit::read_text_file(a.background_path);
    background = zplkit::load_saturation_series(bg_text, zplkit::SaturationKind::background);
    zplkit::add_input(rep, a.background_path, bg_text);
  }

  const auto out = zplkit::fit_saturation(total, background, fit_options(a.max_iter));

  rep["parameters"]["i_inf_kcps"] =
      zplkit::value_with_error(out.params.i_inf_kcps, out.errors.i_inf_kcps);
  rep["parameters"]["p_sat_mw"] =
      zplkit::value_with_error(out.params.p_sat_mw, out.errors.p_sat_mw);
  rep["derived"]["background_corrected"] = out.background_corrected;
  if (out.background_corrected) {
    rep["derived"]["background_slope_kcps_per_mw"] = out.background_slope_kcps_per_mw;
    rep["derived"]["raw_i_inf_kcps"] =
        zplkit::value_with_error(out.raw_params.i_inf_kcps, out.raw_errors.i_inf_kcps);
    rep["derived"]["raw_p_sat_mw"] =
        zplkit::value_with_error(out.raw_params.p_sat_mw, out.raw_errors.p_sat_mw);
    for (std::size_t row : out.negative_corrected_rows)
      rep["warnings"].push_back("corrected intensity negative at row " + std::to_string(row) +
                                "; point excluded from the fit");
  }

  // plot the series the reported parameters describe
  std::vector<double> dx, dy;
  for (std::size_t i = 0; i < total.points.size(); ++i) {
    dx.push_back(total.points[i].power_mw);
    double v = total.points[i].intensity_kcps;
    if (out.background_corrected)
      v = std::max(0.0, v - out.background_slope_kcps_per_mw * total.points[i].power_mw);
    dy.push_back(v);
  }
  const auto model = [p = out.params](double x) { return zplkit::saturation_model(x, p); };
  attach_curve(rep, a.io, dx, dy, model, defs.plot_samples, "fit-saturation",
               "power (mW)", "intensity (kcps)");
  return finish_fit_report(rep, out.engine, a.io);
}

// ------------------------------------------------------------ polarization

struct PolFitArgs {
  std::vector<std::string> paths;
  int max_iter = 0;
  IoOpts io;
};

int run_polarization_fit(const PolFitArgs& a, const zplkit::Defaults& defs) {
  auto rep = zplkit::base_report("polarization-fit");
  std::vector<zplkit::PolarizationSeries> series;
  for (const auto& p : a.paths) {
    const std::string text = zplkit::read_text_file(p);
    series.push_back(zplkit::load_polarization_series(text, p));
    zplkit::add_input(rep, p, text);
  }

  std::vector<zplkit::PolarizationFit> fits;
  auto jser = ordered_json::array();
  bool all_converged = true;
  for (const auto& s : series) {
    const auto f = zplkit::fit_polarization(s, fit_options(a.max_iter));
    ordered_json js;
    js["input"] = s.label;
    js["amplitude"] = zplkit::value_with_error(f.amplitude, f.amplitude_err);
    js["offset"] = zplkit::value_with_error(f.offset, f.offset_err);
    js["theta0_deg"] = zplkit::value_with_error(f.theta0_deg, f.theta0_err_deg);
    js["visibility"] = zplkit::value_with_error(f.visibility, f.visibility_err);
    js["convergence"] = convergence_block(f.engine);
    all_converged = all_converged && f.engine.converged;
    jser.push_back(js);
    fits.push_back(f);
  }
  rep["parameters"]["series"] = jser;
  rep["derived"]["reference_visibility"] = zplkit::reference_visibility;
  if (fits.size() == 2)
    rep["derived"]["orthogonality_deg"] =
        zplkit::orthogonality_deg(fits[0].theta0_deg, fits[1].theta0_deg);

  if (!a.io.plot.empty() || !a.io.plot_data.empty()) {
    std::vector<zplkit::PlotSeries> plot;
    const char* colors[] = {"#cc6677", "#4477aa", "#ddaa33", "#228833"};
    std::vector<std::array<double, 2>> curve_rows;
    for (std::size_t k = 0; k < series.size(); ++k) {
      std::vector<double> dx, dy;
      for (const auto& s : series[k].samples) {
        dx.push_back(s.angle_deg);
        dy.push_back(s.intensity);
      }
      plot.push_back({dx, dy, colors[(2 * k) % 4], false});
      const double xmin = dx.front(), xmax = dx.back();
      std::vector<double> gx(defs.plot_samples), gy(defs.plot_samples);
      for (int i = 0; i < defs.plot_samples; ++i) {
        gx[i] = xmin + (xmax - xmin) * i / (defs.plot_samples - 1.0);
        const double c = std::cos((gx[i] - fits[k].theta0_deg) * 0.017453292519943295);
        gy[i] = fits[k].amplitude * c * c + fits[k].offset;
      }
      plot.push_back({gx, gy, colors[(2 * k + 1) % 4], true});
      if (k == 0) {
        curve_rows.resize(gx.size());
        for (std::size_t i = 0; i < gx.size(); ++i) curve_rows[i] = {gx[i], gy[i]};
        rep["plot_grid"] = {{"x_min", xmin}, {"x_max", xmax}, {"n_samples", defs.plot_samples}};
      }
    }
    if (!a.io.plot.empty()) {
      zplkit::write_svg_plot(a.io.plot, plot, "polarization", "angle (deg)", "intensity");
      rep["plot"] = a.io.plot;
    }
    if (!a.io.plot_data.empty()) {
      write_rows_csv(a.io.plot_data, "x,y", curve_rows);
      rep["plot_data_file"] = a.io.plot_data;
    }
  }

  ordered_json conv = convergence_block(fits.front().engine);
  conv["converged"] = all_converged;
  rep["convergence"] = conv;
  if (!all_converged)
    rep["warnings"].push_back("fit did not converge; parameters are best-effort");
  emit_report(rep, a.io.out);
  return all_converged ? 0 : 4;
}

struct PolPredictArgs {
  std::string dipole = "z";
  std::string orientation = "1,1,1";
  IoOpts io;
};

int run_polarization_predict(const PolPredictArgs& a, const zplkit::Defaults& defs) {
  const auto idx = parse_double_list(a.orientation, "orientation");
  if (idx.size() != 3) throw std::invalid_argument("--orientation needs three entries");
  zplkit::MillerIndex m{static_cast<int>(idx[0]), static_cast<int>(idx[1]),
                        static_cast<int>(idx[2])};
  const auto frame = zplkit::defect_frame(m);

  std::vector<zplkit::WeightedDipole> dipoles;
  if (a.dipole == "z") {
    dipoles.push_back({zplkit::project_dipole(frame, zplkit::DipoleAxis::z), 1.0});
  } else if (a.dipole == "xy") {
    dipoles.push_back({zplkit::project_dipole(frame, zplkit::DipoleAxis::x), 1.0});
    dipoles.push_back({zplkit::project_dipole(frame, zplkit::DipoleAxis::y), 1.0});
  } else {
    throw std::invalid_argument("--dipole must be 'z' or 'xy'");
  }

  auto rep = zplkit::base_report("polarization-predict");
  rep["parameters"]["dipole"] = a.dipole;
  rep["parameters"]["orientation"] = {m.h, m.k, m.l};

  auto jd = ordered_json::array();
  for (const auto& d : dipoles)
    jd.push_back({{"u", d.p.u}, {"v", d.p.v}, {"weight", d.weight}});
  rep["derived"]["projected_dipoles"] = jd;
  rep["derived"]["visibility"] = zplkit::model_visibility(dipoles);
  rep["derived"]["reference_visibility"] = zplkit::reference_visibility;

  if (!a.io.plot.empty() || !a.io.plot_data.empty()) {
    std::vector<double> gx(defs.plot_samples), gy(defs.plot_samples);
    for (int i = 0; i < defs.plot_samples; ++i) {
      gx[i] = 360.0 * i / (defs.plot_samples - 1.0);
      gy[i] = zplkit::polar_intensity_curve(dipoles, gx[i]);
    }
    if (!a.io.plot.empty()) {
      zplkit::write_svg_plot(a.io.plot, {{gx, gy, "#4477aa", true}}, "polarization-predict",
                             "angle (deg)", "intensity");
      rep["plot"] = a.io.plot;
    }
    if (!a.io.plot_data.empty()) {
      std::vector<std::array<double, 2>> rows(gx.size());
      for (std::size_t i = 0; i < gx.size(); ++i) rows[i] = {gx[i], gy[i]};
      write_rows_csv(a.io.plot_data, "x,y", rows);
      rep["plot_data_file"] = a.io.plot_data;
    }
    rep["plot_grid"] = {{"x_min", 0.0}, {"x_max", 360.0}, {"n_samples", defs.plot_samples}};
  }
  emit_report(rep, a.io.out);
  return 0;
}

// ------------------------------------------------------------------ phonon

zplkit::RateReference parse_reference(const std::string& text, const zplkit::Defaults& defs,
                                      const std::vector<zplkit::CenterSpecies>& table) {
  zplkit::RateReference ref{defs.reference_delta_ghz, defs.reference_temperature_k};
  if (text.empty()) return ref;
  const std::size_t at = text.find('@');
  if (at == std::string::npos)
    throw std::invalid_argument("--ref must look like '<species-or-GHz>@<kelvin>'");
  const std::string left = text.substr(0, at), right = text.substr(at + 1);
  if (const auto* sp = zplkit::find_species(table, left)) {
    ref.delta_ghz = sp->delta_gs_ghz;
  } else {
    try {
      ref.delta_ghz = std::stod(left);
    } catch (const std::exception&) {
      throw std::invalid_argument("unknown reference species '" + left + "'");
    }
  }
  try {
    ref.temperature_k = std::stod(right);
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot parse reference temperature '" + right + "'");
  }
  return ref;
}

std::vector<zplkit::CenterSpecies> species_from_file(const std::string& path,
                                                     std::string* content_out) {
  const std::string text = zplkit::read_text_file(path);
  if (content_out != nullptr) *content_out = text;
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_array()) throw std::invalid_argument("species file must hold a JSON array");
  std::vector<zplkit::CenterSpecies> out;
  for (const auto& e : j) {
    zplkit::CenterSpecies s;
    s.name = e.at("name").get<std::string>();
    s.delta_gs_ghz = e.at("delta_gs_ghz").get<double>();
    if (e.contains("delta_es_ghz")) s.delta_es_ghz = e["delta_es_ghz"].get<double>();
    if (e.contains("source")) s.source = e["source"].get<std::string>();
    if (e.contains("aliases"))
      for (const auto& al : e["aliases"]) s.aliases.push_back(al.get<std::string>());
    if (!(s.delta_gs_ghz > 0.0))
      throw std::invalid_argument("species '" + s.name + "': delta_gs_ghz must be > 0");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::invalid_argument("species file holds no entries");
  return out;
}

struct PhononTableArgs {
  std::string species_path;
  std::string grid;
  std::string ref;
  IoOpts io;
};

int run_phonon_table(const PhononTableArgs& a, const zplkit::Defaults& defs) {
  auto rep = zplkit::base_report("phonon-table");
  auto species = zplkit::default_species();
  if (!a.species_path.empty()) {
    std::string content;
    species = species_from_file(a.species_path, &content);
    zplkit::add_input(rep, a.species_path, content);
  }
  std::vector<double> grid = {0.1, 0.4, 1.0, 2.0, 4.0, 10.0, 40.0, 100.0, 300.0};
  if (!a.grid.empty()) grid = parse_double_list(a.grid, "grid");
  const auto ref = parse_reference(a.ref, defs, species);

  const auto table = zplkit::rate_table(species, grid, ref);
  rep["parameters"]["reference"] = {{"delta_ghz", ref.delta_ghz},
                                    {"temperature_k", ref.temperature_k}};
  rep["parameters"]["temperatures_k"] = table.temperatures_k;
  auto rows = ordered_json::array();
  for (const auto& r : table.rows) {
    ordered_json jr;
    jr["species"] = r.species;
    jr["delta_gs_ghz"] = r.delta_gs_ghz;
    jr["normalized_rate"] = r.normalized;
    jr["equivalent_temperature_k"] = r.equivalent_temperature_k;
    rows.push_back(jr);
  }
  rep["derived"]["rows"] = rows;
  auto sources = ordered_json::array();
  for (const auto& s : species) sources.push_back({{"species", s.name}, {"source", s.source}});
  rep["derived"]["sources"] = sources;
  emit_report(rep, a.io.out);
  return 0;
}

struct EquivTempArgs {
  double delta_ghz = 0.0;
  std::string species;
  std::string ref;
  IoOpts io;
};

int run_equiv_temp(const EquivTempArgs& a, const zplkit::Defaults& defs) {
  const auto table = zplkit::default_species();
  double delta = a.delta_ghz;
  std::string label;
  if (!a.species.empty()) {
    if (delta > 0.0)
      throw std::invalid_argument("pass either --delta-ghz or --species, not both");
    const auto* sp = zplkit::find_species(table, a.species);
    if (sp == nullptr) throw std::invalid_argument("unknown species '" + a.species + "'");
    delta = sp->delta_gs_ghz;
    label = sp->name;
  }
  if (!(delta > 0.0)) throw std::invalid_argument("need --delta-ghz > 0 or --species");
  const auto ref = parse_reference(a.ref, defs, table);

  auto rep = zplkit::base_report("phonon-equiv-temp");
  rep["parameters"]["delta_ghz"] = delta;
  if (!label.empty()) rep["parameters"]["species"] = label;
  rep["parameters"]["reference"] = {{"delta_ghz", ref.delta_ghz},
                                    {"temperature_k", ref.temperature_k}};
  rep["derived"]["equivalent_temperature_k"] = zplkit::equivalent_temperature(delta, ref);
  rep["derived"]["x_at_reference_temperature"] =
      zplkit::phonon_x(delta, ref.temperature_k);
  rep["derived"]["normalized_rate_at_reference_temperature"] =
      zplkit::normalized_rate(delta, ref.temperature_k, ref);
  emit_report(rep, a.io.out);
  return 0;
}

// ---------------------------------------------------------------- simulate

zplkit::EmitterRates rates_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("simulator config must hold a JSON object");
  zplkit::EmitterRates r;
  bool saw_exc = false, saw_rad = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "k_exc_per_ns") {
      r.k_exc_per_ns = value.get<double>();
      saw_exc = true;
    } else if (key == "k_rad_per_ns") {
      r.k_rad_per_ns = value.get<double>();
      saw_rad = true;
    } else if (key == "k_sh_per_ns")
      r.k_sh_per_ns = value.get<double>();
    else if (key == "k_des_per_ns")
      r.k_des_per_ns = value.get<double>();
    else if (key == "detection_efficiency")
      r.detection_efficiency = value.get<double>();
    else if (key == "background_per_ns")
      r.background_per_ns = value.get<double>();
    else if (key == "jitter_sigma_ns")
      r.jitter_sigma_ns = value.get<double>();
    else
      throw std::invalid_argument("unknown simulator config key: " + key);
  }
  if (!saw_exc || !saw_rad)
    throw std::invalid_argument("simulator config needs k_exc_per_ns and k_rad_per_ns");
  return r;
}

struct SimArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  double duration_ns = 1.0e6;
  double bin_ns = 0.0;        // g2 only; 0 -> default
  double max_delay_ns = 0.0;  // g2 only; 0 -> default
  std::string powers;         // saturation only
  double sigma_per_mw = 0.0;  // saturation only
  std::string data_out;       // CSV artifact
  IoOpts io;                  // report
};

int run_simulate(const std::string& kind, const SimArgs& a, const zplkit::Defaults& defs) {
  const std::string text = zplkit::read_text_file(a.config_path);
  const auto rates = rates_from_json(nlohmann::json::parse(text));
  if (a.data_out.empty()) throw std::invalid_argument("--data-out is required");

  auto rep = zplkit::base_report("simulate-" + kind);
  zplkit::add_input(rep, a.config_path, text);
  rep["parameters"]["seed"] = a.seed;
  rep["parameters"]["duration_ns"] = a.duration_ns;

  if (kind == "saturation") {
    if (!(a.sigma_per_mw > 0.0))
      throw std::invalid_argument("--sigma-per-mw must be > 0 for simulate saturation");
    const auto powers = parse_double_list(a.powers.empty() ? "0.5,1,2,4,8,16,32" : a.powers,
                                          "powers");
    std::vector<std::array<double, 2>> rows;
    std::uint64_t seed = a.seed;
    for (double p : powers) {
      if (!(p > 0.0)) throw std::invalid_argument("powers must be > 0");
      zplkit::EmitterRates rp = rates;
      rp.k_exc_per_ns = a.sigma_per_mw * p;
      const auto s = zplkit::simulate_click_stream(rp, a.duration_ns, seed++);
      rows.push_back({p, static_cast<double>(s.timestamps_ns.size()) / s.duration_ns *
                             zplkit::kcps_per_count_per_ns});
    }
    write_rows_csv(a.data_out, "power_mw,intensity_kcps", rows);
    rep["parameters"]["sigma_per_mw"] = a.sigma_per_mw;
    rep["derived"]["n_points"] = rows.size();
    rep["derived"]["predicted_i_inf_kcps"] =
        rates.detection_efficiency * rates.k_rad_per_ns * zplkit::kcps_per_count_per_ns;
    rep["derived"]["predicted_p_sat_mw"] = rates.k_rad_per_ns / a.sigma_per_mw;
    rep["derived"]["data_file"] = a.data_out;
    emit_report(rep, a.io.out);
    return 0;
  }

  const auto stream = zplkit::simulate_click_stream(rates, a.duration_ns, a.seed);
  const double total_rate = zplkit::steady_state_intensity(rates);
  rep["derived"]["clicks"] = stream.timestamps_ns.size();
  rep["derived"]["mean_rate_per_ns"] =
      static_cast<double>(stream.timestamps_ns.size()) / stream.duration_ns;
  rep["derived"]["steady_state_rate_per_ns"] = total_rate;
  if (rates.background_per_ns > 0.0 && total_rate > rates.background_per_ns)
    rep["derived"]["suggested_rho"] =
        zplkit::signal_fraction(total_rate - rates.background_per_ns, rates.background_per_ns);

  if (kind == "stream") {
    std::ofstream f(a.data_out);
    if (!f) throw std::runtime_error("cannot write: " + a.data_out);
    f << "timestamp_ns\n";
    char buf[40];
    for (double t : stream.timestamps_ns) {
      std::snprintf(buf, sizeof buf, "%.17g\n", t);
      f << buf;
    }
  } else {  // g2
    const double bin = a.bin_ns > 0.0 ? a.bin_ns : defs.g2_bin_width_ns;
    const double max_delay = a.max_delay_ns > 0.0 ? a.max_delay_ns : defs.g2_max_delay_ns;
    const auto hist = zplkit::coincidence_histogram(stream, bin, max_delay);
    std::vector<std::array<double, 2>> rows(hist.bins.size());
    for (std::size_t i = 0; i < hist.bins.size(); ++i)
      rows[i] = {hist.bins[i].tau_ns, hist.bins[i].g2};
    write_rows_csv(a.data_out, "tau_ns,g2", rows);
    rep["parameters"]["bin_width_ns"] = bin;
    rep["parameters"]["max_delay_ns"] = max_delay;
    rep["derived"]["n_bins"] = hist.bins.size();
  }
  rep["derived"]["data_file"] = a.data_out;
  emit_report(rep, a.io.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photophysics analysis for group-IV color centers in diamond"};
  app.set_version_flag("--version", zplkit::tool_version);
  app.require_subcommand(1);
  int rc = 0;

  zplkit::Defaults defs;

  SpectrumArgs sp_args;
  auto* sp = app.add_subcommand("fit-spectrum", "fit ZPL doublets in a wavelength spectrum");
  sp->add_option("csv", sp_args.path, "spectrum CSV (wavelength_nm,counts)")->required();
  sp->add_option("--candidates", sp_args.candidates,
                 "comma-separated candidate peak centers in nm (default: auto-detect)");
  const std::map<std::string, zplkit::PeakShape> shape_map{
      {"lorentzian", zplkit::PeakShape::lorentzian},
      {"gaussian", zplkit::PeakShape::gaussian},
      {"pseudo_voigt", zplkit::PeakShape::pseudo_voigt}};
  sp->add_option("--shape", sp_args.shape, "peak profile")
      ->transform(CLI::CheckedTransformer(shape_map, CLI::ignore_case));
  sp->add_option("--excitation-nm", sp_args.excitation_nm,
                 "excitation wavelength; enables Raman-line exclusion");
  sp->add_option("--doublets", sp_args.n_doublets, "number of C/D doublets to assign")
      ->check(CLI::PositiveNumber);
  sp->add_option("--max-iter", sp_args.max_iter, "cap on fit iterations");
  add_io(sp, sp_args.io);
  sp->callback([&]() { rc = run_fit_spectrum(sp_args, defs); });

  TemperatureArgs t_args;
  auto* ft = app.add_subcommand("fit-temperature",
                                "fit linewidth or center-shift temperature dependence");
  ft->add_option("csv", t_args.path, "series CSV (temperature_k,value)")->required();
  const std::map<std::string, zplkit::ThermalMode> mode_map{
      {"linewidth", zplkit::ThermalMode::linewidth}, {"shift", zplkit::ThermalMode::shift}};
  ft->add_option("--mode", t_args.mode, "series kind")
      ->required()
      ->transform(CLI::CheckedTransformer(mode_map, CLI::ignore_case));
  ft->add_option("--max-iter", t_args.max_iter, "cap on fit iterations");
  add_io(ft, t_args.io);
  ft->callback([&]() { rc = run_fit_temperature(t_args, defs); });

  G2Args g_args;
  auto* fg = app.add_subcommand("fit-g2", "fit an antibunching histogram");
  fg->add_option("csv", g_args.path, "histogram CSV (tau_ns,g2)")->required();
  fg->add_option("--rho", g_args.rho, "signal fraction S/(S+B) for background correction");
  fg->add_option("--signal", g_args.signal, "signal rate (same unit as --background)");
  fg->add_option("--background", g_args.background, "background rate");
  fg->add_flag("--low-power", g_args.low_power,
               "data taken far below saturation; report tau1 as the lifetime");
  fg->add_option("--max-iter", g_args.max_iter, "cap on fit iterations");
  add_io(fg, g_args.io);
  fg->callback([&]() { rc = run_fit_g2(g_args, defs); });

  SaturationArgs s_args;
  auto* fs = app.add_subcommand("fit-saturation", "fit a power saturation curve");
  fs->add_option("csv", s_args.path, "saturation CSV (power_mw,intensity_kcps)")->required();
  fs->add_option("--background", s_args.background_path,
                 "background-vs-power CSV subtracted as a line through the origin");
  fs->add_option("--max-iter", s_args.max_iter, "cap on fit iterations");
  add_io(fs, s_args.io);
  fs->callback([&]() { rc = run_fit_saturation(s_args, defs); });

  auto* pol = app.add_subcommand("polarization", "polarization analysis");
  pol->require_subcommand(1);
  PolFitArgs pf_args;
  auto* pf = pol->add_subcommand("fit", "fit cos^2 polar scans");
  pf->add_option("csv", pf_args.paths, "one or two scan CSVs (angle_deg,intensity)")
      ->required()
      ->expected(1, 2);
  pf->add_option("--max-iter", pf_args.max_iter, "cap on fit iterations");
  add_io(pf, pf_args.io);
  pf->callback([&]() { rc = run_polarization_fit(pf_args, defs); });
  PolPredictArgs pp_args;
  auto* pp = pol->add_subcommand("predict", "predict polar response from dipole geometry");
  pp->add_option("--dipole", pp_args.dipole, "'z' (axial) or 'xy' (transverse pair)");
  pp->add_option("--orientation", pp_args.orientation, "defect axis signs, e.g. '1,1,-1'");
  add_io(pp, pp_args.io);
  pp->callback([&]() { rc = run_polarization_predict(pp_args, defs); });

  auto* ph = app.add_subcommand("phonon", "orbital relaxation comparisons");
  ph->require_subcommand(1);
  PhononTableArgs pt_args;
  auto* pt = ph->add_subcommand("table", "normalized rates across species and temperatures");
  pt->add_option("--species", pt_args.species_path, "JSON file overriding the species table");
  pt->add_option("--grid", pt_args.grid, "comma-separated temperatures in K");
  pt->add_option("--ref", pt_args.ref, "reference as '<species-or-GHz>@<kelvin>'");
  add_io(pt, pt_args.io, false);
  pt->callback([&]() { rc = run_phonon_table(pt_args, defs); });
  EquivTempArgs et_args;
  auto* et = ph->add_subcommand("equiv-temp",
                                "temperature with relaxation equal to the reference");
  et->add_option("--delta-ghz", et_args.delta_ghz, "ground-state splitting in GHz");
  et->add_option("--species", et_args.species, "species name or alias from the table");
  et->add_option("--ref", et_args.ref, "reference as '<species-or-GHz>@<kelvin>'");
  add_io(et, et_args.io, false);
  et->callback([&]() { rc = run_equiv_temp(et_args, defs); });

  auto* sim = app.add_subcommand("simulate", "kinetic Monte Carlo emitter");
  sim->require_subcommand(1);
  SimArgs sim_args;
  std::string sim_kind;
  for (const char* kind : {"stream", "g2", "saturation"}) {
    auto* sc = sim->add_subcommand(
        kind, kind == std::string("stream")  ? "raw click timestamps"
              : kind == std::string("g2")    ? "coincidence histogram"
                                             : "intensity versus power");
    sc->add_option("--config", sim_args.config_path, "emitter rates JSON")->required();
    sc->add_option("--seed", sim_args.seed, "RNG seed");
    sc->add_option("--duration-ns", sim_args.duration_ns, "acquisition length per run");
    if (kind == std::string("g2")) {
      sc->add_option("--bin-ns", sim_args.bin_ns, "histogram bin width");
      sc->add_option("--max-delay-ns", sim_args.max_delay_ns, "histogram half range");
    }
    if (kind == std::string("saturation")) {
      sc->add_option("--powers", sim_args.powers, "comma-separated powers in mW");
      sc->add_option("--sigma-per-mw", sim_args.sigma_per_mw,
                     "pump rate per mW (k_exc = sigma * P)");
    }
    sc->add_option("--data-out", sim_args.data_out, "CSV artifact path")->required();
    add_io(sc, sim_args.io, false);
    sc->callback([&, kind]() {
      sim_kind = kind;
      rc = run_simulate(sim_kind, sim_args, defs);
    });
  }

  try {
    defs = zplkit::load_defaults();
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
