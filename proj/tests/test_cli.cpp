#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "zplkit/photostats.hpp"
#include "zplkit/spectra.hpp"
#include "zplkit/thermal.hpp"
#include "zplkit/units.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(ZPLKIT_BIN) + " " + args;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = std::move(out);
  return r;
}

fs::path scratch_dir() {
  const fs::path p = fs::path("cli_scratch");
  fs::create_directories(p);
  return p;
}

std::string path_str(const fs::path& p) { return p.string(); }

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  REQUIRE(f.good());
  f << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_report(const fs::path& p) { return json::parse(read_file(p)); }

std::string strip_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.find("\"generated_at\"") == std::string::npos) out << line << "\n";
  return out.str();
}

fs::path make_g2_fixture(const std::string& name, double c, double b, double tau1,
                         double tau2) {
  std::ostringstream csv;
  csv << "tau_ns,g2\n";
  char row[64];
  for (double t = -150.0; t <= 150.0 + 1e-9; t += 1.0) {
    const double g = zplkit::g2_model(t, {c, b, tau1, tau2});
    std::snprintf(row, sizeof row, "%.17g,%.17g\n", t, g);
    csv << row;
  }
  const fs::path p = scratch_dir() / name;
  write_file(p, csv.str());
  return p;
}

fs::path make_spectrum_fixture(const std::string& name) {
  std::ostringstream csv;
  csv << "wavelength_nm,counts\n";
  const double raman = zplkit::raman_line(zplkit::WavelengthNm(515.0)).value;
  char row[64];
  for (double wl = 546.0; wl <= 558.0 + 1e-9; wl += 0.02) {
    double y = 120.0;
    y += zplkit::peak_profile(zplkit::PeakShape::lorentzian, wl, 550.0, 0.10, 4200.0, 0.0);
    y += zplkit::peak_profile(zplkit::PeakShape::lorentzian, wl, 554.0, 0.12, 2600.0, 0.0);
    y += zplkit::peak_profile(zplkit::PeakShape::lorentzian, wl, raman, 0.06, 900.0, 0.0);
    std::snprintf(row, sizeof row, "%.10f,%.10f\n", wl, y);
    csv << row;
  }
  const fs::path p = scratch_dir() / name;
  write_file(p, csv.str());
  return p;
}

const char* sim_config_json =
    "{\n"
    "  \"k_exc_per_ns\": 0.03,\n"
    "  \"k_rad_per_ns\": 0.26,\n"
    "  \"k_sh_per_ns\": 0.013,\n"
    "  \"k_des_per_ns\": 0.01,\n"
    "  \"detection_efficiency\": 0.8,\n"
    "  \"background_per_ns\": 0.002\n"
    "}\n";

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("--version").code == 0);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("fit-g2").code == 2);             // missing positional
  CHECK(run_cli("no-such-command").code == 2);
  CHECK(run_cli("fit-temperature x.csv").code == 2);  // --mode is required
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("validation errors exit with code 3") {
  const fs::path bad = scratch_dir() / "bad_header.csv";
  write_file(bad, "delay,g2\n0,1\n1,1\n");
  CHECK(run_cli("fit-g2 " + path_str(bad)).code == 3);
  CHECK(run_cli("fit-g2 " + path_str(scratch_dir() / "missing.csv")).code == 3);
  const auto g2csv = make_g2_fixture("valid_for_rho.csv", 0.9, 0.2, 3.7, 40.0);
  CHECK(run_cli("fit-g2 " + path_str(g2csv) + " --rho 1.5").code == 3);
  CHECK(run_cli("fit-g2 " + path_str(g2csv) + " --rho 0.9 --signal 5 --background 1").code == 3);
  CHECK(run_cli("phonon equiv-temp --species nv").code == 3);
  CHECK(run_cli("phonon equiv-temp --delta-ghz 80 --ref snv").code == 3);
}

TEST_CASE("fit-g2 report round trip") {
  const auto csv = make_g2_fixture("g2_clean.csv", 0.9, 0.2, 3.7, 40.0);
  const fs::path rep_path = scratch_dir() / "g2_clean.json";

  SECTION("uncorrected fit recovers the generating parameters") {
    const auto r = run_cli("fit-g2 " + path_str(csv) + " --low-power --out " +
                           path_str(rep_path));
    REQUIRE(r.code == 0);
    const auto rep = read_report(rep_path);
    CHECK(rep["schema_version"] == 1);
    CHECK(rep["tool"] == "zplkit");
    CHECK(rep["command"] == "fit-g2");
    CHECK(rep["inputs"].size() == 1);
    CHECK(rep["inputs"][0]["fnv1a64"].get<std::string>().size() == 16);
    CHECK_THAT(rep["parameters"]["c"]["value"].get<double>(), WithinRel(0.9, 1e-5));
    CHECK_THAT(rep["parameters"]["tau1_ns"]["value"].get<double>(), WithinRel(3.7, 1e-5));
    CHECK_THAT(rep["parameters"]["tau2_ns"]["value"].get<double>(), WithinRel(40.0, 1e-4));
    CHECK_THAT(rep["derived"]["g2_zero"].get<double>(), WithinAbs(0.1, 1e-5));
    CHECK(rep["derived"]["rho"] == 1.0);
    CHECK(rep["derived"]["emitter_count"]["n_int"] == 1);
    CHECK(rep["derived"]["single_emitter"] == true);
    CHECK_THAT(rep["derived"]["lifetime_ns"]["value"].get<double>(), WithinRel(3.7, 1e-5));
    CHECK(rep["convergence"]["converged"] == true);
    // uncorrected runs carry a warning saying so
    bool warned = false;
    for (const auto& w : rep["warnings"])
      if (w.get<std::string>().find("uncorrected") != std::string::npos) warned = true;
    CHECK(warned);
  }

  SECTION("background correction rescales the dip depth") {
    const auto r = run_cli("fit-g2 " + path_str(csv) + " --rho 0.9 --out " +
                           path_str(rep_path));
    REQUIRE(r.code == 0);
    const auto rep = read_report(rep_path);
    // correcting model data with rho scales c by 1/rho^2 and leaves taus alone
    CHECK_THAT(rep["parameters"]["c"]["value"].get<double>(), WithinRel(0.9 / 0.81, 1e-5));
    CHECK_THAT(rep["parameters"]["tau1_ns"]["value"].get<double>(), WithinRel(3.7, 1e-4));
    CHECK(rep["derived"]["rho"] == 0.9);
  }

  SECTION("signal and background rates define the same correction") {
    const auto r = run_cli("fit-g2 " + path_str(csv) + " --signal 9 --background 1 --out " +
                           path_str(rep_path));
    REQUIRE(r.code == 0);
    const auto rep = read_report(rep_path);
    CHECK_THAT(rep["derived"]["rho"].get<double>(), WithinRel(0.9, 1e-12));
  }
}

TEST_CASE("report bytes are stable apart from the timestamp") {
  const auto csv = make_g2_fixture("g2_golden.csv", 0.85, 0.15, 4.2, 55.0);
  const fs::path a = scratch_dir() / "golden_a.json";
  const fs::path b = scratch_dir() / "golden_b.json";
  REQUIRE(run_cli("fit-g2 " + path_str(csv) + " --rho 0.95 --out " + path_str(a)).code == 0);
  REQUIRE(run_cli("fit-g2 " + path_str(csv) + " --rho 0.95 --out " + path_str(b)).code == 0);
  CHECK(strip_timestamp(read_file(a)) == strip_timestamp(read_file(b)));
}

TEST_CASE("non-convergence exits 4 but still writes the report") {
  const auto csv = make_g2_fixture("g2_starved.csv", 0.9, 0.2, 3.7, 40.0);
  const fs::path rep_path = scratch_dir() / "starved.json";
  const auto r = run_cli("fit-g2 " + path_str(csv) + " --max-iter 1 --out " +
                         path_str(rep_path));
  CHECK(r.code == 4);
  const auto rep = read_report(rep_path);
  CHECK(rep["convergence"]["converged"] == false);
  bool warned = false;
  for (const auto& w : rep["warnings"])
    if (w.get<std::string>().find("converge") != std::string::npos) warned = true;
  CHECK(warned);
}

TEST_CASE("fit-spectrum finds the doublet and excludes the Raman line") {
  const auto csv = make_spectrum_fixture("spectrum.csv");
  const fs::path rep_path = scratch_dir() / "spectrum.json";
  const fs::path svg_path = scratch_dir() / "spectrum.svg";
  const fs::path curve_path = scratch_dir() / "spectrum_curve.csv";
  const auto r = run_cli("fit-spectrum " + path_str(csv) +
                         " --excitation-nm 515 --out " + path_str(rep_path) + " --plot " +
                         path_str(svg_path) + " --plot-data " + path_str(curve_path));
  REQUIRE(r.code == 0);
  const auto rep = read_report(rep_path);
  REQUIRE(rep["derived"]["doublets"].size() == 1);
  const auto& d = rep["derived"]["doublets"][0];
  CHECK_THAT(d["c_center_nm"].get<double>(), WithinAbs(550.0, 0.01));
  CHECK_THAT(d["d_center_nm"].get<double>(), WithinAbs(554.0, 0.01));
  const double split = d["splitting_ghz"]["value"].get<double>();
  CHECK((split > 3860.0 && split < 3960.0));
  CHECK(rep["derived"].contains("excluded_raman_center_nm"));
  CHECK_THAT(rep["derived"]["raman_prediction_nm"].get<double>(),
             WithinAbs(552.945171, 1e-3));

  // plot artifacts
  const std::string svg = read_file(svg_path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(rep["plot_grid"]["n_samples"] == 256);
  std::istringstream curve(read_file(curve_path));
  std::string line;
  int rows = 0;
  std::getline(curve, line);
  CHECK(line == "x,y");
  while (std::getline(curve, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 256);
}

TEST_CASE("fit-temperature reports the linewidth law") {
  std::ostringstream csv;
  csv << "temperature_k,value\n";
  const zplkit::LinewidthParams truth{60.0, 6.875e-5};
  char row[64];
  for (double t : {5.7, 20.0, 50.0, 100.0, 150.0, 200.0, 263.0}) {
    std::snprintf(row, sizeof row, "%.10g,%.10g\n", t, zplkit::linewidth_model(t, truth));
    csv << row;
  }
  const fs::path p = scratch_dir() / "linewidth.csv";
  write_file(p, csv.str());
  const fs::path rep_path = scratch_dir() / "linewidth.json";
  const auto r =
      run_cli("fit-temperature " + path_str(p) + " --mode linewidth --out " + path_str(rep_path));
  REQUIRE(r.code == 0);
  const auto rep = read_report(rep_path);
  CHECK_THAT(rep["parameters"]["w0_ghz"]["value"].get<double>(), WithinRel(60.0, 1e-5));
  CHECK_THAT(rep["parameters"]["a3_ghz_per_k3"]["value"].get<double>(),
             WithinRel(6.875e-5, 1e-4));
}

TEST_CASE("fit-saturation subtracts the measured background") {
  std::ostringstream total, bg;
  total << "power_mw,intensity_kcps\n";
  bg << "power_mw,intensity_kcps\n";
  char row[64];
  for (double p : {0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8}) {
    const double sat = zplkit::saturation_model(p, {222.0, 1.8});
    std::snprintf(row, sizeof row, "%.10g,%.10g\n", p, sat + 3.5 * p);
    total << row;
    std::snprintf(row, sizeof row, "%.10g,%.10g\n", p, 3.5 * p);
    bg << row;
  }
  const fs::path pt = scratch_dir() / "sat_total.csv";
  const fs::path pb = scratch_dir() / "sat_bg.csv";
  write_file(pt, total.str());
  write_file(pb, bg.str());
  const fs::path rep_path = scratch_dir() / "sat.json";
  const auto r = run_cli("fit-saturation " + path_str(pt) + " --background " + path_str(pb) +
                         " --out " + path_str(rep_path));
  REQUIRE(r.code == 0);
  const auto rep = read_report(rep_path);
  CHECK(rep["derived"]["background_corrected"] == true);
  CHECK_THAT(rep["parameters"]["i_inf_kcps"]["value"].get<double>(), WithinRel(222.0, 1e-4));
  CHECK_THAT(rep["parameters"]["p_sat_mw"]["value"].get<double>(), WithinRel(1.8, 1e-4));
  CHECK_THAT(rep["derived"]["background_slope_kcps_per_mw"].get<double>(),
             WithinRel(3.5, 1e-6));
  CHECK(rep["inputs"].size() == 2);
}

TEST_CASE("polarization fit pairs two branches") {
  auto make_scan = [](const std::string& name, double a, double c, double theta0) {
    std::ostringstream csv;
    csv << "angle_deg,intensity\n";
    char row[64];
    for (double t = 0.0; t <= 355.0 + 1e-9; t += 5.0) {
      const double co = std::cos((t - theta0) * 0.017453292519943295);
      std::snprintf(row, sizeof row, "%.10g,%.10g\n", t, a * co * co + c);
      csv << row;
    }
    const fs::path p = scratch_dir() / name;
    write_file(p, csv.str());
    return p;
  };
  const auto pa = make_scan("pol_c.csv", 1.0, 0.02, 30.0);
  const auto pb = make_scan("pol_d.csv", 0.8, 0.05, 120.0);
  const fs::path rep_path = scratch_dir() / "pol.json";
  const auto r = run_cli("polarization fit " + path_str(pa) + " " + path_str(pb) + " --out " +
                         path_str(rep_path));
  REQUIRE(r.code == 0);
  const auto rep = read_report(rep_path);
  REQUIRE(rep["parameters"]["series"].size() == 2);
  CHECK_THAT(rep["parameters"]["series"][0]["visibility"]["value"].get<double>(),
             WithinRel(1.0 / 1.04, 1e-5));
  CHECK_THAT(rep["derived"]["orthogonality_deg"].get<double>(), WithinAbs(90.0, 1e-4));
  CHECK_THAT(rep["derived"]["reference_visibility"].get<double>(), WithinRel(0.268, 1e-12));
}

TEST_CASE("polarization predict reports projections and visibility") {
  const fs::path rep_path = scratch_dir() / "predict.json";
  const auto r = run_cli("polarization predict --dipole z --out " + path_str(rep_path));
  REQUIRE(r.code == 0);
  const auto rep = read_report(rep_path);
  CHECK_THAT(rep["derived"]["visibility"].get<double>(), WithinRel(1.0, 1e-12));
  CHECK_THAT(rep["derived"]["projected_dipoles"][0]["u"].get<double>(),
             WithinAbs(0.8165, 5e-5));

  const auto r2 = run_cli("polarization predict --dipole xy --out " + path_str(rep_path));
  REQUIRE(r2.code == 0);
  const auto rep2 = read_report(rep_path);
  CHECK_THAT(rep2["derived"]["visibility"].get<double>(), WithinRel(0.5, 1e-12));
  CHECK(run_cli("polarization predict --dipole q").code == 3);
  CHECK(run_cli("polarization predict --orientation 1,2,1").code == 3);
}

TEST_CASE("phonon table and equivalent temperature") {
  const fs::path rep_path = scratch_dir() / "phonon.json";
  const auto r = run_cli("phonon table --out " + path_str(rep_path));
  REQUIRE(r.code == 0);
  const auto rep = read_report(rep_path);
  REQUIRE(rep["derived"]["rows"].size() == 5);
  const auto& siv2 = rep["derived"]["rows"][1];
  CHECK(siv2["species"] == "SiV-II");
  CHECK_THAT(siv2["normalized_rate"][1].get<double>(), WithinRel(1.0, 1e-12));
  const auto& pbv = rep["derived"]["rows"][4];
  CHECK(pbv["normalized_rate"][1].get<double>() < 1e-50);
  const double teq = pbv["equivalent_temperature_k"].get<double>();
  CHECK((teq > 8.0 && teq < 9.0));

  const fs::path rep2 = scratch_dir() / "equiv.json";
  REQUIRE(run_cli("phonon equiv-temp --species snv --out " + path_str(rep2)).code == 0);
  CHECK_THAT(read_report(rep2)["derived"]["equivalent_temperature_k"].get<double>(),
             WithinRel(2.44447806666488, 1e-9));
  REQUIRE(run_cli("phonon equiv-temp --delta-ghz 3878 --ref 80@0.4 --out " + path_str(rep2))
              .code == 0);
  CHECK_THAT(read_report(rep2)["derived"]["equivalent_temperature_k"].get<double>(),
             WithinRel(8.76181508450095, 1e-9));
}

TEST_CASE("simulate g2 feeds straight into fit-g2") {
  const fs::path cfg = scratch_dir() / "emitter.json";
  write_file(cfg, sim_config_json);
  const fs::path hist_path = scratch_dir() / "sim_hist.csv";
  const fs::path sim_rep = scratch_dir() / "sim.json";
  const auto r = run_cli("simulate g2 --config " + path_str(cfg) +
                         " --seed 99 --duration-ns 2e6 --bin-ns 1 --max-delay-ns 150 "
                         "--data-out " +
                         path_str(hist_path) + " --out " + path_str(sim_rep));
  REQUIRE(r.code == 0);
  const auto rep = read_report(sim_rep);
  CHECK(rep["derived"]["clicks"].get<long long>() > 10000);
  const double rho = rep["derived"]["suggested_rho"].get<double>();
  CHECK((rho > 0.8 && rho < 1.0));

  // determinism across runs
  const fs::path hist2 = scratch_dir() / "sim_hist2.csv";
  REQUIRE(run_cli("simulate g2 --config " + path_str(cfg) +
                  " --seed 99 --duration-ns 2e6 --bin-ns 1 --max-delay-ns 150 --data-out " +
                  path_str(hist2) + " --out " + path_str(sim_rep))
              .code == 0);
  CHECK(read_file(hist_path) == read_file(hist2));

  const fs::path fit_rep = scratch_dir() / "sim_fit.json";
  char rho_arg[32];
  std::snprintf(rho_arg, sizeof rho_arg, "%.6f", rho);
  const auto rf = run_cli("fit-g2 " + path_str(hist_path) + " --rho " + rho_arg + " --out " +
                          path_str(fit_rep));
  REQUIRE(rf.code == 0);
  const auto frep = read_report(fit_rep);
  CHECK_THAT(frep["parameters"]["tau1_ns"]["value"].get<double>(),
             WithinRel(1.0 / (0.03 + 0.26 + 0.013), 0.3));
  CHECK(frep["derived"]["g2_zero"].get<double>() < 0.3);
}

TEST_CASE("simulate saturation feeds straight into fit-saturation") {
  const fs::path cfg = scratch_dir() / "emitter2.json";
  write_file(cfg, "{\"k_exc_per_ns\": 0.01, \"k_rad_per_ns\": 0.25, "
                  "\"detection_efficiency\": 0.7}");
  const fs::path data = scratch_dir() / "sim_sat.csv";
  const auto r = run_cli("simulate saturation --config " + path_str(cfg) +
                         " --sigma-per-mw 0.05 --duration-ns 1e6 --seed 5 --data-out " +
                         path_str(data) + " --out " + path_str(scratch_dir() / "sim_sat.json"));
  REQUIRE(r.code == 0);
  const fs::path rep_path = scratch_dir() / "sim_sat_fit.json";
  REQUIRE(run_cli("fit-saturation " + path_str(data) + " --out " + path_str(rep_path)).code ==
          0);
  const auto rep = read_report(rep_path);
  CHECK_THAT(rep["parameters"]["i_inf_kcps"]["value"].get<double>(),
             WithinRel(0.7 * 0.25 * zplkit::kcps_per_count_per_ns, 0.1));
  CHECK_THAT(rep["parameters"]["p_sat_mw"]["value"].get<double>(), WithinRel(0.25 / 0.05, 0.15));
}

TEST_CASE("simulate stream writes loadable timestamps") {
  const fs::path cfg = scratch_dir() / "emitter3.json";
  write_file(cfg, sim_config_json);
  const fs::path data = scratch_dir() / "stream.csv";
  const auto r = run_cli("simulate stream --config " + path_str(cfg) +
                         " --duration-ns 1e5 --seed 3 --data-out " + path_str(data) + " --out " +
                         path_str(scratch_dir() / "stream.json"));
  REQUIRE(r.code == 0);
  const auto stamps = zplkit::read_single_column_csv(read_file(data), "timestamp_ns");
  CHECK(stamps.size() > 100);
  CHECK(std::is_sorted(stamps.begin(), stamps.end()));
}

TEST_CASE("defaults file override via environment") {
  const auto csv = make_spectrum_fixture("spectrum_env.csv");
  const fs::path rep_path = scratch_dir() / "env.json";

  // shifting the Raman wavenumber moves the predicted line
  const fs::path defaults_path = scratch_dir() / "defaults.json";
  write_file(defaults_path, "{\"raman_shift_inv_cm\": 1400.0}");
  const std::string cmd = "ZPLKIT_DEFAULTS=" + path_str(defaults_path) + " " +
                          std::string(ZPLKIT_BIN) + " fit-spectrum " + path_str(csv) +
                          " --excitation-nm 515 --candidates 550,554 --out " +
                          path_str(rep_path);
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto rep = read_report(rep_path);
  const double predicted = rep["derived"]["raman_prediction_nm"].get<double>();
  CHECK(predicted > 554.0);  // larger shift pushes the line further red

  // unknown keys are rejected
  write_file(defaults_path, "{\"raman_shift_inv_ms\": 1400.0}");
  const int bad = std::system((cmd + " 2>/dev/null").c_str());
  CHECK(WEXITSTATUS(bad) == 3);
}
