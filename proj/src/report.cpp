#include "nhsense/report.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>

#include "nhsense/measure.hpp"

namespace nhsense {

namespace {

using ordered = nlohmann::ordered_json;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double x, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string tick_label(double value, bool log_axis) {
  char buf[32];
  if (log_axis) std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(value)));
  else std::snprintf(buf, sizeof buf, "%.4g", value);
  return buf;
}

/// Evenly spaced "nice" tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi, bool log_axis) {
  std::vector<double> out;
  if (log_axis) {
    const int a = static_cast<int>(std::ceil(lo - 1e-9)), b = static_cast<int>(std::floor(hi + 1e-9));
    const int stride = std::max(1, (b - a) / 8 + 1);
    for (int k = a; k <= b; k += stride) out.push_back(k);
    return out;
  }
  const double raw = (hi - lo) / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

struct Artifacts {
  std::map<std::string, std::string> tables;  // file name -> CSV text
  std::map<std::string, Plot> plots;          // file name -> plot
  ordered results = ordered::object();
};

std::string yes_no(bool b) { return b ? "true" : "false"; }

std::string meta(const Scenario& s, const std::string& table, const ordered& extra = ordered::object()) {
  ordered m;
  m["table"] = table;
  m["scenario"] = ordered::parse(serialize_scenario(s));
  m["scenario"].erase("output");  // where the files went does not change what they contain
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m.dump();
}

ShiftOptions shift_options(const Scenario& s, unsigned threads) {
  ShiftOptions o;
  o.method = s.params.method;
  o.coarse_step = s.params.coarse_step_hz;
  o.fine_step = s.params.fine_step_hz;
  o.half_window = s.params.half_window_hz;
  o.noise_floor_db = s.params.noise_floor_db;
  o.threads = threads;
  return o;
}

double threshold_of(const Scenario& s) {
  return s.params.threshold > 0 ? s.params.threshold : default_range_threshold();
}

void run_spectrum(const Scenario& s, Artifacts& a) {
  const LatticeSpec& lat = *s.lattice;
  const Eigen::MatrixXcd H = build_hamiltonian(lat);
  const Spectrum sp = decompose_lattice_matrix(H, lat);
  const double zero_tol = 1e-9 * std::max(1.0, sp.matrix_norm);

  std::vector<std::vector<std::string>> rows;
  Series bulk{"eigenvalues", {}, {}, true}, zero{"zero modes", {}, {}, true};
  int zero_count = 0;
  for (Index i = 0; i < sp.size(); ++i) {
    const cplx e = sp.eigenvalues(i);
    const bool is_zero = std::abs(e) <= zero_tol;
    zero_count += is_zero;
    rows.push_back({std::to_string(i), format_number(e.real()), format_number(e.imag()),
                    format_number(sp.error_bound(i)), yes_no(is_zero)});
    (is_zero ? zero : bulk).x.push_back(e.real());
    (is_zero ? zero : bulk).y.push_back(e.imag());
  }
  a.results["dimension"] = sp.size();
  a.results["conditioning"] = to_string(sp.condition_flag);
  a.results["zero_modes"] = zero_count;
  a.results["zero_tolerance"] = zero_tol;
  a.tables["spectrum.csv"] = render_csv(meta(s, "spectrum", a.results), {"index", "re", "im", "error_bound", "zero_mode"}, rows);
  a.plots["spectrum.svg"] = {s.name + ": spectrum", "Re E", "Im E", false, false, {bulk, zero}};

  // Corner-mode site density: closed form when it exists, else the numerical mode nearest 0.
  ZeroMode mode;
  bool analytic = lat.intra_cell == 0.0 && lat.order >= 2 &&
                  std::all_of(lat.extent.begin(), lat.extent.end(), [](int x) { return x % 2 == 1; });
  if (analytic) mode = analytic_zero_mode(lat);
  else mode = numeric_zero_mode(sp, H);
  const SiteDensity dos = density_of_states(mode);
  std::vector<std::string> columns{"index"};
  for (int j = 1; j <= lat.order; ++j) columns.push_back("m" + std::to_string(j));
  columns.insert(columns.end(), {"sublattice", "weight"});
  std::vector<std::vector<std::string>> drows;
  Series diag{"weight", {}, {}, true};
  for (Index i = 0; i < dos.weights.size(); ++i) {
    const Site site = site_at(lat, i);
    std::vector<std::string> row{std::to_string(i)};
    for (int m : site.cell) row.push_back(std::to_string(m));
    row.push_back(std::to_string(site.sublattice));
    row.push_back(format_number(dos.weights(i)));
    drows.push_back(row);
    diag.x.push_back(static_cast<double>(i));
    diag.y.push_back(dos.weights(i));
  }
  a.results["density_source"] = analytic ? "analytic" : "numeric";
  a.tables["zero_mode_density.csv"] = render_csv(meta(s, "zero_mode_density"), columns, drows);
  a.plots["zero_mode_density.svg"] = {s.name + ": corner-mode density", "site index", "weight", false, true, {diag}};
}

void run_sensitivity(const Scenario& s, Artifacts& a, unsigned threads) {
  CurveOptions o;
  o.deviation_cap = s.params.deviation_cap;
  o.threads = threads;
  const auto curve = sensitivity_curve(*s.lattice, s.params.sizes, s.params.gammas, o);
  std::vector<std::vector<std::string>> rows;
  for (const auto& pt : curve)
    rows.push_back({std::to_string(pt.size), format_number(pt.gamma), format_number(pt.first_order),
                    format_number(pt.exact), yes_no(pt.reliable), yes_no(pt.saturated)});
  Plot plot{s.name + ": shift vs size", "L", "|dE|", false, true, {}};
  ordered onsets = ordered::array();
  for (double g : s.params.gammas) {
    Series first{"first order, G=" + format_number(g), {}, {}, false};
    Series exact{"exact, G=" + format_number(g), {}, {}, true};
    for (const auto& pt : curve)
      if (pt.gamma == g) {
        first.x.push_back(pt.size);
        first.y.push_back(pt.first_order);
        if (pt.reliable) {
          exact.x.push_back(pt.size);
          exact.y.push_back(pt.exact);
        }
      }
    plot.series.push_back(first);
    plot.series.push_back(exact);
    const auto onset = saturation_onset(curve, g);
    onsets.push_back({{"gamma", g}, {"onset", onset ? ordered(*onset) : ordered(nullptr)}});
  }
  a.results["saturation_onsets"] = onsets;
  a.tables["sensitivity.csv"] = render_csv(meta(s, "sensitivity", a.results),
                                           {"size", "gamma", "first_order", "exact", "reliable", "saturated"}, rows);
  a.plots["sensitivity.svg"] = plot;
}

void run_range(const Scenario& s, Artifacts& a) {
  const LatticeSpec& lat = *s.lattice;
  const double threshold = threshold_of(s);
  const auto range = measurement_range(lat, threshold, s.params.deviation_cap);
  a.results["lower"] = range.lower;
  a.results["upper"] = range.upper;
  a.results["upper_resolved"] = range.upper_resolved;
  a.results["threshold"] = threshold;
  a.results["deviation_cap"] = s.params.deviation_cap;
  a.results["decades"] = range.upper_resolved && range.upper > 0 ? std::log10(range.upper / range.lower) : 0.0;

  // Quarter-decade scan bracketing the range, for the plot.
  const double top = range.upper_resolved ? range.upper : range.lower * 1e12;
  const int lo = static_cast<int>(std::floor(std::log10(range.lower))) - 2;
  const int hi = static_cast<int>(std::ceil(std::log10(top))) + 2;
  std::vector<std::vector<std::string>> rows;
  Series first{"first order", {}, {}, false}, exact{"exact", {}, {}, true};
  for (int q = 4 * lo; q <= 4 * hi; ++q) {
    const double g = std::pow(10.0, q / 4.0);
    const auto pert = corner_to_corner(lat, g);
    const auto f = shift_first_order(lat, pert);
    const auto e = shift_exact(lat, pert);
    const bool reliable = e.flag != Conditioning::unreliable;
    rows.push_back({format_number(g), format_number(f.delta_e), format_number(e.delta_e), yes_no(reliable),
                    yes_no(g >= range.lower && g <= range.upper)});
    first.x.push_back(g);
    first.y.push_back(f.delta_e);
    if (reliable) {
      exact.x.push_back(g);
      exact.y.push_back(e.delta_e);
    }
  }
  a.tables["range.csv"] = render_csv(meta(s, "range", a.results),
                                     {"gamma", "first_order", "exact", "reliable", "in_range"}, rows);
  a.plots["range.svg"] = {s.name + ": measurement range", "gamma", "|dE|", true, true, {first, exact}};
}

CircuitGraph circuit_of(const Scenario& s, int units = 0, double ratio = 0.0) {
  CircuitParams p = with_ratio(*s.circuit, ratio);
  if (units > 0) p.units = units;
  return synthesize_circuit(p);
}

void run_skin(const Scenario& s, Artifacts& a, unsigned threads) {
  const auto g = circuit_of(s);
  const double f0 = extract_resonance(g, tracked_mode_frequency(g).frequency, shift_options(s, threads));
  DriveSpec drive;
  drive.node = drive_node(g);
  const auto at_f0 = boundary_profile(g, drive, f0);
  const auto at_f1 = boundary_profile(g, drive, s.params.f1_hz);
  bool monotone = true;
  for (std::size_t k = 1; k < at_f0.size(); ++k) monotone = monotone && at_f0[k] > at_f0[k - 1];
  a.results["f0_hz"] = f0;
  a.results["f1_hz"] = s.params.f1_hz;
  a.results["drop_f0_db"] = at_f0.back() - at_f0.front();
  a.results["drop_f1_db"] = at_f1.back() - at_f1.front();
  a.results["monotone_f0"] = monotone;
  std::vector<std::vector<std::string>> rows;
  Series s0{"f0", {}, {}, false}, s1{"f1", {}, {}, false};
  for (std::size_t k = 0; k < g.probes.size(); ++k) {
    rows.push_back({std::to_string(k + 1), std::to_string(g.probes[k]), format_number(at_f0[k]), format_number(at_f1[k])});
    s0.x.push_back(static_cast<double>(k + 1));
    s0.y.push_back(at_f0[k]);
    s1.x.push_back(static_cast<double>(k + 1));
    s1.y.push_back(at_f1[k]);
  }
  a.tables["skin_profile.csv"] = render_csv(meta(s, "skin_profile", a.results), {"node", "index", "db_f0", "db_f1"}, rows);
  a.plots["skin_profile.svg"] = {s.name + ": boundary profile", "node", "dB re drive", false, false, {s0, s1}};
}

void run_sweep(const Scenario& s, Artifacts& a, unsigned threads) {
  const auto g = circuit_of(s);
  DriveSpec drive;
  drive.node = drive_node(g);
  SweepOptions so;
  so.noise_floor_db = s.params.noise_floor_db;
  so.threads = threads;
  const auto grid = uniform_grid(s.params.start_hz, s.params.stop_hz, s.params.step_hz);
  auto sweep = voltage_sweep(g, drive, g.probes, grid, so);
  if (s.params.method == Extraction::noise_onset) {
    sweep.method = Extraction::noise_onset;
    sweep.extracted_f = noise_onset_estimate(sweep);
  }
  a.results["voltage_method"] = to_string(sweep.method);
  a.results["voltage_extracted_hz"] = sweep.extracted_f;
  a.results["noise_floor_db"] = sweep.noise_floor_db;

  std::vector<std::string> columns{"freq_hz"};
  for (std::size_t k = 0; k < g.probes.size(); ++k) columns.push_back("node_" + std::to_string(k + 1) + "_db");
  std::vector<std::vector<std::string>> rows;
  Plot plot{s.name + ": boundary-node voltages", "frequency (Hz)", "dB re drive", false, false, {}};
  for (std::size_t p = 0; p < g.probes.size(); ++p) plot.series.push_back({"Node " + std::to_string(p + 1), grid, {}, false});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<std::string> row{format_number(grid[k])};
    for (std::size_t p = 0; p < g.probes.size(); ++p) {
      const double v = sweep.values(static_cast<Index>(k), static_cast<Index>(p));
      row.push_back(format_number(v));
      plot.series[p].y.push_back(v);
    }
    rows.push_back(row);
  }

  if (s.params.method == Extraction::peak_impedance) {
    const Index node = corner_measurand(g, 0.0).node_a;
    const auto z = impedance_scan(g, node, grid, so);
    a.results["impedance_node"] = g.label(node);
    a.results["impedance_peak_hz"] = z.extracted_f;
    std::vector<std::vector<std::string>> zrows;
    Series zs{"|Z|", grid, {}, false};
    for (std::size_t k = 0; k < grid.size(); ++k) {
      zrows.push_back({format_number(grid[k]), format_number(z.values(static_cast<Index>(k), 0))});
      zs.y.push_back(z.values(static_cast<Index>(k), 0));
    }
    a.tables["impedance.csv"] = render_csv(meta(s, "impedance", a.results), {"freq_hz", "impedance_ohm"}, zrows);
    a.plots["impedance.svg"] = {s.name + ": impedance at " + g.label(node), "frequency (Hz)", "|Z| (ohm)", false, true, {zs}};
  }
  a.tables["sweep.csv"] = render_csv(meta(s, "sweep", a.results), columns, rows);
  a.plots["sweep.svg"] = plot;
}

void run_shift(const Scenario& s, Artifacts& a, unsigned threads) {
  const std::vector<int> units = s.params.units.empty() ? std::vector<int>{s.circuit->units} : s.params.units;
  const std::vector<double> ratios = s.params.ratios.empty() ? std::vector<double>{0.0} : s.params.ratios;
  const auto options = shift_options(s, threads);
  std::vector<std::vector<std::string>> rows;
  Plot plot{s.name + ": eigenfrequency shift", units.size() > 1 ? "units" : "C1/C2", "delta f (Hz)", false, true, {}};
  ordered cases = ordered::array();
  for (double cg : s.params.c_gamma)
    for (double ratio : ratios) {
      Series series{"C_G=" + format_number(cg) + (ratios.size() > 1 && units.size() > 1 ? ", C1/C2=" + format_number(ratio) : ""),
                    {}, {}, false};
      for (int u : units) {
        const auto g = circuit_of(s, u, ratio);
        const auto m = eigenfrequency_shift(g, corner_measurand(g, cg), options);
        const double r = g.params.c1 / g.params.c2;
        const double tracked = std::abs(m.tracked_f0 - m.tracked_f0_shifted);
        rows.push_back({std::to_string(u), format_number(r), format_number(cg), format_number(m.f0),
                        format_number(m.f0_shifted), format_number(m.delta_f), format_number(tracked)});
        cases.push_back({{"units", u}, {"c1_over_c2", r}, {"c_gamma", cg}, {"delta_f_hz", m.delta_f},
                         {"tracked_delta_f_hz", tracked}});
        series.x.push_back(units.size() > 1 ? u : r);
        series.y.push_back(m.delta_f);
      }
      plot.series.push_back(series);
    }
  a.results["cases"] = cases;
  a.results["method"] = to_string(options.method);
  a.tables["shift.csv"] = render_csv(meta(s, "shift"), {"units", "c1_over_c2", "c_gamma", "f0_hz", "f0_shifted_hz",
                                                        "delta_f_hz", "tracked_delta_f_hz"},
                                     rows);
  a.plots["shift.svg"] = plot;
}

void run_robustness(const Scenario& s, Artifacts& a, unsigned threads, std::uint64_t seed) {
  const auto g = circuit_of(s);
  DriveSpec drive;
  drive.node = drive_node(g);
  drive.crosstalk_fraction = s.params.crosstalk_fraction;
  drive.crosstalk_seed = seed;
  CrosstalkOptions o;
  o.trials = s.params.trials;
  o.f1 = s.params.f1_hz;
  o.shift = shift_options(s, threads);
  const auto report = crosstalk_trial(g, drive, corner_measurand(g, s.params.c_gamma.front()), o);

  std::vector<double> corr1;
  std::vector<std::vector<std::string>> rows;
  Series dev{"deviation", {}, {}, true};
  for (std::size_t t = 0; t < report.trials.size(); ++t) {
    const auto& tr = report.trials[t];
    rows.push_back({std::to_string(t), format_number(tr.f0), format_number(tr.f0_shifted), format_number(tr.delta_f),
                    format_number(tr.deviation), format_number(tr.profile_corr_f0), format_number(tr.profile_corr_f1)});
    corr1.push_back(tr.profile_corr_f1);
    dev.x.push_back(static_cast<double>(t));
    dev.y.push_back(100.0 * tr.deviation);
  }
  std::sort(corr1.begin(), corr1.end());
  a.results["clean_f0_hz"] = report.clean_f0;
  a.results["clean_delta_f_hz"] = report.clean_delta_f;
  a.results["max_deviation"] = report.max_deviation;
  a.results["median_corr_f1"] = corr1[corr1.size() / 2];
  a.results["seed"] = seed;
  a.tables["robustness.csv"] = render_csv(meta(s, "robustness", a.results),
                                          {"trial", "f0_hz", "f0_shifted_hz", "delta_f_hz", "deviation", "corr_f0", "corr_f1"},
                                          rows);
  std::vector<std::vector<std::string>> prows;
  for (std::size_t k = 0; k < g.probes.size(); ++k)
    prows.push_back({std::to_string(k + 1), format_number(report.clean_profile_f0[k]), format_number(report.clean_profile_f1[k])});
  a.tables["robustness_profiles.csv"] = render_csv(meta(s, "robustness_profiles"), {"node", "clean_db_f0", "clean_db_f1"}, prows);
  a.plots["robustness.svg"] = {s.name + ": delta f deviation per trial", "trial", "deviation (%)", false, false, {dev}};
}

void run_calibrate(const Scenario& s, Artifacts& a, unsigned threads) {
  const auto options = shift_options(s, threads);
  std::vector<std::vector<std::string>> rows;
  Series err{"|c_cali - c_para| / c_para", {}, {}, true};
  double worst = 0.0;
  for (double c_para : s.params.c_para) {
    auto g = circuit_of(s);
    const double f0 = tracked_mode_frequency(g).frequency;
    g.c_para = c_para;
    const auto cal = calibrate_parasitic(g, f0);
    g.c_cali = cal.c_cali;
    const double peak = extract_resonance(g, cal.frequency_after, options);
    const double rel = c_para > 0 ? std::abs(cal.c_cali - c_para) / c_para : cal.c_cali;
    worst = std::max(worst, rel);
    rows.push_back({format_number(c_para), format_number(cal.c_cali), format_number(rel), format_number(f0),
                    format_number(cal.frequency_before), format_number(cal.frequency_after), format_number(peak)});
    if (c_para > 0) {
      err.x.push_back(c_para);
      err.y.push_back(std::max(rel, 1e-18));
    }
  }
  a.results["worst_relative_error"] = worst;
  a.tables["calibrate.csv"] = render_csv(meta(s, "calibrate", a.results),
                                         {"c_para", "c_cali", "relative_error", "f0_hz", "f_parasitic_hz",
                                          "f_calibrated_hz", "scan_peak_hz"},
                                         rows);
  a.plots["calibrate.svg"] = {s.name + ": calibration error", "c_para (F)", "relative error", true, true, {err}};
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string input_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string render_csv(const std::string& meta_json, const std::vector<std::string>& columns,
                       const std::vector<std::vector<std::string>>& rows) {
  std::string out = "# meta: " + meta_json + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

std::string render_svg(const Plot& plot) {
  constexpr double W = 720, H = 450, left = 80, right = 180, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0) && (!plot.log_y || y > 0);
  };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (usable(s.x[i], s.y[i])) {
        x0 = std::min(x0, tx(s.x[i]));
        x1 = std::max(x1, tx(s.x[i]));
        y0 = std::min(y0, ty(s.y[i]));
        y1 = std::max(y1, ty(s.y[i]));
      }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
  const double padx = 0.03 * (x1 - x0), pady = 0.05 * (y1 - y0);
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(plot.title)
      << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(x0, x1, plot.log_x)) {
    const double x = left + (t - x0) / (x1 - x0) * pw;
    svg << "<line x1=\"" << fixed(x) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(x) << "\" y2=\"" << top + ph + 5
        << "\" stroke=\"black\"/><text x=\"" << fixed(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
        << tick_label(t, plot.log_x) << "</text>\n";
  }
  for (double t : ticks(y0, y1, plot.log_y)) {
    const double y = top + ph - (t - y0) / (y1 - y0) * ph;
    svg << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(y) << "\" x2=\"" << left << "\" y2=\"" << fixed(y)
        << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">"
        << tick_label(t, plot.log_y) << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xml_escape(plot.x_label)
      << "</text>\n";
  svg << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      if (s.markers)
        svg << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << colour
            << "\"/>\n";
      else
        points += fixed(px(s.x[i])) + "," + fixed(py(s.y[i])) + " ";
    }
    if (!s.markers && !points.empty())
      svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    svg << "<rect x=\"" << left + pw + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << colour
        << "\"/><text x=\"" << left + pw + 30 << "\" y=\"" << ly + 1 << "\">" << xml_escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

RunSummary run_scenario(Scenario scenario, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (options.out_dir) scenario.output.directory = *options.out_dir;
  if (options.formats) scenario.output.formats = *options.formats;
  if (options.seed) scenario.params.seed = *options.seed;
  const unsigned threads = std::max(1u, options.threads);

  Artifacts a;
  switch (scenario.experiment) {
    case Experiment::spectrum: run_spectrum(scenario, a); break;
    case Experiment::sensitivity: run_sensitivity(scenario, a, threads); break;
    case Experiment::range: run_range(scenario, a); break;
    case Experiment::skin: run_skin(scenario, a, threads); break;
    case Experiment::sweep: run_sweep(scenario, a, threads); break;
    case Experiment::shift: run_shift(scenario, a, threads); break;
    case Experiment::robustness: run_robustness(scenario, a, threads, scenario.params.seed); break;
    case Experiment::calibrate: run_calibrate(scenario, a, threads); break;
  }

  const auto& formats = scenario.output.formats;
  const auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  RunSummary summary;
  summary.directory = scenario.output.directory;
  if (wants("csv"))
    for (const auto& [file, text] : a.tables) {
      write_atomic(summary.directory / file, text);
      summary.files.push_back(file);
    }
  if (wants("svg"))
    for (const auto& [file, plot] : a.plots) {
      write_atomic(summary.directory / file, render_svg(plot));
      summary.files.push_back(file);
    }

  const std::string canonical = serialize_scenario(scenario);
  ordered report;
  report["name"] = scenario.name;
  report["experiment"] = to_string(scenario.experiment);
  report["input_hash"] = "fnv1a64:" + input_hash(canonical);
  report["versions"] = {
      {"nh_sense", kVersion},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                            "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"compiler", __VERSION__}};
  report["threads"] = threads;
  report["seed"] = scenario.params.seed;
  report["scenario"] = ordered::parse(canonical);
  report["results"] = a.results;
  if (wants("json")) summary.files.push_back("report.json");
  report["files"] = summary.files;
  report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  summary.report_json = report.dump(2) + "\n";
  if (wants("json")) write_atomic(summary.directory / "report.json", summary.report_json);
  return summary;
}

}  // namespace nhsense
