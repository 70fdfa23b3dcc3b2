#include "nhsense/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nhsense {

namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

/// Line of every object key and array element, keyed by dotted path. The JSON has already
/// parsed by the time this runs, so the scan only tracks nesting and string boundaries.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) {
    struct Frame {
      bool array;
      std::string path;
      int index = 0;
      bool expect_key = true;
      std::string pending;
    };
    std::vector<Frame> stack;
    int line = 1;
    auto child = [&]() -> std::string {
      if (stack.empty()) return "";
      Frame& top = stack.back();
      if (!top.array) return top.pending;
      std::string p = top.path + "[" + std::to_string(top.index) + "]";
      lines_.emplace(p, line);
      return p;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '\n') {
        ++line;
      } else if (c == '"') {
        std::string s;
        for (++i; i < text.size() && text[i] != '"'; ++i) {
          if (text[i] == '\\' && i + 1 < text.size()) ++i;
          s += text[i];
        }
        if (!stack.empty() && !stack.back().array && stack.back().expect_key) {
          Frame& top = stack.back();
          top.pending = top.path.empty() ? s : top.path + "." + s;
          top.expect_key = false;
          lines_.emplace(top.pending, line);
        } else {
          child();
        }
      } else if (c == '{' || c == '[') {
        stack.push_back({c == '[', child(), 0, true, {}});
      } else if (c == '}' || c == ']') {
        if (!stack.empty()) stack.pop_back();
      } else if (c == ',') {
        if (!stack.empty()) {
          if (stack.back().array) ++stack.back().index;
          else stack.back().expect_key = true;
        }
      } else if (!std::isspace(static_cast<unsigned char>(c)) && c != ':') {
        child();
      }
    }
  }

  int line(const std::string& path) const {
    const auto it = lines_.find(path);
    return it == lines_.end() ? 0 : it->second;
  }

 private:
  std::map<std::string, int> lines_;
};

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

/// Typed access to one JSON object with path-qualified errors.
class Reader {
 public:
  Reader(const json& node, std::string path, const LineIndex& lines) : node_(node), path_(std::move(path)), lines_(lines) {
    if (!node_.is_object()) fail(path_, "must be an object");
  }

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    throw ScenarioError(path, lines_.line(path), message);
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& item : node_.items())
      if (!known.count(item.key())) fail(join(path_, item.key()), "unknown key");
  }

  bool has(const char* key) const { return node_.contains(key); }
  std::string at(const char* key) const { return join(path_, key); }
  const std::string& path() const { return path_; }
  Reader object(const char* key) const { return Reader(node_.at(key), at(key), lines_); }
  const json& raw(const char* key) const { return node_.at(key); }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) fail(at(key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(at(key), "must be finite");
    return x;
  }

  double positive(const char* key, double fallback) const {
    const double x = number(key, fallback);
    if (!(x > 0)) fail(at(key), "must be > 0");
    return x;
  }

  double non_negative(const char* key, double fallback) const {
    const double x = number(key, fallback);
    if (x < 0) fail(at(key), "must be >= 0");
    return x;
  }

  long long integer(const char* key, long long fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) fail(at(key), "must be an integer");
    return v.get<long long>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) fail(at(key), "must be a string");
    return v.get<std::string>();
  }

  template <typename T, typename Check>
  std::vector<T> list(const char* key, Check check, const char* requirement) const {
    std::vector<T> out;
    if (!has(key)) return out;
    const json& v = node_.at(key);
    if (!v.is_array()) fail(at(key), "must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = at(key) + "[" + std::to_string(i) + "]";
      const json& e = v[i];
      const bool typed = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
      if (!typed) fail(p, std::is_integral_v<T> ? "must be an integer" : "must be a number");
      const T x = e.get<T>();
      if (!check(x)) fail(p, requirement);
      out.push_back(x);
    }
    return out;
  }

 private:
  const json& node_;
  std::string path_;
  const LineIndex& lines_;
};

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::spectrum, Experiment::skin, Experiment::sensitivity, Experiment::range, Experiment::sweep,
                 Experiment::shift, Experiment::robustness, Experiment::calibrate})
    if (name == to_string(e)) return e;
  throw ValidationError("unknown experiment '" + name + "'");
}

Extraction extraction_from_string(const std::string& name) {
  for (auto m : {Extraction::min_voltage, Extraction::peak_impedance, Extraction::noise_onset})
    if (name == to_string(m)) return m;
  throw ValidationError("unknown extraction method '" + name + "'");
}

LatticeSpec read_lattice(const Reader& r) {
  r.allow({"order", "extent", "couplings", "intra_cell"});
  LatticeSpec spec;
  const long long order = r.integer("order", 2);
  if (order < 1 || order > 3) r.fail(r.at("order"), "must be 1, 2 or 3");
  spec.order = static_cast<int>(order);
  if (!r.has("extent")) r.fail(r.at("extent"), "is required");
  if (r.raw("extent").is_number_integer()) {
    spec.extent.assign(spec.order, r.raw("extent").get<int>());
  } else {
    spec.extent = r.list<int>("extent", [](int x) { return x >= 1; }, "must be >= 1");
  }
  if (static_cast<int>(spec.extent.size()) != spec.order) r.fail(r.at("extent"), "needs one entry per axis");
  for (int x : spec.extent)
    if (x < 1) r.fail(r.at("extent"), "must be >= 1");
  if (!r.has("couplings")) r.fail(r.at("couplings"), "is required");
  const json& pairs = r.raw("couplings");
  if (!pairs.is_array() || static_cast<int>(pairs.size()) != spec.order)
    r.fail(r.at("couplings"), "needs one [forward, backward] pair per axis");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string p = r.at("couplings") + "[" + std::to_string(i) + "]";
    const json& pair = pairs[i];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      r.fail(p, "must be a [forward, backward] pair of numbers");
    const AxisCoupling c{pair[0].get<double>(), pair[1].get<double>()};
    if (!(c.forward > 0 && c.backward > 0 && std::isfinite(c.forward) && std::isfinite(c.backward)))
      r.fail(p, "couplings must be finite and > 0");
    spec.couplings.push_back(c);
  }
  spec.intra_cell = r.non_negative("intra_cell", 0.0);
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    r.fail(r.path(), e.what());
  }
  return spec;
}

CircuitParams read_circuit(const Reader& r) {
  r.allow({"c1", "c2", "c0", "ground_l", "scheme", "units", "c_ground_total"});
  CircuitParams p;
  p.c1 = r.positive("c1", p.c1);
  p.c2 = r.positive("c2", p.c2);
  p.c0 = r.non_negative("c0", p.c0);
  p.ground_l = r.positive("ground_l", p.ground_l);
  p.c_ground_total = r.non_negative("c_ground_total", p.c_ground_total);
  const long long units = r.integer("units", p.units);
  if (units < 1 || units > 12) r.fail(r.at("units"), "must be in 1..12");
  p.units = static_cast<int>(units);
  try {
    p.scheme = ground_scheme_from_string(r.text("scheme", to_string(p.scheme)));
  } catch (const ValidationError& e) {
    r.fail(r.at("scheme"), e.what());
  }
  return p;
}

ExperimentParams read_params(const Reader& r) {
  r.allow({"sizes", "gammas", "threshold", "deviation_cap", "finite_target", "units", "ratios", "c_gamma", "c_para",
           "start_hz", "stop_hz", "step_hz", "f1_hz", "method", "noise_floor_db", "coarse_step_hz", "fine_step_hz",
           "half_window_hz", "trials", "crosstalk_fraction", "seed"});
  ExperimentParams p;
  const auto finite_non_negative = [](double x) { return std::isfinite(x) && x >= 0; };
  p.sizes = r.list<int>("sizes", [](int x) { return x >= 3 && x % 2 == 1; }, "must be odd and >= 3");
  p.gammas = r.list<double>("gammas", finite_non_negative, "must be >= 0");
  p.threshold = r.non_negative("threshold", p.threshold);
  p.deviation_cap = r.positive("deviation_cap", p.deviation_cap);
  p.finite_target = r.number("finite_target", p.finite_target);
  p.units = r.list<int>("units", [](int x) { return x >= 1 && x <= 12; }, "must be in 1..12");
  p.ratios = r.list<double>("ratios", [](double x) { return std::isfinite(x) && x > 0; }, "must be > 0");
  p.c_gamma = r.list<double>("c_gamma", finite_non_negative, "must be >= 0");
  p.c_para = r.list<double>("c_para", finite_non_negative, "must be >= 0");
  p.start_hz = r.positive("start_hz", p.start_hz);
  p.stop_hz = r.positive("stop_hz", p.stop_hz);
  p.step_hz = r.positive("step_hz", p.step_hz);
  if (p.stop_hz < p.start_hz) r.fail(r.at("stop_hz"), "must be >= start_hz");
  if ((p.stop_hz - p.start_hz) / p.step_hz > 1e5) r.fail(r.at("step_hz"), "grid would exceed 100000 points");
  p.f1_hz = r.positive("f1_hz", p.f1_hz);
  try {
    p.method = extraction_from_string(r.text("method", to_string(p.method)));
  } catch (const ValidationError& e) {
    r.fail(r.at("method"), e.what());
  }
  p.noise_floor_db = r.number("noise_floor_db", p.noise_floor_db);
  p.coarse_step_hz = r.positive("coarse_step_hz", p.coarse_step_hz);
  p.fine_step_hz = r.positive("fine_step_hz", p.fine_step_hz);
  p.half_window_hz = r.positive("half_window_hz", p.half_window_hz);
  const long long trials = r.integer("trials", p.trials);
  if (trials < 1 || trials > 10000) r.fail(r.at("trials"), "must be in 1..10000");
  p.trials = static_cast<int>(trials);
  p.crosstalk_fraction = r.non_negative("crosstalk_fraction", p.crosstalk_fraction);
  if (p.crosstalk_fraction > 1) r.fail(r.at("crosstalk_fraction"), "must be in [0, 1]");
  if (r.has("seed")) {
    const json& v = r.raw("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      r.fail(r.at("seed"), "must be a non-negative integer");
    p.seed = v.get<std::uint64_t>();
  }
  return p;
}

OutputSpec read_output(const Reader& r) {
  r.allow({"directory", "formats"});
  OutputSpec out;
  out.directory = r.text("directory", out.directory);
  if (out.directory.empty()) r.fail(r.at("directory"), "must not be empty");
  if (r.has("formats")) {
    const json& v = r.raw("formats");
    if (!v.is_array()) r.fail(r.at("formats"), "must be an array");
    out.formats.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = r.at("formats") + "[" + std::to_string(i) + "]";
      if (!v[i].is_string()) r.fail(p, "must be a string");
      const auto f = v[i].get<std::string>();
      if (f != "csv" && f != "json" && f != "svg") r.fail(p, "must be one of csv, json, svg");
      if (std::find(out.formats.begin(), out.formats.end(), f) == out.formats.end()) out.formats.push_back(f);
    }
  }
  return out;
}

bool needs_lattice(Experiment e) {
  return e == Experiment::spectrum || e == Experiment::sensitivity || e == Experiment::range;
}

void check_experiment(const Scenario& s, const Reader& root) {
  const auto& p = s.params;
  if (needs_lattice(s.experiment)) {
    if (!s.lattice) root.fail("lattice", std::string("is required for experiment '") + to_string(s.experiment) + "'");
    if (s.circuit) root.fail("circuit", std::string("is not used by experiment '") + to_string(s.experiment) + "'");
  } else {
    if (!s.circuit) root.fail("circuit", std::string("is required for experiment '") + to_string(s.experiment) + "'");
    if (s.lattice) root.fail("lattice", "circuit experiments build their own strip geometry; remove this block");
  }
  const auto odd_extents = [&](const char* what) {
    for (int x : s.lattice->extent)
      if (x % 2 == 0) root.fail("lattice.extent", std::string(what) + " needs odd extents");
    if (s.lattice->intra_cell != 0.0) root.fail("lattice.intra_cell", std::string(what) + " needs intra_cell = 0");
  };
  switch (s.experiment) {
    case Experiment::sensitivity:
      if (p.sizes.empty()) root.fail("parameters.sizes", "is required for sensitivity");
      if (p.gammas.empty()) root.fail("parameters.gammas", "is required for sensitivity");
      if (s.lattice->intra_cell != 0.0) root.fail("lattice.intra_cell", "sensitivity needs intra_cell = 0");
      break;
    case Experiment::range: odd_extents("range"); break;
    case Experiment::shift:
      if (p.c_gamma.empty()) root.fail("parameters.c_gamma", "is required for shift");
      break;
    case Experiment::robustness:
      if (p.c_gamma.size() != 1) root.fail("parameters.c_gamma", "robustness takes exactly one value");
      if (p.method == Extraction::noise_onset) root.fail("parameters.method", "robustness needs a direct extremum method");
      break;
    case Experiment::calibrate:
      if (p.c_para.empty()) root.fail("parameters.c_para", "is required for calibrate");
      break;
    default: break;
  }
}

ordered to_json(const LatticeSpec& l) {
  ordered j;
  j["order"] = l.order;
  j["extent"] = l.extent;
  ordered pairs = ordered::array();
  for (const auto& c : l.couplings) pairs.push_back({c.forward, c.backward});
  j["couplings"] = pairs;
  j["intra_cell"] = l.intra_cell;
  return j;
}

ordered to_json(const CircuitParams& c) {
  ordered j;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["c0"] = c.c0;
  j["ground_l"] = c.ground_l;
  j["scheme"] = to_string(c.scheme);
  j["units"] = c.units;
  j["c_ground_total"] = c.c_ground_total;
  return j;
}

ordered to_json(const ExperimentParams& p) {
  ordered j;
  j["sizes"] = p.sizes;
  j["gammas"] = p.gammas;
  j["threshold"] = p.threshold;
  j["deviation_cap"] = p.deviation_cap;
  j["finite_target"] = p.finite_target;
  j["units"] = p.units;
  j["ratios"] = p.ratios;
  j["c_gamma"] = p.c_gamma;
  j["c_para"] = p.c_para;
  j["start_hz"] = p.start_hz;
  j["stop_hz"] = p.stop_hz;
  j["step_hz"] = p.step_hz;
  j["f1_hz"] = p.f1_hz;
  j["method"] = to_string(p.method);
  j["noise_floor_db"] = p.noise_floor_db;
  j["coarse_step_hz"] = p.coarse_step_hz;
  j["fine_step_hz"] = p.fine_step_hz;
  j["half_window_hz"] = p.half_window_hz;
  j["trials"] = p.trials;
  j["crosstalk_fraction"] = p.crosstalk_fraction;
  j["seed"] = p.seed;
  return j;
}

}  // namespace

ScenarioError::ScenarioError(std::string path, int line, const std::string& message)
    : ValidationError((path.empty() ? std::string("scenario") : path) +
                      (line > 0 ? " (line " + std::to_string(line) + ")" : std::string()) + ": " + message),
      path_(std::move(path)),
      line_(line),
      detail_(message) {}

const char* to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::spectrum: return "spectrum";
    case Experiment::skin: return "skin";
    case Experiment::sensitivity: return "sensitivity";
    case Experiment::range: return "range";
    case Experiment::sweep: return "sweep";
    case Experiment::shift: return "shift";
    case Experiment::robustness: return "robustness";
    case Experiment::calibrate: return "calibrate";
  }
  return "unknown";
}

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ScenarioError("", line, std::string("invalid JSON: ") + e.what());
  }
  const LineIndex lines(text);
  const Reader root(doc, "", lines);
  root.allow({"name", "experiment", "lattice", "circuit", "parameters", "output"});

  Scenario s;
  s.name = root.text("name", s.name);
  if (!root.has("experiment")) root.fail("experiment", "is required");
  try {
    s.experiment = experiment_from_string(root.text("experiment", ""));
  } catch (const ValidationError& e) {
    root.fail("experiment", e.what());
  }
  if (root.has("lattice")) s.lattice = read_lattice(root.object("lattice"));
  if (root.has("circuit")) s.circuit = read_circuit(root.object("circuit"));
  if (root.has("parameters")) s.params = read_params(root.object("parameters"));
  if (root.has("output")) s.output = read_output(root.object("output"));
  check_experiment(s, root);
  return s;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("", 0, "cannot read scenario file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario_text(text.str());
}

std::string serialize_scenario(const Scenario& s) {
  ordered j;
  j["name"] = s.name;
  j["experiment"] = to_string(s.experiment);
  if (s.lattice) j["lattice"] = to_json(*s.lattice);
  if (s.circuit) j["circuit"] = to_json(*s.circuit);
  j["parameters"] = to_json(s.params);
  j["output"] = {{"directory", s.output.directory}, {"formats", s.output.formats}};
  return j.dump(2) + "\n";
}

CircuitParams with_ratio(CircuitParams params, double ratio) {
  if (ratio > 0) params.c2 = params.c1 / ratio;
  return params;
}

}  // namespace nhsense
