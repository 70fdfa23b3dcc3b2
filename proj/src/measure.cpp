#include "nhsense/measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "nhsense/spectral.hpp"

namespace nhsense {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kTones = 8;
constexpr double kToneBand = 0.2;  // tones fall within +-20% of the LC resonance

/// C, W and gauge precomputed once per sweep: J(omega) = i omega C + W / (i omega).
/// When every node has the same inductance to ground and nothing else is inductive,
/// J = i omega (C - sigma I) with sigma = 1 / (omega^2 L), so one Schur form of the gauged C
/// serves every frequency with triangular solves.
struct Network {
  Eigen::MatrixXcd C;
  Eigen::MatrixXcd W;
  Eigen::VectorXd gauge;
  double uniform_w = 0.0;
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur;

  explicit Network(const CircuitGraph& graph)
      : C(capacitance_matrix(graph).cast<cplx>()),
        W(inverse_inductance_matrix(graph).cast<cplx>()),
        gauge(circuit_gauge(graph)) {
    const cplx w0 = W(0, 0);
    if (W.isApprox(w0 * Eigen::MatrixXcd::Identity(W.rows(), W.cols()), 0.0) && w0.real() > 0) {
      uniform_w = w0.real();
      schur.compute(similarity(C, gauge));
    }
  }

  AdmittanceMatrix at(double omega) const {
    AdmittanceMatrix J;
    J.omega = omega;
    J.entries = cplx(0.0, omega) * C + W / cplx(0.0, omega);
    return J;
  }

  NodeSolution solve(double omega, const Eigen::VectorXcd& currents) const {
    if (uniform_w == 0.0) return solve_node_voltages(at(omega), currents, gauge);
    const cplx sigma = uniform_w / (omega * omega);
    Eigen::MatrixXcd T = schur.matrixT();
    T.diagonal().array() -= sigma;
    const Eigen::VectorXcd b = (currents.array() / gauge.array().cast<cplx>()).matrix() / cplx(0.0, omega);
    Eigen::VectorXcd y = schur.matrixU().adjoint() * b;
    T.triangularView<Eigen::Upper>().solveInPlace(y);
    NodeSolution out;
    out.voltages = (schur.matrixU() * y).array() * gauge.array().cast<cplx>();
    const double pivot = T.diagonal().cwiseAbs().minCoeff();
    out.resonant = !(pivot > std::numeric_limits<double>::epsilon() * T.norm()) || !out.voltages.allFinite();
    return out;
  }
};

/// Root-sum-square amplitude each node picks up from the tones, which sit at other
/// frequencies and add to a detector's reading in power rather than in phase.
Eigen::VectorXd background(const Network& net, Index nodes, const std::vector<CrosstalkTone>& tones) {
  Eigen::VectorXd power = Eigen::VectorXd::Zero(nodes);
  for (const auto& tone : tones) {
    Eigen::VectorXcd I = Eigen::VectorXcd::Zero(nodes);
    I(tone.node) = tone.amplitude;
    const auto sol = net.solve(kTwoPi * tone.frequency, I);
    if (!sol.resonant) power += sol.voltages.cwiseAbs2();
  }
  return power.cwiseSqrt();
}

double reading(const cplx& v, const Eigen::VectorXd& bg, Index node) {
  return bg.size() == 0 ? std::abs(v) : std::hypot(std::abs(v), bg(node));
}

/// Evaluates `row(k)` for every grid index on up to `threads` workers; rows land in order.
void parallel_rows(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& row) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) row(k);
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

void require_grid(const std::vector<double>& grid) {
  require(!grid.empty(), "frequency grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    require(grid[k] > 0 && std::isfinite(grid[k]), "grid frequencies must be > 0");
    require(k == 0 || grid[k] > grid[k - 1], "grid must be strictly ascending");
  }
}

/// Index of the local extremum of `trace` nearest `reference` (global extremum when reference <= 0).
std::size_t pick_extremum(const std::vector<double>& grid, const Eigen::VectorXd& trace, bool maximum,
                          double reference) {
  const Index n = trace.size();
  auto better = [&](double a, double b) { return maximum ? a > b : a < b; };
  if (reference <= 0) {
    Index k = 0;
    if (maximum)
      trace.maxCoeff(&k);
    else
      trace.minCoeff(&k);
    return static_cast<std::size_t>(k);
  }
  std::size_t pick = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) {
    const bool left_ok = k == 0 || !better(trace(k - 1), trace(k));
    const bool right_ok = k == n - 1 || !better(trace(k + 1), trace(k));
    if (!left_ok || !right_ok) continue;
    const double d = std::abs(grid[static_cast<std::size_t>(k)] - reference);
    if (d < best) {
      best = d;
      pick = static_cast<std::size_t>(k);
    }
  }
  return pick;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// Pearson correlation over boundary nodes other than the reference, which is 0 dB by definition.
double profile_correlation(const CircuitGraph& graph, Index reference, const std::vector<double>& a,
                           const std::vector<double>& b) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < graph.probes.size(); ++k)
    if (graph.probes[k] != reference) {
      x.push_back(a[k]);
      y.push_back(b[k]);
    }
  return pearson(x, y);
}

double db(double ratio) { return 20.0 * std::log10(ratio); }

SweepResult sweep_voltages(const Network& net, const DriveSpec& drive, const Eigen::VectorXd& bg,
                           const std::vector<Index>& probes,
                           const std::vector<double>& grid, const SweepOptions& options) {
  require_grid(grid);
  require(!probes.empty(), "voltage sweep needs at least one probe");
  require(drive.amplitude > 0, "drive amplitude must be > 0");
  SweepResult out;
  out.grid = grid;
  out.nodes = probes;
  out.noise_floor_db = options.noise_floor_db;
  out.method = Extraction::min_voltage;
  out.raw.resize(static_cast<Index>(grid.size()), static_cast<Index>(probes.size()));
  parallel_rows(grid.size(), options.threads, [&](std::size_t k) {
    const double omega = kTwoPi * grid[k];
    Eigen::VectorXcd I = Eigen::VectorXcd::Zero(net.C.rows());
    I(drive.node) = drive.amplitude;
    const auto V = net.solve(omega, I).voltages;
    const double ref = reading(V(drive.node), bg, drive.node);
    for (std::size_t p = 0; p < probes.size(); ++p)
      out.raw(static_cast<Index>(k), static_cast<Index>(p)) = db(reading(V(probes[p]), bg, probes[p]) / ref);
  });
  out.values = out.raw.cwiseMax(options.noise_floor_db);
  const Eigen::VectorXd first = out.raw.col(0);
  out.extracted_f = grid[pick_extremum(grid, first, false, options.reference_hz)];
  return out;
}

/// Detector reading at `node` per unit test current there; `bg` is scaled to that current.
SweepResult scan_impedance(const Network& net, Index node, const Eigen::VectorXd& bg, const std::vector<double>& grid,
                           const SweepOptions& options) {
  require_grid(grid);
  require(node >= 0 && node < net.C.rows(), "scan node outside circuit");
  SweepResult out;
  out.grid = grid;
  out.nodes = {node};
  out.noise_floor_db = options.noise_floor_db;
  out.method = Extraction::peak_impedance;
  out.raw.resize(static_cast<Index>(grid.size()), 1);
  parallel_rows(grid.size(), options.threads, [&](std::size_t k) {
    Eigen::VectorXcd I = Eigen::VectorXcd::Zero(net.C.rows());
    I(node) = 1.0;
    const auto sol = net.solve(kTwoPi * grid[k], I);
    const double z = reading(sol.voltages(node), bg, node);
    out.raw(static_cast<Index>(k), 0) = sol.resonant || !std::isfinite(z) ? kImpedanceCap : std::min(z, kImpedanceCap);
  });
  out.values = out.raw;
  const Eigen::VectorXd trace = out.raw.col(0);
  out.extracted_f = grid[pick_extremum(grid, trace, true, options.reference_hz)];
  return out;
}

struct Scan {
  SweepResult sweep;
  std::size_t pick;
};

/// One sweep of the configured method over `grid`, with extraction nearest `reference`.
Scan scan(const CircuitGraph& graph, const Network& net, const ShiftOptions& options, const std::vector<double>& grid,
          double reference) {
  SweepOptions so;
  so.noise_floor_db = options.noise_floor_db;
  so.threads = options.threads;
  so.reference_hz = reference;
  DriveSpec drive;
  drive.node = drive_node(graph);
  drive.crosstalk_fraction = options.crosstalk_fraction;
  drive.crosstalk_seed = options.crosstalk_seed;
  if (options.method == Extraction::peak_impedance) {
    const Index node = options.node >= 0 ? options.node : corner_measurand(graph, 0.0).node_a;
    DriveSpec test = drive;
    test.node = node;
    test.amplitude = 1.0;
    Scan s{scan_impedance(net, node, background(net, graph.node_count(), crosstalk_tones(graph, test)), grid, so), 0};
    s.pick = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), s.sweep.extracted_f) - grid.begin());
    return s;
  }
  const Index probe = options.node >= 0 ? options.node : deep_probe(graph);
  const auto bg = background(net, graph.node_count(), crosstalk_tones(graph, drive));
  Scan s{sweep_voltages(net, drive, bg, {probe}, grid, so), 0};
  if (options.method == Extraction::noise_onset) {
    s.sweep.method = Extraction::noise_onset;
    s.sweep.extracted_f = noise_onset_estimate(s.sweep);
  }
  s.pick = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), s.sweep.extracted_f) - grid.begin());
  return s;
}

}  // namespace

const char* to_string(Extraction method) {
  switch (method) {
    case Extraction::min_voltage: return "min_voltage";
    case Extraction::peak_impedance: return "peak_impedance";
    case Extraction::noise_onset: return "noise_onset";
  }
  return "unknown";
}

Eigen::VectorXd circuit_gauge(const CircuitGraph& graph) {
  if (graph.lattice.extent.empty() || graph.lattice.dim() != graph.node_count())
    return Eigen::VectorXd::Ones(graph.node_count());
  const Eigen::VectorXd g = skin_gauge(graph.lattice);
  return g / g.minCoeff();
}

NodeSolution solve_node_voltages(const AdmittanceMatrix& J, const Eigen::VectorXcd& currents,
                                 const Eigen::VectorXd& gauge) {
  const Index n = J.entries.rows();
  require(currents.size() == n, "current vector does not match the admittance matrix");
  require(gauge.size() == 0 || gauge.size() == n, "gauge length does not match the admittance matrix");
  NodeSolution out;
  if (currents.isZero(0.0)) {
    out.voltages = Eigen::VectorXcd::Zero(n);
    return out;
  }
  const bool gauged = gauge.size() == n;
  const Eigen::MatrixXcd A = gauged ? similarity(J.entries, gauge) : J.entries;
  const Eigen::VectorXcd b = gauged ? Eigen::VectorXcd(currents.array() / gauge.array().cast<cplx>()) : currents;
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  const Eigen::VectorXcd y = lu.solve(b);
  out.voltages = gauged ? Eigen::VectorXcd(y.array() * gauge.array().cast<cplx>()) : y;
  out.resonant = !(lu.rcond() > std::numeric_limits<double>::epsilon()) || !out.voltages.allFinite();
  return out;
}

NodeSolution solve_node_voltages(const AdmittanceMatrix& J, const DriveSpec& drive, const Eigen::VectorXd& gauge) {
  require(drive.node >= 0 && drive.node < J.entries.rows(), "drive node outside circuit");
  Eigen::VectorXcd I = Eigen::VectorXcd::Zero(J.entries.rows());
  I(drive.node) = drive.amplitude;
  return solve_node_voltages(J, I, gauge);
}

std::vector<double> uniform_grid(double start, double stop, double step) {
  require(start > 0 && stop >= start && step > 0, "grid needs 0 < start <= stop and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = start + static_cast<double>(k) * step;
  return grid;
}

std::vector<CrosstalkTone> crosstalk_tones(const CircuitGraph& graph, const DriveSpec& drive) {
  std::vector<CrosstalkTone> out;
  if (drive.crosstalk_fraction <= 0) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(drive.crosstalk_seed), static_cast<std::uint32_t>(drive.crosstalk_seed >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<Index> node(0, graph.node_count() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f_lc = resonance_frequency(graph.params);
  double total = 0.0;
  for (int k = 0; k < kTones; ++k) {
    CrosstalkTone tone;
    tone.node = node(rng);
    tone.amplitude = unit(rng) + 1e-3;
    tone.phase = kTwoPi * unit(rng);
    tone.frequency = f_lc * (1.0 + kToneBand * (2.0 * unit(rng) - 1.0));
    total += tone.amplitude;
    out.push_back(tone);
  }
  for (auto& tone : out) tone.amplitude *= drive.amplitude * drive.crosstalk_fraction / total;
  return out;
}

Eigen::VectorXd crosstalk_background(const CircuitGraph& graph, const DriveSpec& drive) {
  return background(Network(graph), graph.node_count(), crosstalk_tones(graph, drive));
}

SweepResult voltage_sweep(const CircuitGraph& graph, const DriveSpec& drive, const std::vector<Index>& probes,
                          const std::vector<double>& grid, const SweepOptions& options) {
  require(drive.node >= 0 && drive.node < graph.node_count(), "drive node outside circuit");
  const Network net(graph);
  return sweep_voltages(net, drive, background(net, graph.node_count(), crosstalk_tones(graph, drive)), probes, grid,
                        options);
}

SweepResult impedance_scan(const CircuitGraph& graph, Index node, const std::vector<double>& grid,
                           const SweepOptions& options) {
  return scan_impedance(Network(graph), node, {}, grid, options);
}

double noise_onset_estimate(const SweepResult& sweep) {
  require(!sweep.grid.empty() && sweep.raw.rows() == static_cast<Index>(sweep.grid.size()), "sweep has no data");
  for (std::size_t k = 0; k < sweep.grid.size(); ++k)
    if (sweep.raw(static_cast<Index>(k), 0) <= sweep.noise_floor_db) return sweep.grid[k];
  throw NumericalError("trace never reaches the noise floor; use the direct minimum instead");
}

double extract_resonance(const CircuitGraph& graph, double reference_hz, const ShiftOptions& options,
                         SweepResult* fine_sweep) {
  require(options.coarse_step > 0 && options.fine_step > 0 && options.half_window > 0, "scan steps must be > 0");
  const Network net(graph);
  double half = options.half_window;
  for (int attempt = 0; attempt < 4; ++attempt, half *= 2) {
    // Grids sit on fixed multiples of the step, as an instrument's would, not on the reference.
    const double step = options.coarse_step;
    const double lo = std::max(step, std::ceil((reference_hz - half) / step) * step);
    const auto coarse_grid = uniform_grid(lo, std::floor((reference_hz + half) / step) * step, step);
    const Scan coarse = scan(graph, net, options, coarse_grid, reference_hz);
    if (coarse.pick == 0 || coarse.pick + 1 >= coarse_grid.size()) continue;  // widen and retry

    const double centre = coarse_grid[coarse.pick];
    // A noise-onset edge lies between the previous coarse point and this one.
    const double fine_lo = centre - options.coarse_step;
    const double fine_hi = options.method == Extraction::noise_onset ? centre : centre + options.coarse_step;
    const auto fine_grid = uniform_grid(fine_lo, fine_hi, options.fine_step);
    Scan fine = scan(graph, net, options, fine_grid, options.method == Extraction::noise_onset ? 0.0 : reference_hz);
    if (fine_sweep) *fine_sweep = fine.sweep;
    return fine.sweep.extracted_f;
  }
  throw NumericalError("resonance extremum stays on the scan boundary after widening");
}

ShiftMeasurement eigenfrequency_shift(const CircuitGraph& graph, const Measurand& measurand,
                                      const ShiftOptions& options) {
  require(measurand.c_gamma >= 0 && std::isfinite(measurand.c_gamma), "c_gamma must be >= 0");
  CircuitGraph bare = graph;
  bare.measurand.reset();
  CircuitGraph loaded = graph;
  loaded.measurand = measurand;

  ShiftMeasurement out;
  out.tracked_f0 = tracked_mode_frequency(bare).frequency;
  out.tracked_f0_shifted = tracked_mode_frequency(loaded).frequency;
  out.f0 = extract_resonance(bare, out.tracked_f0, options, &out.before);
  out.f0_shifted = extract_resonance(loaded, out.tracked_f0_shifted, options, &out.after);
  out.delta_f = std::abs(out.f0 - out.f0_shifted);
  return out;
}

std::vector<double> boundary_profile(const CircuitGraph& graph, const DriveSpec& drive, double frequency) {
  require(drive.node >= 0 && drive.node < graph.node_count(), "drive node outside circuit");
  const Network net(graph);
  const auto bg = background(net, graph.node_count(), crosstalk_tones(graph, drive));
  Eigen::VectorXcd I = Eigen::VectorXcd::Zero(graph.node_count());
  I(drive.node) = drive.amplitude;
  const auto V = net.solve(kTwoPi * frequency, I).voltages;
  const double ref = reading(V(drive.node), bg, drive.node);
  std::vector<double> out;
  for (Index node : graph.probes) out.push_back(db(reading(V(node), bg, node) / ref));
  return out;
}

RobustnessReport crosstalk_trial(const CircuitGraph& graph, const DriveSpec& drive, const Measurand& measurand,
                                 const CrosstalkOptions& options) {
  require(drive.crosstalk_fraction >= 0 && drive.crosstalk_fraction <= 1, "crosstalk fraction must be in [0, 1]");
  require(options.trials >= 1, "trials must be >= 1");

  ShiftOptions clean = options.shift;
  clean.crosstalk_fraction = 0.0;
  DriveSpec clean_drive = drive;
  clean_drive.crosstalk_fraction = 0.0;

  RobustnessReport report;
  const auto base = eigenfrequency_shift(graph, measurand, clean);
  report.clean_f0 = base.f0;
  report.clean_delta_f = base.delta_f;
  report.clean_profile_f0 = boundary_profile(graph, clean_drive, base.f0);
  report.clean_profile_f1 = boundary_profile(graph, clean_drive, options.f1);

  report.trials.resize(static_cast<std::size_t>(options.trials));
  for (int t = 0; t < options.trials; ++t) {
    // Per-trial stream derived from (seed, trial) so the result does not depend on scheduling.
    std::seed_seq seq{static_cast<std::uint32_t>(drive.crosstalk_seed),
                      static_cast<std::uint32_t>(drive.crosstalk_seed >> 32), static_cast<std::uint32_t>(t)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    DriveSpec noisy = drive;
    noisy.crosstalk_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    ShiftOptions so = options.shift;
    so.crosstalk_fraction = drive.crosstalk_fraction;
    so.crosstalk_seed = noisy.crosstalk_seed;

    auto& trial = report.trials[static_cast<std::size_t>(t)];
    const auto m = eigenfrequency_shift(graph, measurand, so);
    trial.f0 = m.f0;
    trial.f0_shifted = m.f0_shifted;
    trial.delta_f = m.delta_f;
    trial.deviation = report.clean_delta_f > 0 ? std::abs(m.delta_f - report.clean_delta_f) / report.clean_delta_f
                                               : std::abs(m.delta_f);
    trial.profile_corr_f0 = profile_correlation(graph, drive.node, report.clean_profile_f0,
                                                boundary_profile(graph, noisy, base.f0));
    trial.profile_corr_f1 = profile_correlation(graph, drive.node, report.clean_profile_f1,
                                                boundary_profile(graph, noisy, options.f1));
    report.max_deviation = std::max(report.max_deviation, trial.deviation);
  }
  return report;
}

}  // namespace nhsense
