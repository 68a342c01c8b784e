#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qamc/proposal_kernels.hpp"
#include "qamc/sk_instance.hpp"
#include "qamc/spectral_analysis.hpp"

namespace qamc {

// How the QA annealing time is chosen for a (instance, temperature) point.
struct TauPolicy {
  enum class Mode { automatic, optimize, fixed };
  Mode mode = Mode::automatic;
  double fixed_tau = 0.01;
  // automatic: optimize below this temperature, otherwise use high_temperature_tau.
  double high_temperature = 10.0;
  double high_temperature_tau = 0.01;

  // "auto", "optimize" or "fixed:<tau>".
  static TauPolicy parse(const std::string& text);
  std::string to_string() const;
  bool optimizes_at(double temperature) const;
  double fixed_value_at(double temperature) const;
};

struct EnsembleConfig {
  std::vector<unsigned> n_values{4, 6, 8, 10, 12};
  std::vector<double> temperatures{1.0};
  unsigned instances_per_point = 20;
  std::vector<KernelKind> kernels{KernelKind::local, KernelKind::uniform, KernelKind::qa};
  std::size_t chain_steps = 100000;
  unsigned chain_replicas = 32;
  std::uint64_t master_seed = 1;
  TauPolicy tau;
  TauSearchOptions tau_search;
  // Gap of the independence kernels (uniform, qa): closed form or dense eigensolve.
  GapMethod independent_gap_method = GapMethod::closed_form;
  bool run_convergence = false;
  // Convergence runs on instances with >= min_dominant_states states of
  // mu > dominance_threshold instead of the plain ensemble.
  bool hard_instances = false;
  unsigned min_dominant_states = 5;
  double dominance_threshold = 0.1;
  double error_threshold = 0.1;  // |E_bar - E_ex| crossing level
  unsigned threads = 1;

  // Throws ConfigError.
  void validate() const;
};

// Flat "key=value" text, one field per line; lists are comma separated.
// Unknown keys and malformed values raise ConfigError naming the line.
EnsembleConfig parse_ensemble_config(const std::string& text);
EnsembleConfig load_ensemble_config(const std::filesystem::path& path);
std::string format_ensemble_config(const EnsembleConfig& config);

// Seed of instance `index` in the (n) ensemble; independent of temperature
// and of processing order.
std::uint64_t instance_seed(std::uint64_t master_seed, unsigned n, std::size_t index);
std::vector<SKInstance> ensemble_instances(const EnsembleConfig& config, unsigned n);

// First `count` generated instances (in deterministic scan order) whose
// target at `temperature` has at least min_dominant states above threshold.
std::vector<SKInstance> select_hard_instances(std::uint64_t master_seed, unsigned n, double temperature,
                                              std::size_t count, unsigned min_dominant, double threshold,
                                              std::size_t max_scan = 1000000);

// Runs task(i) for i in [0, count) on up to `threads` workers. The first
// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

// Throws ConfigError on empty input.
MeanStd aggregate(std::span<const double> values);

enum class FitModel { gap_vs_n, tv_vs_steps, tv_vs_n };

std::string_view to_string(FitModel model);
FitModel parse_fit_model(std::string_view name);

struct FitResult {
  FitModel model = FitModel::gap_vs_n;
  double exponent = 0.0;
  double std_error = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

// OLS on the linearized model:
//   gap_vs_n    : y ~ 2^(-alpha N)   -> log2 y against N,     exponent alpha
//   tv_vs_steps : y ~ t^(-alpha)     -> ln y against ln t,     exponent alpha
//   tv_vs_n     : y ~ 2^(gamma N)    -> log2 y against N,     exponent gamma
// Throws std::domain_error for y <= 0 and ConfigError for < 3 points.
FitResult fit_power_law(std::span<const std::pair<double, double>> points, FitModel model);

// One line per (n, T, kernel, instance). tau_star is NaN for classical kernels.
struct GapRecord {
  unsigned n = 0;
  double temperature = 0.0;
  KernelKind kernel = KernelKind::local;
  std::size_t instance = 0;
  std::string instance_id;
  double tau_star = 0.0;
  double gap = 0.0;
};

struct GapSummary {
  unsigned n = 0;
  double temperature = 0.0;
  KernelKind kernel = KernelKind::local;
  MeanStd gap;
  std::size_t count = 0;
};

struct GapSweepResult {
  std::vector<GapRecord> records;
  std::vector<GapSummary> summary;

  const GapSummary& find(unsigned n, double temperature, KernelKind kernel) const;
};

GapSweepResult run_gap_sweep(const EnsembleConfig& config);
// Same, on caller-supplied instances (all of one spin count).
GapSweepResult run_gap_sweep(const EnsembleConfig& config, std::span<const SKInstance> instances);

// Gap of one kernel at one point; qa uses the policy and returns tau* through tau_out.
double kernel_gap(const EnsembleConfig& config, KernelKind kernel, std::span<const double> energies, unsigned n,
                  const TargetDistribution& target, double* tau_out = nullptr);

// First step t from which `series` (index t-1 for step t) stays <= threshold
// up to the end; nullopt if the last value is above threshold.
std::optional<std::size_t> crossing_step(std::span<const double> series, double threshold);

struct ReplicaCheckpoint {
  unsigned replica = 0;
  std::size_t checkpoint = 0;
  double abs_error = 0.0;
  double tv = 0.0;
};

// Chains of one kernel on one instance.
struct KernelConvergence {
  std::string instance_id;
  unsigned n = 0;
  double temperature = 0.0;
  KernelKind kernel = KernelKind::local;
  double tau = 0.0;  // qa only
  double exact_energy = 0.0;
  std::vector<double> mean_abs_error;  // per step, across replicas
  std::vector<double> std_abs_error;
  std::vector<std::size_t> checkpoints;
  std::vector<double> mean_tv;
  std::vector<double> std_tv;
  std::optional<std::size_t> crossing;  // of mean_abs_error at the error threshold
  MeanStd acceptance;                   // per-replica acceptance rates
  MeanStd accept_prob;                  // per-replica mean exp(log A)
  std::vector<double> hamming_cdf;      // averaged over replicas, d = 0..n
  MeanStd median_delta_e;               // per-replica median |dE|
  std::vector<ReplicaCheckpoint> replicas;
};

struct ConvergenceSweepResult {
  std::vector<KernelConvergence> runs;  // instance-major, kernels in config order
};

ConvergenceSweepResult run_convergence_sweep(const EnsembleConfig& config);
ConvergenceSweepResult run_convergence_sweep(const EnsembleConfig& config, std::span<const SKInstance> instances,
                                             double temperature);

// CSV outputs. All numbers in "%.17g", header row first.
void write_gap_sweep_csv(const GapSweepResult& result, const std::filesystem::path& path);
void write_gap_summary_csv(const GapSweepResult& result, const std::filesystem::path& path);
void write_tau_hist_csv(const GapSweepResult& result, const TauSearchOptions& range, const std::filesystem::path& path);
void write_convergence_csv(const ConvergenceSweepResult& result, const std::filesystem::path& path);
// One fitted exponent per kernel; temperature is set for gap fits only.
struct FitRow {
  std::string kernel;
  std::optional<double> temperature;
  FitResult fit;
};

// Columns model,kernel,exponent,std_error,T (T empty when not applicable).
void write_fits_csv(std::span<const FitRow> fits, const std::filesystem::path& path);

// Readers for the fit command. Schema violations raise ParseError with the
// 1-based row number (header = row 1).
std::vector<GapRecord> read_gap_sweep_csv(const std::filesystem::path& path);
struct ConvergenceRow {
  std::string instance_id;
  unsigned n = 0;  // parsed from the instance id
  KernelKind kernel = KernelKind::local;
  unsigned replica = 0;
  std::size_t checkpoint = 0;
  double abs_error = 0.0;
  double tv = 0.0;
};
std::vector<ConvergenceRow> read_convergence_csv(const std::filesystem::path& path);

// Fits per kernel from sweep tables. gap_vs_n uses the ensemble-mean gap at
// each n (single temperature required, or pass one). tv_vs_steps averages TV
// per checkpoint and drops checkpoints in the first decade; tv_vs_n uses the
// mean TV at the final checkpoint of each n.
std::vector<FitRow> fit_gap_records(std::span<const GapRecord> records, std::optional<double> temperature);
std::vector<FitRow> fit_convergence_rows(std::span<const ConvergenceRow> rows, FitModel model);

std::string format_number(double v);

}  // namespace qamc
