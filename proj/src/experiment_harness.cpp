#include "qamc/experiment_harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "qamc/errors.hpp"
#include "qamc/gibbs_target.hpp"
#include "qamc/mh_chain.hpp"
#include "qamc/qa_engine.hpp"
#include "qamc/rng.hpp"

namespace qamc {

namespace {

constexpr std::uint64_t kHardScanTag = 0x68617264;  // "hard"
constexpr std::uint64_t kChainTag = 0x636861696e;   // "chain"

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
std::optional<T> to_number(std::string_view tok) {
  tok = trim(tok);
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || tok.empty()) return std::nullopt;
  return value;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join_numbers(const auto& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      out += shortest(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

MeanStd accumulate_mean_std(double sum, double sum_sq, std::size_t count) {
  const double c = static_cast<double>(count);
  const double mean = sum / c;
  return MeanStd{mean, std::sqrt(std::max(0.0, sum_sq / c - mean * mean))};
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration

TauPolicy TauPolicy::parse(const std::string& text) {
  TauPolicy p;
  if (text == "auto") {
    p.mode = Mode::automatic;
  } else if (text == "optimize") {
    p.mode = Mode::optimize;
  } else if (text.rfind("fixed:", 0) == 0) {
    const auto v = to_number<double>(std::string_view(text).substr(6));
    if (!v || !(*v > 0.0)) throw ConfigError("bad fixed annealing time in '" + text + "'");
    p.mode = Mode::fixed;
    p.fixed_tau = *v;
  } else {
    throw ConfigError("tau must be 'auto', 'optimize' or 'fixed:<value>', got '" + text + "'");
  }
  return p;
}

std::string TauPolicy::to_string() const {
  switch (mode) {
    case Mode::automatic:
      return "auto";
    case Mode::optimize:
      return "optimize";
    case Mode::fixed:
      return "fixed:" + format_number(fixed_tau);
  }
  return "auto";
}

bool TauPolicy::optimizes_at(double temperature) const {
  switch (mode) {
    case Mode::automatic:
      return temperature < high_temperature;
    case Mode::optimize:
      return true;
    case Mode::fixed:
      return false;
  }
  return false;
}

double TauPolicy::fixed_value_at(double temperature) const {
  (void)temperature;
  return mode == Mode::fixed ? fixed_tau : high_temperature_tau;
}

void EnsembleConfig::validate() const {
  if (n_values.empty()) throw ConfigError("n_values must not be empty");
  for (unsigned n : n_values)
    if (n < kMinSpins || n > kMaxSpins) throw ConfigError("n=" + std::to_string(n) + " outside supported range [2, 14]");
  if (temperatures.empty()) throw ConfigError("temperatures must not be empty");
  for (double t : temperatures)
    if (!(t > 0.0)) throw ConfigError("temperatures must be positive");
  if (instances_per_point < 1) throw ConfigError("instances_per_point must be >= 1");
  if (kernels.empty()) throw ConfigError("kernels must not be empty");
  if (chain_steps < 1) throw ConfigError("chain_steps must be >= 1");
  if (chain_replicas < 1) throw ConfigError("chain_replicas must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(error_threshold > 0.0)) throw ConfigError("error_threshold must be positive");
  if (tau_search.budget < 10) throw ConfigError("tau_budget must be at least 10");
}

EnsembleConfig parse_ensemble_config(const std::string& text) {
  EnsembleConfig c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> ConfigError {
    return ConfigError("config line " + std::to_string(line_no) + ": " + what);
  };
  auto parse_bool = [&](std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw fail("expected true/false, got '" + std::string(v) + "'");
  };
  auto number = [&]<class T>(std::string_view v, T*) {
    auto x = to_number<T>(v);
    if (!x) throw fail("bad number '" + std::string(v) + "'");
    return *x;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));

    if (key == "n_values") {
      c.n_values.clear();
      for (auto tok : split(value, ',')) c.n_values.push_back(number(tok, static_cast<unsigned*>(nullptr)));
    } else if (key == "temperatures") {
      c.temperatures.clear();
      for (auto tok : split(value, ',')) c.temperatures.push_back(number(tok, static_cast<double*>(nullptr)));
    } else if (key == "instances_per_point") {
      c.instances_per_point = number(value, static_cast<unsigned*>(nullptr));
    } else if (key == "kernels") {
      c.kernels.clear();
      try {
        for (auto tok : split(value, ',')) c.kernels.push_back(parse_kernel_kind(tok));
      } catch (const std::invalid_argument& e) {
        throw fail(e.what());
      }
    } else if (key == "chain_steps") {
      c.chain_steps = number(value, static_cast<std::size_t*>(nullptr));
    } else if (key == "chain_replicas") {
      c.chain_replicas = number(value, static_cast<unsigned*>(nullptr));
    } else if (key == "master_seed") {
      c.master_seed = number(value, static_cast<std::uint64_t*>(nullptr));
    } else if (key == "tau") {
      try {
        const auto keep = c.tau;
        c.tau = TauPolicy::parse(std::string(value));
        c.tau.high_temperature = keep.high_temperature;
        c.tau.high_temperature_tau = keep.high_temperature_tau;
      } catch (const ConfigError& e) {
        throw fail(e.what());
      }
    } else if (key == "high_temperature") {
      c.tau.high_temperature = number(value, static_cast<double*>(nullptr));
    } else if (key == "high_temperature_tau") {
      c.tau.high_temperature_tau = number(value, static_cast<double*>(nullptr));
    } else if (key == "tau_min") {
      c.tau_search.tau_min = number(value, static_cast<double*>(nullptr));
    } else if (key == "tau_max") {
      c.tau_search.tau_max = number(value, static_cast<double*>(nullptr));
    } else if (key == "tau_points_per_decade") {
      c.tau_search.points_per_decade = number(value, static_cast<unsigned*>(nullptr));
    } else if (key == "tau_budget") {
      c.tau_search.budget = number(value, static_cast<unsigned*>(nullptr));
    } else if (key == "tau_rel_tol") {
      c.tau_search.rel_tol = number(value, static_cast<double*>(nullptr));
    } else if (key == "independent_gap_method") {
      if (value == "closed_form") {
        c.independent_gap_method = GapMethod::closed_form;
      } else if (value == "dense") {
        c.independent_gap_method = GapMethod::dense;
      } else {
        throw fail("independent_gap_method must be closed_form or dense");
      }
    } else if (key == "run_convergence") {
      c.run_convergence = parse_bool(value);
    } else if (key == "hard_instances") {
      c.hard_instances = parse_bool(value);
    } else if (key == "min_dominant_states") {
      c.min_dominant_states = number(value, static_cast<unsigned*>(nullptr));
    } else if (key == "dominance_threshold") {
      c.dominance_threshold = number(value, static_cast<double*>(nullptr));
    } else if (key == "error_threshold") {
      c.error_threshold = number(value, static_cast<double*>(nullptr));
    } else if (key == "threads") {
      c.threads = number(value, static_cast<unsigned*>(nullptr));
    } else {
      throw fail("unknown key '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

EnsembleConfig load_ensemble_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ensemble_config(buf.str());
}

std::string format_ensemble_config(const EnsembleConfig& c) {
  std::vector<std::string> kernels;
  for (auto k : c.kernels) kernels.emplace_back(to_string(k));
  std::string kernel_list;
  for (const auto& k : kernels) kernel_list += (kernel_list.empty() ? "" : ",") + k;

  std::ostringstream out;
  out << "n_values=" << join_numbers(c.n_values) << "\n"
      << "temperatures=" << join_numbers(c.temperatures) << "\n"
      << "instances_per_point=" << c.instances_per_point << "\n"
      << "kernels=" << kernel_list << "\n"
      << "chain_steps=" << c.chain_steps << "\n"
      << "chain_replicas=" << c.chain_replicas << "\n"
      << "master_seed=" << c.master_seed << "\n"
      << "tau=" << c.tau.to_string() << "\n"
      << "high_temperature=" << shortest(c.tau.high_temperature) << "\n"
      << "high_temperature_tau=" << shortest(c.tau.high_temperature_tau) << "\n"
      << "tau_min=" << shortest(c.tau_search.tau_min) << "\n"
      << "tau_max=" << shortest(c.tau_search.tau_max) << "\n"
      << "tau_points_per_decade=" << c.tau_search.points_per_decade << "\n"
      << "tau_budget=" << c.tau_search.budget << "\n"
      << "tau_rel_tol=" << shortest(c.tau_search.rel_tol) << "\n"
      << "independent_gap_method="
      << (c.independent_gap_method == GapMethod::closed_form ? "closed_form" : "dense") << "\n"
      << "run_convergence=" << (c.run_convergence ? "true" : "false") << "\n"
      << "hard_instances=" << (c.hard_instances ? "true" : "false") << "\n"
      << "min_dominant_states=" << c.min_dominant_states << "\n"
      << "dominance_threshold=" << shortest(c.dominance_threshold) << "\n"
      << "error_threshold=" << shortest(c.error_threshold) << "\n"
      << "threads=" << c.threads << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Instances and scheduling

std::uint64_t instance_seed(std::uint64_t master_seed, unsigned n, std::size_t index) {
  return derive_seed(master_seed, {n, index});
}

std::vector<SKInstance> ensemble_instances(const EnsembleConfig& config, unsigned n) {
  std::vector<SKInstance> out;
  out.reserve(config.instances_per_point);
  for (std::size_t i = 0; i < config.instances_per_point; ++i)
    out.push_back(generate_instance(n, instance_seed(config.master_seed, n, i)));
  return out;
}

std::vector<SKInstance> select_hard_instances(std::uint64_t master_seed, unsigned n, double temperature,
                                              std::size_t count, unsigned min_dominant, double threshold,
                                              std::size_t max_scan) {
  std::vector<SKInstance> out;
  for (std::size_t k = 0; k < max_scan && out.size() < count; ++k) {
    SKInstance inst = generate_instance(n, derive_seed(master_seed, {kHardScanTag, n, k}));
    const auto target = build_target(inst, temperature);
    if (count_dominant_states(target, threshold) >= min_dominant) out.push_back(std::move(inst));
  }
  if (out.size() < count) {
    throw ConfigError("found only " + std::to_string(out.size()) + " of " + std::to_string(count) +
                      " instances with >= " + std::to_string(min_dominant) + " states above mu=" +
                      format_number(threshold) + " in " + std::to_string(max_scan) + " candidates");
  }
  return out;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task) {
  if (count == 0) return;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, threads), count));
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Statistics

MeanStd aggregate(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot aggregate an empty set of values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return MeanStd{mean, std::sqrt(var / static_cast<double>(values.size()))};
}

std::string_view to_string(FitModel model) {
  switch (model) {
    case FitModel::gap_vs_n:
      return "gap_vs_n";
    case FitModel::tv_vs_steps:
      return "tv_vs_steps";
    case FitModel::tv_vs_n:
      return "tv_vs_n";
  }
  return "?";
}

FitModel parse_fit_model(std::string_view name) {
  if (name == "gap_vs_n") return FitModel::gap_vs_n;
  if (name == "tv_vs_steps") return FitModel::tv_vs_steps;
  if (name == "tv_vs_n") return FitModel::tv_vs_n;
  throw std::invalid_argument("unknown fit model '" + std::string(name) + "' (expected gap_vs_n, tv_vs_steps, tv_vs_n)");
}

FitResult fit_power_law(std::span<const std::pair<double, double>> points, FitModel model) {
  if (points.size() < 3) throw ConfigError("a power-law fit needs at least 3 points");
  std::vector<double> xs, ys;
  for (const auto& [x, y] : points) {
    if (!(y > 0.0)) throw std::domain_error("power-law fit needs positive y values");
    if (model == FitModel::tv_vs_steps) {
      if (!(x > 0.0)) throw std::domain_error("tv_vs_steps fit needs positive step counts");
      xs.push_back(std::log(x));
      ys.push_back(std::log(y));
    } else {
      xs.push_back(x);
      ys.push_back(std::log2(y));
    }
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("power-law fit needs at least two distinct x values");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ssr += r * r;
  }
  FitResult fit;
  fit.model = model;
  fit.exponent = model == FitModel::tv_vs_n ? slope : -slope;
  fit.std_error = std::sqrt(ssr / (m - 2.0) / sxx);
  fit.intercept = intercept;
  fit.points = xs.size();
  return fit;
}

// ---------------------------------------------------------------------------
// Gap sweep

const GapSummary& GapSweepResult::find(unsigned n, double temperature, KernelKind kernel) const {
  for (const auto& s : summary)
    if (s.n == n && s.temperature == temperature && s.kernel == kernel) return s;
  throw std::out_of_range("no gap summary for the requested point");
}

double kernel_gap(const EnsembleConfig& config, KernelKind kernel, std::span<const double> energies, unsigned n,
                  const TargetDistribution& target, double* tau_out) {
  if (tau_out) *tau_out = std::numeric_limits<double>::quiet_NaN();
  switch (kernel) {
    case KernelKind::local:
      return spectral_gap(build_transition_matrix(target, KernelSpec::local(n)), target).gap;
    case KernelKind::uniform:
      if (config.independent_gap_method == GapMethod::closed_form) return uniform_gap(target);
      return spectral_gap(build_transition_matrix(target, KernelSpec::uniform(n)), target).gap;
    case KernelKind::qa: {
      const double temperature = target.beta > 0.0 ? 1.0 / target.beta : std::numeric_limits<double>::infinity();
      if (config.tau.optimizes_at(temperature)) {
        const auto best = optimize_tau(energies, n, target, config.tau_search, config.independent_gap_method);
        if (tau_out) *tau_out = best.tau_star;
        return best.gap_star;
      }
      const double tau = config.tau.fixed_value_at(temperature);
      if (tau_out) *tau_out = tau;
      return qa_gap(energies, n, target, tau, config.independent_gap_method);
    }
  }
  return 0.0;
}

namespace {

void summarize(GapSweepResult& result, const EnsembleConfig& config) {
  std::map<std::tuple<unsigned, double, int>, std::vector<double>> groups;
  for (const auto& r : result.records)
    groups[{r.n, r.temperature, static_cast<int>(r.kernel)}].push_back(r.gap);
  // Emit in config order so the table reads like the sweep definition.
  for (unsigned n : config.n_values) {
    for (double t : config.temperatures) {
      for (KernelKind k : config.kernels) {
        auto it = groups.find({n, t, static_cast<int>(k)});
        if (it == groups.end()) continue;
        result.summary.push_back(GapSummary{n, t, k, aggregate(it->second), it->second.size()});
        groups.erase(it);
      }
    }
  }
}

// All temperatures and kernels for one instance, in config order.
std::vector<GapRecord> gap_records_for(const EnsembleConfig& config, const SKInstance& inst, std::size_t index) {
  std::vector<GapRecord> out;
  const auto energies = all_energies(inst);
  for (double t : config.temperatures) {
    const auto target = build_target(energies, t);
    for (KernelKind k : config.kernels) {
      GapRecord r;
      r.n = inst.n();
      r.temperature = t;
      r.kernel = k;
      r.instance = index;
      r.instance_id = inst.instance_id();
      try {
        r.gap = kernel_gap(config, k, energies, inst.n(), target, &r.tau_star);
      } catch (const std::exception& e) {
        throw std::runtime_error("gap sweep failed at n=" + std::to_string(inst.n()) + ", T=" + format_number(t) +
                                 ", kernel=" + std::string(to_string(k)) + ", instance " + inst.instance_id() +
                                 ": " + e.what());
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

GapSweepResult run_gap_sweep(const EnsembleConfig& config, std::span<const SKInstance> instances) {
  config.validate();
  std::vector<std::vector<GapRecord>> slots(instances.size());
  parallel_for(instances.size(), config.threads,
               [&](std::size_t i) { slots[i] = gap_records_for(config, instances[i], i); });
  GapSweepResult result;
  for (auto& s : slots)
    for (auto& r : s) result.records.push_back(std::move(r));
  EnsembleConfig single = config;
  if (!instances.empty()) single.n_values = {instances.front().n()};
  summarize(result, single);
  return result;
}

GapSweepResult run_gap_sweep(const EnsembleConfig& config) {
  config.validate();
  struct Task {
    unsigned n;
    std::size_t index;
  };
  std::vector<Task> tasks;
  for (unsigned n : config.n_values)
    for (std::size_t i = 0; i < config.instances_per_point; ++i) tasks.push_back({n, i});

  std::vector<std::vector<GapRecord>> slots(tasks.size());
  parallel_for(tasks.size(), config.threads, [&](std::size_t k) {
    const auto& task = tasks[k];
    const auto inst = generate_instance(task.n, instance_seed(config.master_seed, task.n, task.index));
    slots[k] = gap_records_for(config, inst, task.index);
  });

  GapSweepResult result;
  for (auto& s : slots)
    for (auto& r : s) result.records.push_back(std::move(r));
  summarize(result, config);
  return result;
}

// ---------------------------------------------------------------------------
// Convergence sweep

std::optional<std::size_t> crossing_step(std::span<const double> series, double threshold) {
  if (series.empty() || series.back() > threshold) return std::nullopt;
  std::size_t t = series.size();
  while (t > 0 && series[t - 1] <= threshold) --t;
  return t + 1;
}

namespace {

std::vector<KernelConvergence> converge_instance(const EnsembleConfig& config, const SKInstance& inst,
                                                 double temperature) {
  const unsigned n = inst.n();
  const auto energies = all_energies(inst);
  const auto target = build_target(energies, temperature);
  const double exact = exact_mean_energy(target, energies);
  const std::size_t steps = config.chain_steps;

  std::vector<KernelConvergence> out;
  for (std::size_t ki = 0; ki < config.kernels.size(); ++ki) {
    const KernelKind kind = config.kernels[ki];
    KernelConvergence kc;
    kc.instance_id = inst.instance_id();
    kc.n = n;
    kc.temperature = temperature;
    kc.kernel = kind;
    kc.exact_energy = exact;
    kc.tau = std::numeric_limits<double>::quiet_NaN();

    std::optional<KernelSpec> kernel;
    if (kind == KernelKind::local) {
      kernel = KernelSpec::local(n);
    } else if (kind == KernelKind::uniform) {
      kernel = KernelSpec::uniform(n);
    } else {
      if (config.tau.optimizes_at(temperature)) {
        kc.tau = optimize_tau(energies, n, target, config.tau_search, config.independent_gap_method).tau_star;
      } else {
        kc.tau = config.tau.fixed_value_at(temperature);
      }
      kernel = KernelSpec::qa(qa_proposal(energies, n, kc.tau));
    }

    std::vector<double> err_sum(steps, 0.0), err_sq(steps, 0.0);
    std::vector<double> tv_sum, tv_sq;
    std::vector<double> acc, accp, medians;
    kc.hamming_cdf.assign(n + 1, 0.0);
    for (unsigned rep = 0; rep < config.chain_replicas; ++rep) {
      Stream stream = Stream::derive(config.master_seed, {kChainTag, inst.seed(), n, ki, rep});
      const SpinConfig init = random_configuration(n, stream);
      const ChainTrace trace = run_chain(inst, target, *kernel, steps, init, stream);
      const ObservableSeries obs = compute_observables(trace, energies, target, exact);
      for (std::size_t t = 0; t < steps; ++t) {
        err_sum[t] += obs.abs_error[t];
        err_sq[t] += obs.abs_error[t] * obs.abs_error[t];
      }
      if (tv_sum.empty()) {
        kc.checkpoints = obs.checkpoints;
        tv_sum.assign(obs.checkpoints.size(), 0.0);
        tv_sq.assign(obs.checkpoints.size(), 0.0);
      }
      for (std::size_t c = 0; c < obs.checkpoints.size(); ++c) {
        tv_sum[c] += obs.tv_to_target[c];
        tv_sq[c] += obs.tv_to_target[c] * obs.tv_to_target[c];
        kc.replicas.push_back(
            ReplicaCheckpoint{rep, obs.checkpoints[c], obs.abs_error[obs.checkpoints[c] - 1], obs.tv_to_target[c]});
      }
      acc.push_back(obs.acceptance_rate);
      accp.push_back(obs.mean_accept_prob);
      const auto ham = hamming_cumulative(trace, n);
      for (unsigned d = 0; d <= n; ++d) kc.hamming_cdf[d] += ham[d] / config.chain_replicas;
      medians.push_back(energy_gap_cumulative(trace, energies).median());
    }

    kc.mean_abs_error.resize(steps);
    kc.std_abs_error.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto ms = accumulate_mean_std(err_sum[t], err_sq[t], config.chain_replicas);
      kc.mean_abs_error[t] = ms.mean;
      kc.std_abs_error[t] = ms.std;
    }
    for (std::size_t c = 0; c < tv_sum.size(); ++c) {
      const auto ms = accumulate_mean_std(tv_sum[c], tv_sq[c], config.chain_replicas);
      kc.mean_tv.push_back(ms.mean);
      kc.std_tv.push_back(ms.std);
    }
    kc.crossing = crossing_step(kc.mean_abs_error, config.error_threshold);
    kc.acceptance = aggregate(acc);
    kc.accept_prob = aggregate(accp);
    kc.median_delta_e = aggregate(medians);
    out.push_back(std::move(kc));
  }
  return out;
}

}  // namespace

ConvergenceSweepResult run_convergence_sweep(const EnsembleConfig& config, std::span<const SKInstance> instances,
                                             double temperature) {
  config.validate();
  std::vector<std::vector<KernelConvergence>> slots(instances.size());
  parallel_for(instances.size(), config.threads, [&](std::size_t i) {
    try {
      slots[i] = converge_instance(config, instances[i], temperature);
    } catch (const std::exception& e) {
      throw std::runtime_error("convergence sweep failed at instance " + instances[i].instance_id() +
                               ", T=" + format_number(temperature) + ": " + e.what());
    }
  });
  ConvergenceSweepResult result;
  for (auto& s : slots)
    for (auto& r : s) result.runs.push_back(std::move(r));
  return result;
}

ConvergenceSweepResult run_convergence_sweep(const EnsembleConfig& config) {
  config.validate();
  ConvergenceSweepResult result;
  for (unsigned n : config.n_values) {
    for (double t : config.temperatures) {
      const auto instances =
          config.hard_instances
              ? select_hard_instances(config.master_seed, n, t, config.instances_per_point,
                                      config.min_dominant_states, config.dominance_threshold)
              : ensemble_instances(config, n);
      auto part = run_convergence_sweep(config, instances, t);
      for (auto& r : part.runs) result.runs.push_back(std::move(r));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV

void write_gap_sweep_csv(const GapSweepResult& result, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "n,T,kernel,instance,tau_star,gap\n";
  for (const auto& r : result.records) {
    out << r.n << ',' << format_number(r.temperature) << ',' << to_string(r.kernel) << ',' << r.instance_id << ','
        << (std::isnan(r.tau_star) ? std::string() : format_number(r.tau_star)) << ',' << format_number(r.gap)
        << '\n';
  }
}

void write_gap_summary_csv(const GapSweepResult& result, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "n,T,kernel,count,mean_gap,std_gap\n";
  for (const auto& s : result.summary) {
    out << s.n << ',' << format_number(s.temperature) << ',' << to_string(s.kernel) << ',' << s.count << ','
        << format_number(s.gap.mean) << ',' << format_number(s.gap.std) << '\n';
  }
}

void write_tau_hist_csv(const GapSweepResult& result, const TauSearchOptions& range, const std::filesystem::path& path) {
  // Quarter-decade bins over the search range.
  const double lo = std::log10(range.tau_min);
  const double hi = std::log10(range.tau_max);
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) * 4.0 - 1e-9)));
  std::map<std::pair<unsigned, double>, std::vector<std::size_t>> hist;
  for (const auto& r : result.records) {
    if (r.kernel != KernelKind::qa || std::isnan(r.tau_star)) continue;
    auto& h = hist[{r.n, r.temperature}];
    h.resize(bins, 0);
    const double pos = (std::log10(r.tau_star) - lo) / (hi - lo) * static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins) - 1.0));
    ++h[b];
  }
  auto out = open_out(path);
  out << "n,T,bin_lo,bin_hi,count\n";
  for (const auto& [key, counts] : hist) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double blo = std::pow(10.0, lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
      const double bhi = std::pow(10.0, lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(bins));
      out << key.first << ',' << format_number(key.second) << ',' << format_number(blo) << ','
          << format_number(bhi) << ',' << counts[b] << '\n';
    }
  }
}

void write_convergence_csv(const ConvergenceSweepResult& result, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "instance,kernel,replica,checkpoint,abs_err,tv\n";
  for (const auto& run : result.runs) {
    for (const auto& r : run.replicas) {
      out << run.instance_id << ',' << to_string(run.kernel) << ',' << r.replica << ',' << r.checkpoint << ','
          << format_number(r.abs_error) << ',' << format_number(r.tv) << '\n';
    }
  }
}

void write_fits_csv(std::span<const FitRow> fits, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "model,kernel,exponent,std_error,T\n";
  for (const auto& row : fits) {
    out << to_string(row.fit.model) << ',' << row.kernel << ',' << format_number(row.fit.exponent) << ','
        << format_number(row.fit.std_error) << ','
        << (row.temperature ? format_number(*row.temperature) : std::string()) << '\n';
  }
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_numbers;
};

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (auto c : split(line, ',')) cells.emplace_back(c);
    if (row == 1) {
      if (cells != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ParseError("unexpected header, want '" + want + "'", row).in_file(path.string());
      }
      table.header = cells;
      continue;
    }
    if (cells.size() != expected_header.size()) {
      throw ParseError("expected " + std::to_string(expected_header.size()) + " columns, got " +
                           std::to_string(cells.size()),
                       row)
          .in_file(path.string());
    }
    table.rows.push_back(std::move(cells));
    table.row_numbers.push_back(row);
  }
  if (row == 0) throw ParseError("empty file", 0).in_file(path.string());
  return table;
}

template <class T>
T cell(const std::vector<std::string>& row, std::size_t col, std::size_t row_no, const std::filesystem::path& path,
       const char* what) {
  auto v = to_number<T>(row[col]);
  if (!v) throw ParseError(std::string("bad ") + what + " '" + row[col] + "'", row_no).in_file(path.string());
  return *v;
}

unsigned n_from_instance_id(const std::string& id) {
  // sk-n<N>-<seed>
  if (id.rfind("sk-n", 0) != 0) return 0;
  const auto dash = id.find('-', 4);
  auto v = to_number<unsigned>(std::string_view(id).substr(4, dash == std::string::npos ? std::string::npos : dash - 4));
  return v.value_or(0);
}

}  // namespace

std::vector<GapRecord> read_gap_sweep_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, {"n", "T", "kernel", "instance", "tau_star", "gap"});
  std::vector<GapRecord> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::size_t row_no = table.row_numbers[i];
    GapRecord g;
    g.n = cell<unsigned>(r, 0, row_no, path, "n");
    g.temperature = cell<double>(r, 1, row_no, path, "T");
    try {
      g.kernel = parse_kernel_kind(r[2]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), row_no).in_file(path.string());
    }
    g.instance_id = r[3];
    g.instance = i;
    g.tau_star = r[4].empty() ? std::numeric_limits<double>::quiet_NaN() : cell<double>(r, 4, row_no, path, "tau_star");
    g.gap = cell<double>(r, 5, row_no, path, "gap");
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<ConvergenceRow> read_convergence_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, {"instance", "kernel", "replica", "checkpoint", "abs_err", "tv"});
  std::vector<ConvergenceRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::size_t row_no = table.row_numbers[i];
    ConvergenceRow c;
    c.instance_id = r[0];
    c.n = n_from_instance_id(r[0]);
    try {
      c.kernel = parse_kernel_kind(r[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), row_no).in_file(path.string());
    }
    c.replica = cell<unsigned>(r, 2, row_no, path, "replica");
    c.checkpoint = cell<std::size_t>(r, 3, row_no, path, "checkpoint");
    c.abs_error = cell<double>(r, 4, row_no, path, "abs_err");
    c.tv = cell<double>(r, 5, row_no, path, "tv");
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<FitRow> fit_gap_records(std::span<const GapRecord> records, std::optional<double> temperature) {
  if (!temperature) {
    std::vector<double> temps;
    for (const auto& r : records)
      if (std::find(temps.begin(), temps.end(), r.temperature) == temps.end()) temps.push_back(r.temperature);
    if (temps.size() != 1)
      throw ConfigError("gap table holds " + std::to_string(temps.size()) + " temperatures; pick one");
    temperature = temps.front();
  }
  // kernel -> n -> gaps
  std::map<std::string, std::map<unsigned, std::vector<double>>> groups;
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (r.temperature != *temperature) continue;
    const std::string k(to_string(r.kernel));
    if (!groups.count(k)) order.push_back(k);
    groups[k][r.n].push_back(r.gap);
  }
  std::vector<FitRow> fits;
  for (const auto& k : order) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [n, gaps] : groups[k]) pts.emplace_back(static_cast<double>(n), aggregate(gaps).mean);
    fits.push_back(FitRow{k, temperature, fit_power_law(pts, FitModel::gap_vs_n)});
  }
  return fits;
}

std::vector<FitRow> fit_convergence_rows(std::span<const ConvergenceRow> rows, FitModel model) {
  if (model == FitModel::gap_vs_n) throw ConfigError("gap_vs_n fits need a gap sweep table");
  std::vector<std::string> order;
  // kernel -> key (checkpoint or n) -> tv values
  std::map<std::string, std::map<double, std::vector<double>>> groups;
  // For tv_vs_n: last checkpoint per n.
  std::map<unsigned, std::size_t> final_checkpoint;
  for (const auto& r : rows) final_checkpoint[r.n] = std::max(final_checkpoint[r.n], r.checkpoint);
  for (const auto& r : rows) {
    const std::string k(to_string(r.kernel));
    if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
    if (model == FitModel::tv_vs_steps) {
      if (r.checkpoint < 10) continue;  // first decade is transient
      groups[k][static_cast<double>(r.checkpoint)].push_back(r.tv);
    } else {
      if (r.n == 0) throw ConfigError("tv_vs_n needs instance ids of the form sk-n<N>-<seed>");
      if (r.checkpoint != final_checkpoint[r.n]) continue;
      groups[k][static_cast<double>(r.n)].push_back(r.tv);
    }
  }
  std::vector<FitRow> fits;
  for (const auto& k : order) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [x, tvs] : groups[k]) pts.emplace_back(x, aggregate(tvs).mean);
    fits.push_back(FitRow{k, std::nullopt, fit_power_law(pts, model)});
  }
  return fits;
}

}  // namespace qamc
