#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qamc/errors.hpp"
#include "qamc/experiment_harness.hpp"
#include "qamc/gibbs_target.hpp"
#include "qamc/mh_chain.hpp"
#include "qamc/qa_engine.hpp"
#include "qamc/rng.hpp"
#include "qamc/sk_instance.hpp"
#include "qamc/spectral_analysis.hpp"
#include "svg_plot.hpp"

#ifndef QAMC_VERSION
#define QAMC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace qamc::tools {

namespace {

std::optional<double> parse_double(const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

double parse_temperature(const std::string& text) {
  const auto v = parse_double(text);
  if (!v || !(*v > 0.0)) throw ConfigError("temperature must be a positive number or 'inf', got '" + text + "'");
  return *v;
}

// "optimize" or "fixed:<tau>".
struct TauChoice {
  bool optimize = true;
  double value = 0.0;
};

TauChoice parse_tau_choice(const std::string& text) {
  if (text == "optimize") return {};
  if (text.rfind("fixed:", 0) == 0) {
    const auto v = parse_double(text.substr(6));
    if (v && *v > 0.0) return {false, *v};
  }
  throw ConfigError("--tau must be 'optimize' or 'fixed:<positive value>', got '" + text + "'");
}

const CLI::Validator kTemperature(
    [](std::string& s) {
      try {
        parse_temperature(s);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    },
    "TEMP", "temperature");

const CLI::Validator kTauChoice(
    [](std::string& s) {
      try {
        parse_tau_choice(s);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    },
    "optimize|fixed:V", "tau");

const CLI::Validator kSpinCount(
    [](std::string& s) {
      unsigned n = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
      if (ec != std::errc{} || ptr != s.data() + s.size() || n < kMinSpins || n > kMaxSpins) {
        return "n must be an integer in [" + std::to_string(kMinSpins) + ", " + std::to_string(kMaxSpins) +
               "] (all 2^n states are enumerated), got '" + s + "'";
      }
      return std::string();
    },
    "2..14", "spin count");

std::string number(double v) { return format_number(v); }

std::string pretty(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_manifest(const fs::path& dir, const CLI::App& sub, int argc, const char* const* argv,
                    std::uint64_t master_seed, const ordered_json& extra = {}) {
  ordered_json m;
  m["tool"] = "qamc";
  m["version"] = QAMC_VERSION;
  m["command"] = sub.get_name();
  std::vector<std::string> args(argv, argv + argc);
  m["argv"] = args;
  ordered_json flags = ordered_json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
    const auto& results = opt->results();
    if (results.empty()) {
      const auto def = opt->get_default_str();
      if (!def.empty()) flags[opt->get_name()] = def;
    } else if (opt->get_type_size() == 0) {
      flags[opt->get_name()] = true;
    } else {
      flags[opt->get_name()] = results.size() == 1 ? ordered_json(results.front()) : ordered_json(results);
    }
  }
  m["flags"] = flags;
  m["master_seed"] = master_seed;
  m["output_directory"] = fs::absolute(dir).lexically_normal().string();
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

KernelSpec make_kernel(KernelKind kind, std::span<const double> energies, unsigned n, double tau) {
  switch (kind) {
    case KernelKind::local:
      return KernelSpec::local(n);
    case KernelKind::uniform:
      return KernelSpec::uniform(n);
    case KernelKind::qa:
      return KernelSpec::qa(qa_proposal(energies, n, tau));
  }
  throw std::logic_error("unknown kernel");
}

struct SearchFlags {
  double tau_min = 1e-2;
  double tau_max = 1e3;
  unsigned budget = 64;

  TauSearchOptions options() const {
    TauSearchOptions o;
    o.tau_min = tau_min;
    o.tau_max = tau_max;
    o.budget = budget;
    return o;
  }
};

void add_search_flags(CLI::App* cmd, SearchFlags& f) {
  cmd->add_option("--tau-min", f.tau_min, "Lower end of the annealing-time search")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tau-max", f.tau_max, "Upper end of the annealing-time search")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tau-budget", f.budget, "Objective evaluations for the annealing-time search")
      ->capture_default_str()
      ->check(CLI::Range(10U, 100000U));
}

// Resolves the QA annealing time, writing the scan when optimizing.
double resolve_tau(const std::string& tau_flag, const SearchFlags& search, std::span<const double> energies, unsigned n,
                   const TargetDistribution& target, const fs::path& scan_path, std::ostream& out) {
  const TauChoice choice = parse_tau_choice(tau_flag);
  if (!choice.optimize) return choice.value;
  const auto result = optimize_tau(energies, n, target, search.options(), GapMethod::closed_form);
  auto csv = open_out(scan_path);
  csv << "tau,gap\n";
  for (const auto& p : result.scan) csv << number(p.tau) << ',' << number(p.gap) << '\n';
  out << "tau scan: " << result.scan.size() << " evaluations, tau* = " << pretty(result.tau_star)
      << " (" << scan_path.string() << ")\n";
  return result.tau_star;
}

// ---------------------------------------------------------------------------

struct GenFlags {
  unsigned n = 0;
  std::uint64_t seed = 1;
  unsigned count = 1;
  fs::path out = ".";
};

int cmd_gen(const GenFlags& f, const CLI::App& sub, int argc, const char* const* argv, std::ostream& out) {
  ensure_dir(f.out);
  write_manifest(f.out, sub, argc, argv, f.seed);
  for (unsigned i = 0; i < f.count; ++i) {
    const auto inst = generate_instance(f.n, instance_seed(f.seed, f.n, i));
    char name[96];
    std::snprintf(name, sizeof name, "sk_n%u_seed%llu_%03u.txt", f.n, static_cast<unsigned long long>(f.seed), i);
    const fs::path path = f.out / name;
    save_instance(inst, path);
    out << path.string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GapFlags {
  fs::path instance;
  std::string temp;
  std::string kernel = "qa";
  std::string tau = "optimize";
  double eps = 0.01;
  std::string method = "auto";
  fs::path out = ".";
  SearchFlags search;
};

int cmd_gap(const GapFlags& f, const CLI::App& sub, int argc, const char* const* argv, std::ostream& out) {
  ensure_dir(f.out);
  const auto inst = load_instance(f.instance);
  write_manifest(f.out, sub, argc, argv, inst.seed());
  const unsigned n = inst.n();
  const double temperature = parse_temperature(f.temp);
  const KernelKind kind = parse_kernel_kind(f.kernel);
  const auto energies = all_energies(inst);
  const auto target = build_target(energies, temperature);

  double tau = std::numeric_limits<double>::quiet_NaN();
  if (kind == KernelKind::qa) tau = resolve_tau(f.tau, f.search, energies, n, target, f.out / "tau_scan.csv", out);
  const KernelSpec kernel = make_kernel(kind, energies, n, tau);

  const bool dense = kind == KernelKind::local || f.method == "dense" || (f.method == "auto" && n <= 10);
  double gap = 0.0, lambda2 = 0.0, lambda_min = std::numeric_limits<double>::quiet_NaN();
  if (dense) {
    const auto report = spectral_gap(build_transition_matrix(target, kernel), target);
    gap = report.gap;
    lambda2 = report.lambda2;
    lambda_min = report.lambda_min;
  } else {
    gap = kind == KernelKind::uniform ? uniform_gap(target) : independence_gap(target, *kernel.proposal());
    lambda2 = 1.0 - gap;
  }
  const auto bounds = mixing_bounds(gap, f.eps, min_probability(target));

  auto csv = open_out(f.out / "gap_report.csv");
  csv << "instance,kernel,T,n,tau,method,gap,lambda2,lambda_min,eps,mix_lower,mix_upper\n";
  csv << inst.instance_id() << ',' << to_string(kind) << ',' << number(temperature) << ',' << n << ','
      << (std::isnan(tau) ? std::string() : number(tau)) << ',' << (dense ? "dense" : "closed_form") << ','
      << number(gap) << ',' << number(lambda2) << ',' << (std::isnan(lambda_min) ? std::string() : number(lambda_min))
      << ',' << number(f.eps) << ',' << number(bounds.lower) << ',' << number(bounds.upper) << '\n';

  out << "instance   " << inst.instance_id() << '\n'
      << "kernel     " << to_string(kind);
  if (!std::isnan(tau)) out << " (tau = " << pretty(tau) << ")";
  out << '\n'
      << "T          " << pretty(temperature) << '\n'
      << "gap        " << number(gap) << '\n'
      << "lambda2    " << pretty(lambda2) << '\n';
  if (!std::isnan(lambda_min)) out << "lambda_min " << pretty(lambda_min) << '\n';
  if (bounds.bounded) {
    out << "mixing     " << pretty(bounds.lower) << " <= t_eps <= " << pretty(bounds.upper) << "  (eps = "
        << pretty(f.eps) << ")\n";
  } else {
    out << "mixing     unbounded (gap is zero)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct RunFlags {
  fs::path instance;
  std::string temp;
  std::string kernel = "qa";
  std::string tau = "optimize";
  std::size_t steps = 100000;
  unsigned replicas = 8;
  std::uint64_t seed = 1;
  std::size_t stride = 0;
  double threshold = 0.1;
  unsigned threads = 1;
  bool plot = false;
  fs::path out = ".";
  SearchFlags search;
};

int cmd_run(const RunFlags& f, const CLI::App& sub, int argc, const char* const* argv, std::ostream& out) {
  ensure_dir(f.out);
  const auto inst = load_instance(f.instance);
  write_manifest(f.out, sub, argc, argv, f.seed);
  const unsigned n = inst.n();
  const double temperature = parse_temperature(f.temp);
  const KernelKind kind = parse_kernel_kind(f.kernel);
  const auto energies = all_energies(inst);
  const auto target = build_target(energies, temperature);
  const double exact = exact_mean_energy(target, energies);

  double tau = std::numeric_limits<double>::quiet_NaN();
  if (kind == KernelKind::qa) tau = resolve_tau(f.tau, f.search, energies, n, target, f.out / "tau_scan.csv", out);
  const KernelSpec kernel = make_kernel(kind, energies, n, tau);

  std::vector<ChainTrace> traces(f.replicas);
  std::vector<ObservableSeries> series(f.replicas);
  parallel_for(f.replicas, f.threads, [&](std::size_t r) {
    Stream stream = Stream::derive(f.seed, {r});
    const SpinConfig init = random_configuration(n, stream);
    traces[r] = run_chain(inst, target, kernel, f.steps, init, stream);
    series[r] = compute_observables(traces[r], energies, target, exact);
  });

  const std::size_t stride = f.stride > 0 ? f.stride : std::max<std::size_t>(1, f.steps / 10000);
  {
    auto csv = open_out(f.out / "energy.csv");
    csv << "replica,step,energy_running_mean,abs_error\n";
    for (unsigned r = 0; r < f.replicas; ++r) {
      for (std::size_t t = 1; t <= f.steps; ++t) {
        if (t != 1 && t % stride != 0 && t != f.steps) continue;
        csv << r << ',' << t << ',' << number(series[r].running_mean_energy[t - 1]) << ','
            << number(series[r].abs_error[t - 1]) << '\n';
      }
    }
  }

  const auto& checkpoints = series.front().checkpoints;
  std::vector<double> mean_err(f.steps, 0.0), mean_tv(checkpoints.size(), 0.0);
  for (const auto& s : series) {
    for (std::size_t t = 0; t < f.steps; ++t) mean_err[t] += s.abs_error[t] / f.replicas;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) mean_tv[c] += s.tv_to_target[c] / f.replicas;
  }
  {
    auto csv = open_out(f.out / "convergence.csv");
    csv << "replica,checkpoint,energy_running_mean,abs_err,tv\n";
    for (unsigned r = 0; r < f.replicas; ++r) {
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const std::size_t t = checkpoints[c];
        csv << r << ',' << t << ',' << number(series[r].running_mean_energy[t - 1]) << ','
            << number(series[r].abs_error[t - 1]) << ',' << number(series[r].tv_to_target[c]) << '\n';
      }
    }
  }
  {
    auto csv = open_out(f.out / "summary.csv");
    csv << "checkpoint,mean_abs_err,std_abs_err,mean_tv,std_tv\n";
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      std::vector<double> errs, tvs;
      for (const auto& s : series) {
        errs.push_back(s.abs_error[checkpoints[c] - 1]);
        tvs.push_back(s.tv_to_target[c]);
      }
      const auto e = aggregate(errs), v = aggregate(tvs);
      csv << checkpoints[c] << ',' << number(e.mean) << ',' << number(e.std) << ',' << number(v.mean) << ','
          << number(v.std) << '\n';
    }
  }
  const auto hamming = hamming_cumulative(traces, n);
  {
    auto csv = open_out(f.out / "hamming.csv");
    csv << "d,p_cum\n";
    for (unsigned d = 0; d <= n; ++d) csv << d << ',' << number(hamming[d]) << '\n';
  }
  const auto delta_e = energy_gap_cumulative(traces, energies);
  {
    auto csv = open_out(f.out / "delta_e.csv");
    csv << "delta_e,p_cum\n";
    for (std::size_t i = 0; i < delta_e.values.size(); ++i)
      csv << number(delta_e.values[i]) << ',' << number(delta_e.cdf[i]) << '\n';
  }
  std::vector<double> acc, accp;
  {
    auto csv = open_out(f.out / "acceptance.csv");
    csv << "replica,acceptance_rate,mean_accept_prob\n";
    for (unsigned r = 0; r < f.replicas; ++r) {
      acc.push_back(series[r].acceptance_rate);
      accp.push_back(series[r].mean_accept_prob);
      csv << r << ',' << number(acc.back()) << ',' << number(accp.back()) << '\n';
    }
  }

  if (f.plot) {
    std::vector<double> steps_axis(f.steps);
    for (std::size_t t = 0; t < f.steps; ++t) steps_axis[t] = static_cast<double>(t + 1);
    std::vector<double> cp(checkpoints.begin(), checkpoints.end());
    const std::string label(to_string(kind));
    write_svg(f.out / "energy.svg",
              {"Running-mean energy error", "MC steps", "|E_bar - E_exact|", true, true},
              {Series{label, steps_axis, mean_err},
               Series{"threshold", {1.0, static_cast<double>(f.steps)}, {f.threshold, f.threshold}}});
    write_svg(f.out / "tv.svg", {"Total variation distance to target", "MC steps", "TV", true, true},
              {Series{label, cp, mean_tv}});
    std::vector<double> ds(n + 1);
    for (unsigned d = 0; d <= n; ++d) ds[d] = d;
    write_svg(f.out / "hamming.svg", {"Proposal flip count", "d", "P(D <= d)", false, false},
              {Series{label, ds, hamming}});
  }

  const auto crossing = crossing_step(mean_err, f.threshold);
  out << "instance    " << inst.instance_id() << '\n'
      << "kernel      " << to_string(kind);
  if (!std::isnan(tau)) out << " (tau = " << pretty(tau) << ")";
  out << '\n'
      << "exact <E>   " << pretty(exact) << '\n'
      << "final |dE|  " << pretty(mean_err.back()) << "  (mean over " << f.replicas << " replicas)\n"
      << "final TV    " << pretty(mean_tv.back()) << '\n'
      << "crossing    "
      << (crossing ? std::to_string(*crossing) : std::string("not reached")) << "  (threshold " << pretty(f.threshold)
      << ")\n"
      << "acceptance  " << pretty(aggregate(acc).mean) << '\n'
      << "median |dE| " << pretty(delta_e.median()) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepFlags {
  fs::path config;
  fs::path out = ".";
  unsigned threads = 1;
};

int cmd_sweep(const SweepFlags& f, const CLI::Option* threads_opt, const CLI::App& sub, int argc,
              const char* const* argv, std::ostream& out, std::ostream& err) {
  EnsembleConfig config = load_ensemble_config(f.config);
  if (threads_opt->count() > 0) config.threads = f.threads;
  config.validate();
  ensure_dir(f.out);
  write_manifest(f.out, sub, argc, argv, config.master_seed, {{"config", format_ensemble_config(config)}});

  err << "gap sweep: n = " << config.n_values.front() << ".." << config.n_values.back() << ", "
      << config.temperatures.size() << " temperature(s), " << config.instances_per_point << " instances\n";
  const auto gaps = run_gap_sweep(config);
  write_gap_sweep_csv(gaps, f.out / "gap_sweep.csv");
  write_gap_summary_csv(gaps, f.out / "gap_summary.csv");
  write_tau_hist_csv(gaps, config.tau_search, f.out / "tau_hist.csv");

  std::vector<FitRow> fits;
  if (config.n_values.size() >= 3) {
    for (double t : config.temperatures) {
      auto rows = fit_gap_records(gaps.records, t);
      fits.insert(fits.end(), rows.begin(), rows.end());
    }
  }

  ConvergenceSweepResult conv;
  if (config.run_convergence) {
    err << "convergence sweep: " << config.chain_replicas << " replicas x " << config.chain_steps << " steps\n";
    conv = run_convergence_sweep(config);
  }
  write_convergence_csv(conv, f.out / "convergence.csv");
  if (config.run_convergence) {
    const auto rows = read_convergence_csv(f.out / "convergence.csv");
    auto by_steps = fit_convergence_rows(rows, FitModel::tv_vs_steps);
    fits.insert(fits.end(), by_steps.begin(), by_steps.end());
    if (config.n_values.size() >= 3) {
      auto by_n = fit_convergence_rows(rows, FitModel::tv_vs_n);
      fits.insert(fits.end(), by_n.begin(), by_n.end());
    }
  }
  write_fits_csv(fits, f.out / "fits.csv");

  out << "n    T          kernel   count  mean_gap                std_gap\n";
  for (const auto& s : gaps.summary) {
    char line[160];
    std::snprintf(line, sizeof line, "%-4u %-10.4g %-8s %-6zu %-23.10g %.10g\n", s.n, s.temperature,
                  std::string(to_string(s.kernel)).c_str(), s.count, s.gap.mean, s.gap.std);
    out << line;
  }
  for (const auto& r : fits) {
    out << to_string(r.fit.model) << ' ' << r.kernel;
    if (r.temperature) out << " T=" << pretty(*r.temperature);
    out << ": exponent " << pretty(r.fit.exponent) << " +- " << pretty(r.fit.std_error) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct FitFlags {
  fs::path in;
  std::string model;
  fs::path out;
  std::string temp;
};

int cmd_fit(const FitFlags& f, std::ostream& out) {
  const FitModel model = parse_fit_model(f.model);
  std::vector<FitRow> fits;
  if (model == FitModel::gap_vs_n) {
    const auto records = read_gap_sweep_csv(f.in);
    std::optional<double> t;
    if (!f.temp.empty()) t = parse_temperature(f.temp);
    fits = fit_gap_records(records, t);
  } else {
    fits = fit_convergence_rows(read_convergence_csv(f.in), model);
  }
  const fs::path dest = f.out.empty() ? f.in.parent_path() / "fits.csv" : f.out;
  write_fits_csv(fits, dest);
  for (const auto& r : fits)
    out << to_string(r.fit.model) << ' ' << r.kernel << ": exponent " << pretty(r.fit.exponent) << " +- "
        << pretty(r.fit.std_error) << '\n';
  out << "wrote " << dest.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum-annealing-assisted Markov chain Monte Carlo on Sherrington-Kirkpatrick instances", "qamc"};
  app.set_version_flag("--version", QAMC_VERSION);
  app.require_subcommand(1);

  const std::vector<std::string> kernel_names{"local", "uniform", "qa"};

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate SK instance files");
  gen_cmd->add_option("--n", gen.n, "Number of spins")->required()->check(kSpinCount);
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of instances")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  GapFlags gap;
  auto* gap_cmd = app.add_subcommand("gap", "Spectral gap and mixing-time bounds of one kernel");
  gap_cmd->add_option("--instance", gap.instance, "Instance file")->required()->check(CLI::ExistingFile);
  gap_cmd->add_option("--temp", gap.temp, "Temperature (positive or inf)")->required()->check(kTemperature);
  gap_cmd->add_option("--kernel", gap.kernel, "Proposal kernel")->capture_default_str()
      ->check(CLI::IsMember(kernel_names));
  gap_cmd->add_option("--tau", gap.tau, "QA annealing time: optimize or fixed:<value>")->capture_default_str()
      ->check(kTauChoice);
  gap_cmd->add_option("--eps", gap.eps, "Mixing-time tolerance")->capture_default_str()
      ->check(CLI::Range(1e-300, 0.4999999));
  gap_cmd->add_option("--method", gap.method, "Gap of independence kernels: auto, dense or closed_form")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "dense", "closed_form"}));
  gap_cmd->add_option("--out", gap.out, "Output directory")->capture_default_str();
  add_search_flags(gap_cmd, gap.search);

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "Run Metropolis-Hastings chains and write convergence diagnostics");
  run_cmd->add_option("--instance", run.instance, "Instance file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--temp", run.temp, "Temperature (positive or inf)")->required()->check(kTemperature);
  run_cmd->add_option("--kernel", run.kernel, "Proposal kernel")->capture_default_str()
      ->check(CLI::IsMember(kernel_names));
  run_cmd->add_option("--tau", run.tau, "QA annealing time: optimize or fixed:<value>")->capture_default_str()
      ->check(kTauChoice);
  run_cmd->add_option("--steps", run.steps, "MC steps per chain")->capture_default_str()->check(CLI::PositiveNumber);
  run_cmd->add_option("--replicas", run.replicas, "Independent chains")->capture_default_str()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run.seed, "Master seed")->capture_default_str();
  run_cmd->add_option("--stride", run.stride, "Row stride of energy.csv (0: steps/10000)")->capture_default_str();
  run_cmd->add_option("--threshold", run.threshold, "Energy-error level for the crossing step")->capture_default_str()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "Worker threads")->capture_default_str()->envname("QAMC_THREADS")
      ->check(CLI::PositiveNumber);
  run_cmd->add_flag("--plot", run.plot, "Also write SVG plots");
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  add_search_flags(run_cmd, run.search);

  SweepFlags sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Ensemble gap and convergence sweeps from a config file");
  sweep_cmd->add_option("--config", sweep.config, "Config file (key=value)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->capture_default_str();
  auto* sweep_threads = sweep_cmd->add_option("--threads", sweep.threads, "Worker threads (overrides the config)")
                            ->envname("QAMC_THREADS")
                            ->check(CLI::PositiveNumber);

  FitFlags fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit scaling exponents to sweep tables");
  fit_cmd->add_option("--in", fit.in, "gap_sweep.csv or convergence.csv")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--model", fit.model, "gap_vs_n, tv_vs_steps or tv_vs_n")->required()
      ->check(CLI::IsMember({"gap_vs_n", "tv_vs_steps", "tv_vs_n"}));
  fit_cmd->add_option("--out", fit.out, "Output file (default: fits.csv next to the input)");
  fit_cmd->add_option("--temp", fit.temp, "Temperature to fit when the table holds several")->check(kTemperature);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, *gen_cmd, argc, argv, out);
    if (gap_cmd->parsed()) return cmd_gap(gap, *gap_cmd, argc, argv, out);
    if (run_cmd->parsed()) return cmd_run(run, *run_cmd, argc, argv, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, sweep_threads, *sweep_cmd, argc, argv, out, err);
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace qamc::tools
