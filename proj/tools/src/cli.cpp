#include "pdnac_cli/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "pdnac/errors.hpp"
#include "pdnac/metrics_io.hpp"
#include "pdnac/pdnac.hpp"
#include "pdnac_cli/spec.hpp"

#ifdef PDNAC_WITH_ACCEPTANCE
#include "acceptance.hpp"
#endif

namespace pdnac::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> env_file;
  std::optional<std::int64_t> T;
  std::vector<std::string> set;
  std::optional<int> jobs;
  bool dump_oracle = false;
  bool timing = false;
  std::string filter;
};

void add_experiment_options(CLI::App& cmd, Options& o, bool sweep) {
  cmd.add_option("--config", o.config, "Experiment spec (YAML)");
  cmd.add_option("--seed", o.seed, "Root seed");
  cmd.add_option("--out", o.out, "Output directory");
  cmd.add_option("--env-file", o.env_file, "Model file (YAML), replaces the spec's env");
  cmd.add_option("--T", o.T, "Horizon, replaces the spec's T grid");
  cmd.add_option("--set", o.set, "Config override key=value (repeatable)");
  cmd.add_flag("--dump-oracle", o.dump_oracle, "Also write oracle.json for the environment");
  cmd.add_flag("--timing", o.timing, "Record wall_ms per epoch");
  if (sweep) cmd.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("pdnac", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::info);
  if (const char* env = std::getenv("PDNAC_LOG")) {
    const std::string level = env;
    if (level == "error") {
      logger->set_level(spdlog::level::err);
    } else if (level == "debug") {
      logger->set_level(spdlog::level::debug);
    } else if (level != "info") {
      logger->warn("PDNAC_LOG='{}' not one of error, info, debug; using info", level);
    }
  }
  return logger;
}

ExperimentSpec resolve_spec(const Options& o) {
  ExperimentSpec spec = o.config ? load_spec(*o.config) : ExperimentSpec{};
  if (o.env_file) spec.env_file = *o.env_file;
  if (o.T) spec.T = {*o.T};
  if (o.seed) spec.seed = *o.seed;
  if (o.out) spec.out = *o.out;
  if (o.jobs) spec.jobs = *o.jobs;
  PdnacConfig probe;
  for (const std::string& item : o.set) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(fmt::format("--set expects key=value, got '{}'", item));
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    set_config_field(probe, key, value);
    spec.overrides.emplace_back(key, value);
  }
  if (o.timing) spec.overrides.emplace_back("timing", "true");
  validate(spec);
  return spec;
}

void prepare_out(const ExperimentSpec& spec, const CmdpModel& model, bool dump_oracle) {
  std::error_code ec;
  fs::create_directories(spec.out, ec);
  if (ec || !fs::is_directory(spec.out)) {
    throw InvalidArgument(fmt::format("output directory '{}' is not writable", spec.out.string()));
  }
  if (dump_oracle) write_text(spec.out / "oracle.json", oracle_json(model));
}

std::string run_stem(std::int64_t T, std::uint64_t seed) {
  return fmt::format("run_T{}_seed{}", T, seed);
}

RunMetrics execute(const ExperimentSpec& spec, const CmdpModel& model, std::int64_t T,
                   std::uint64_t seed) {
  RunMetrics metrics = run(make_config(spec, T, seed), model);
  write_text(spec.out / (run_stem(T, seed) + ".csv"), metrics_csv(metrics));
  write_text(spec.out / (run_stem(T, seed) + ".json"), summary_json(metrics));
  return metrics;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

int cmd_run(const Options& o, std::ostream& out, spdlog::logger& log) {
  const ExperimentSpec spec = resolve_spec(o);
  const CmdpModel model = build_env(spec);
  prepare_out(spec, model, o.dump_oracle);
  const std::int64_t T = spec.T.front();
  if (spec.T.size() > 1) log.info("run uses the first horizon T={}; use sweep for the grid", T);
  const RunMetrics m = execute(spec, model, T, spec.seed);
  for (const std::string& warning : m.warnings) log.warn("{}", warning);
  out << fmt::format("T={} seed={} mean_gap={} mean_violation={} -> {}\n", T, spec.seed,
                     m.mean_gap(), m.mean_violation(),
                     (spec.out / (run_stem(T, spec.seed) + ".csv")).string());
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, spdlog::logger& log) {
  const ExperimentSpec spec = resolve_spec(o);
  const CmdpModel model = build_env(spec);
  prepare_out(spec, model, o.dump_oracle);

  struct Job {
    std::int64_t T;
    std::uint64_t seed;
    double gap = 0.0;
    double violation = 0.0;
  };
  std::vector<Job> jobs;
  for (std::int64_t T : spec.T) {
    for (int i = 0; i < spec.seeds; ++i) jobs.push_back({T, spec.seed + static_cast<std::uint64_t>(i)});
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const RunMetrics m = execute(spec, model, jobs[i].T, jobs[i].seed);
        jobs[i].gap = m.mean_gap();
        jobs[i].violation = m.mean_violation();
        log.info("finished T={} seed={}", jobs[i].T, jobs[i].seed);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::string aggregate = "T,seeds,mean_gap,mean_violation,median_gap,median_violation\n";
  for (std::int64_t T : spec.T) {
    std::vector<double> gaps, violations;
    for (const Job& job : jobs) {
      if (job.T != T) continue;
      gaps.push_back(job.gap);
      violations.push_back(job.violation);
    }
    const double n = static_cast<double>(gaps.size());
    aggregate += fmt::format("{},{},{},{},{},{}\n", T, gaps.size(),
                             std::accumulate(gaps.begin(), gaps.end(), 0.0) / n,
                             std::accumulate(violations.begin(), violations.end(), 0.0) / n,
                             median(gaps), median(violations));
  }
  write_text(spec.out / "aggregate.csv", aggregate);
  out << fmt::format("{} runs -> {}\n", jobs.size(), (spec.out / "aggregate.csv").string());
  return kExitOk;
}

int cmd_oracle(const Options& o, std::ostream& out) {
  const ExperimentSpec spec = resolve_spec(o);
  const CmdpModel model = build_env(spec);
  const std::string dump = oracle_json(model);
  if (o.out) {
    prepare_out(spec, model, false);
    write_text(spec.out / "oracle.json", dump);
  } else {
    out << dump << '\n';
  }
  return kExitOk;
}

int cmd_check(const Options& o, std::ostream& out, std::ostream& err) {
#ifdef PDNAC_WITH_ACCEPTANCE
  return pdnac::acceptance::run_criteria(o.filter, out) == 0 ? kExitOk : kExitDataError;
#else
  (void)o;
  (void)out;
  err << "error: this build has no acceptance suite (configure with PDNAC_BUILD_TESTS=ON)\n";
  return kExitDataError;
#endif
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Primal-dual natural actor-critic experiments on tabular constrained MDPs", "pdnac"};
  app.require_subcommand(1);
  Options o;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one configuration and write its metrics");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run the T grid x seeds and aggregate");
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "Print the exact solution of the environment");
  CLI::App* check_cmd = app.add_subcommand("check", "Run the acceptance criteria");
  add_experiment_options(*run_cmd, o, false);
  add_experiment_options(*sweep_cmd, o, true);
  oracle_cmd->add_option("--config", o.config, "Experiment spec (YAML)");
  oracle_cmd->add_option("--seed", o.seed, "Root seed");
  oracle_cmd->add_option("--env-file", o.env_file, "Model file (YAML)");
  oracle_cmd->add_option("--out", o.out, "Write oracle.json here instead of stdout");
  check_cmd->add_option("filter", o.filter, "Only criteria whose name contains this text");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  const auto log = make_logger(err);
  try {
    if (run_cmd->parsed()) return cmd_run(o, out, *log);
    if (sweep_cmd->parsed()) return cmd_sweep(o, out, *log);
    if (oracle_cmd->parsed()) return cmd_oracle(o, out);
    return cmd_check(o, out, err);
  } catch (const ParseError& e) {
    err << (e.line() > 0 ? fmt::format("error: line {}: {}\n", e.line(), e.what())
                         : fmt::format("error: {}\n", e.what()));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const YAML::Exception& e) {
    err << "error: " << e.what() << '\n';
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitDataError;
}

}  // namespace pdnac::cli
