#pragma once

// Command-line front end. run_cli() is the whole program; tools/eptest.cpp only
// forwards argv so the integration tests can drive it in-process.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eptest/adaptive.hpp"
#include "eptest/csv_io.hpp"
#include "eptest/report.hpp"
#include "eptest/simulation.hpp"

namespace eptest {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kData = 3;
inline constexpr int kBoundary = 4;
inline constexpr int kInternal = 5;
}  // namespace exit_code

class UsageError : public Error {
public:
  using Error::Error;
};

/// Flags shared by every subcommand.
struct RunConfig {
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::int64_t mcReps = kDefaultMcReps;
  int iters = 0;    ///< 0 keeps the preset
  int burnIn = -1;  ///< -1 keeps the preset
  int thinning = 0;
  int restarts = 100;
  int maxIter = 10000;
  double tol = 1e-10;
  std::string summary = "both";
  std::string outDir = ".";
  unsigned threads = 1;
  bool quiet = false;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
    if (mcReps < 2) throw UsageError("--mc-reps must be at least 2");
    if (iters < 0) throw UsageError("--iters must be positive");
    if (thinning < 0) throw UsageError("--thin must be positive");
    if (restarts < 1) throw UsageError("--restarts must be positive");
    if (maxIter < 1) throw UsageError("--max-iter must be positive");
    if (!(tol > 0.0)) throw UsageError("--tol must be positive");
    if (threads < 1) throw UsageError("--threads must be positive");
  }

  Summary summary_kind() const {
    if (summary == "mode") return Summary::Mode;
    if (summary == "mean") return Summary::Mean;
    if (summary == "both") return Summary::Both;
    throw UsageError("--summary must be mode, mean or both");
  }

  GibbsConfig chain(GibbsConfig preset) const {
    if (iters > 0) preset.iters = iters;
    if (burnIn >= 0) preset.burnIn = burnIn;
    if (thinning > 0) preset.thinning = thinning;
    if (preset.iters <= preset.burnIn) throw UsageError("--iters must exceed --burn-in");
    return preset;
  }

  ModeConfig mode() const {
    ModeConfig m;
    m.maxIter = maxIter;
    m.tol = tol;
    m.restarts = restarts;
    return m;
  }

  /// Everything that determines the outputs; thread count and output path are excluded.
  Json to_json() const {
    return Json{{"seed", seed},         {"alpha", alpha},         {"mcReps", mcReps},     {"iters", iters},
                {"burnIn", burnIn},     {"thinning", thinning},   {"restarts", restarts}, {"maxIter", maxIter},
                {"tol", tol},           {"summary", summary}};
  }
};

struct DataArgs {
  std::string data;
  std::string response = "y";
  std::string yPath;
  std::string xPath;
  std::string groupColumn;
  bool standardize = false;

  LoadedData load() const {
    LoadOptions opt;
    opt.standardize = standardize;
    if (!groupColumn.empty()) opt.groupColumn = groupColumn;
    if (!data.empty()) {
      if (!yPath.empty() || !xPath.empty()) throw UsageError("use either --data or --y/--x, not both");
      return load_csv(data, response, opt);
    }
    if (yPath.empty() || xPath.empty()) throw UsageError("provide --data FILE or both --y FILE and --x FILE");
    return load_csv_pair(yPath, xPath, opt);
  }

  Json to_json() const {
    Json j;
    if (!data.empty()) {
      j["data"] = data;
      j["response"] = response;
    } else {
      j["y"] = yPath;
      j["x"] = xPath;
    }
    if (!groupColumn.empty()) j["groupColumn"] = groupColumn;
    j["standardize"] = standardize;
    return j;
  }
};

struct GridArgs {
  std::vector<double> q;
  std::vector<double> pi;
  std::vector<long> n{200};
  std::vector<long> p{100};
  int reps = 100;
  double tau2 = 1.0;
  double sigma2 = 1.0;
  double threshold = 0.1;
  bool ungatedOnly = false;

  std::vector<Scenario> scenarios(std::uint64_t seed) const {
    if (q.empty() && pi.empty()) throw UsageError("simulate needs at least one --q or --pi value");
    if (reps < 1) throw UsageError("--reps must be positive");
    std::vector<Truth> truths;
    try {
      for (double v : q) truths.emplace_back(EpPrior(tau2, v));
      for (double v : pi) {
        SpikeSlab ss{v, tau2};
        ss.validate();
        truths.emplace_back(ss);
      }
    } catch (const Error& e) {
      throw UsageError(std::string("invalid grid: ") + e.what());
    }
    if (!(sigma2 > 0.0)) throw UsageError("--sigma2 must be positive");
    std::vector<Scenario> grid;
    for (long nv : n)
      for (long pv : p) {
        if (nv < 2 || pv < 2) throw UsageError("--n and --p values must be at least 2");
        for (const auto& t : truths) grid.push_back(Scenario{nv, pv, t, reps, seed, sigma2});
      }
    return grid;
  }

  Json to_json() const {
    return Json{{"q", q},         {"pi", pi},         {"n", n},
                {"p", p},         {"reps", reps},     {"tau2", tau2},
                {"sigma2", sigma2}, {"threshold", threshold}};
  }
};

namespace detail {

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::filesystem::path path(dir);
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
  return path;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                           Json inputs, const std::vector<std::string>& files) {
  Json m;
  m["tool"] = "eptest";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = cfg.to_json();
  m["inputs"] = std::move(inputs);
  m["seedScheme"] = "splitmix64 path derivation from the master seed; std::mt19937_64 per substream";
  m["files"] = files;
  write_json(dir / "manifest.json", m);
}

inline std::string safe_label(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
  return s;
}

inline NullOptions null_options(const RunConfig& cfg) {
  return NullOptions{cfg.mcReps, derive_seed(cfg.seed, {streams::kTest}), cfg.threads, 1.0};
}

}  // namespace detail

inline int cmd_test(const RunConfig& cfg, const DataArgs& args, std::ostream& out) {
  cfg.validate();
  const LoadedData loaded = args.load();
  const TestPlan plan = plan_test(loaded.data.X);
  const NullDistribution null = simulate_null(plan, detail::null_options(cfg));
  const TestOutcome outcome = laplace_test(loaded.data, plan, null, cfg.alpha);
  Json report = to_json(outcome);
  report["seed"] = cfg.seed;
  report["standardized"] = loaded.data.standardized;
  const auto dir = detail::prepare_out_dir(cfg.outDir);
  write_json(dir / "test_report.json", report);
  detail::write_manifest(dir, "test", cfg, args.to_json(), {"test_report.json"});
  if (!cfg.quiet) out << report.dump(2) << '\n';
  return exit_code::kOk;
}

inline int cmd_fit(const RunConfig& cfg, const DataArgs& args, bool gate, std::ostream& out, std::ostream& err) {
  cfg.validate();
  AdaptiveConfig ac;
  ac.alpha = cfg.alpha;
  ac.summary = cfg.summary_kind();
  ac.mcReps = cfg.mcReps;
  ac.chain = cfg.chain(GibbsConfig::analysis());
  ac.mode = cfg.mode();
  ac.seed = cfg.seed;
  ac.threads = cfg.threads;
  ac.gate = gate;
  const LoadedData loaded = args.load();
  const AdaptiveResult result = adaptive_estimate(loaded.data, ac);

  const auto dir = detail::prepare_out_dir(cfg.outDir);
  Json summary = fit_summary_json(result, ac.summary);
  summary["seed"] = cfg.seed;
  summary["gate"] = gate;
  std::vector<std::string> files{"fit_summary.json"};
  if (result.fit) {
    std::ostringstream csv;
    write_coefficients_csv(csv, loaded.columnNames, *result.fit);
    write_text(dir / "coefficients.csv", csv.str());
    files.push_back("coefficients.csv");
  }
  write_json(dir / "fit_summary.json", summary);
  Json inputs = args.to_json();
  inputs["gate"] = gate;
  detail::write_manifest(dir, "fit", cfg, std::move(inputs), files);
  if (!cfg.quiet) out << summary.dump(2) << '\n';
  if (result.status == AdaptiveStatus::Boundary) {
    err << "eptest: " << result.message << '\n';
    return exit_code::kBoundary;
  }
  return exit_code::kOk;
}

inline int cmd_simulate_power(const RunConfig& cfg, const GridArgs& grid, std::ostream& out) {
  cfg.validate();
  PowerOptions opt{cfg.alpha, cfg.mcReps, cfg.threads};
  const auto reports = run_power_study(grid.scenarios(cfg.seed), opt);
  const auto dir = detail::prepare_out_dir(cfg.outDir);
  std::vector<std::string> files;
  Json summary = Json::array();
  for (const auto& r : reports) {
    const std::string name = "power_" + detail::safe_label(describe(r.scenario)) + ".csv";
    std::ostringstream csv;
    write_power_csv(csv, r);
    write_text(dir / name, csv.str());
    files.push_back(name);
    Json j = to_json(r);
    j["file"] = name;
    summary.push_back(std::move(j));
  }
  std::ostringstream table;
  write_power_summary_csv(table, reports);
  write_text(dir / "power_summary.csv", table.str());
  write_json(dir / "power_summary.json", Json{{"scenarios", summary}});
  files.push_back("power_summary.csv");
  files.push_back("power_summary.json");
  detail::write_manifest(dir, "simulate power", cfg, grid.to_json(), files);
  if (!cfg.quiet) out << table.str();
  return exit_code::kOk;
}

inline int cmd_simulate_estimate(const RunConfig& cfg, const GridArgs& grid, std::ostream& out) {
  cfg.validate();
  EstimationOptions opt;
  opt.alpha = cfg.alpha;
  opt.mcReps = cfg.mcReps;
  opt.summary = cfg.summary_kind();
  opt.chain = cfg.chain(GibbsConfig::simulation());
  opt.mode = cfg.mode();
  opt.threads = cfg.threads;
  opt.selectionThreshold = grid.threshold;
  if (!(grid.threshold > 0.0)) throw UsageError("--threshold must be positive");
  const auto reports = run_estimation_study(grid.scenarios(cfg.seed), opt);
  const auto dir = detail::prepare_out_dir(cfg.outDir);
  std::vector<std::string> files;
  Json summary = Json::array();
  std::ostringstream table;
  table << std::setprecision(17)
        << "label,completed,regenerations,rejection_rate,adaptive_worse,ungated_worse,median_ratio_adaptive\n";
  for (const auto& r : reports) {
    const std::string name = "estimate_" + detail::safe_label(describe(r.scenario)) + ".csv";
    std::ostringstream csv;
    write_estimation_csv(csv, r);
    write_text(dir / name, csv.str());
    files.push_back(name);
    Json j = to_json(r);
    j["file"] = name;
    summary.push_back(std::move(j));
    table << describe(r.scenario) << ',' << r.completed << ',' << r.regenerations << ',' << r.rejectionRate;
    if (wants_mean(opt.summary)) {
      table << ',' << r.fraction_worse_than_laplace(&EstimationRow::adaptive) << ','
            << r.fraction_worse_than_laplace(&EstimationRow::ungated) << ','
            << r.median_mse_ratio(&EstimationRow::adaptive) << '\n';
    } else {
      table << ",NA,NA,NA\n";
    }
  }
  write_json(dir / "estimate_summary.json", Json{{"scenarios", summary}});
  files.push_back("estimate_summary.json");
  detail::write_manifest(dir, "simulate estimate", cfg, grid.to_json(), files);
  if (!cfg.quiet) out << table.str();
  return exit_code::kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Kurtosis test of a Laplace prior for regression coefficients, with adaptive exponential power "
               "estimation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunConfig cfg;
  DataArgs data;
  GridArgs grid;
  bool noGate = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "master random seed");
    sub->add_option("--alpha", cfg.alpha, "test level");
    sub->add_option("--mc-reps", cfg.mcReps, "Monte Carlo draws for the null distribution");
    sub->add_option("--out-dir", cfg.outDir, "directory for output files");
    sub->add_option("--threads", cfg.threads, "worker threads (results do not depend on this)");
    sub->add_flag("--quiet", cfg.quiet, "do not print the report");
  };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--iters", cfg.iters, "Gibbs iterations including burn-in");
    sub->add_option("--burn-in", cfg.burnIn, "Gibbs burn-in iterations");
    sub->add_option("--thin", cfg.thinning, "Gibbs thinning interval");
    sub->add_option("--restarts", cfg.restarts, "random restarts for the mode when q < 1");
    sub->add_option("--max-iter", cfg.maxIter, "coordinate descent sweep limit");
    sub->add_option("--tol", cfg.tol, "coordinate descent tolerance");
    sub->add_option("--summary", cfg.summary, "posterior summaries to compute")
        ->check(CLI::IsMember({"mode", "mean", "both"}));
  };
  auto inputs = [&](CLI::App* sub) {
    sub->add_option("--data", data.data, "combined CSV with a header row");
    sub->add_option("--response", data.response, "response column of --data");
    sub->add_option("--y", data.yPath, "response CSV (one column)");
    sub->add_option("--x", data.xPath, "design CSV");
    sub->add_option("--group-column", data.groupColumn, "remove per-group means of this column's groups");
    sub->add_flag("--standardize", data.standardize, "center and scale y and the columns of X");
  };
  auto gridOptions = [&](CLI::App* sub) {
    sub->add_option("--q", grid.q, "exponential power shapes")->delimiter(',');
    sub->add_option("--pi", grid.pi, "spike-and-slab nonzero probabilities")->delimiter(',');
    sub->add_option("--n", grid.n, "sample sizes")->delimiter(',');
    sub->add_option("--p", grid.p, "numbers of covariates")->delimiter(',');
    sub->add_option("--reps", grid.reps, "replicates per scenario");
    sub->add_option("--tau2", grid.tau2, "prior variance of the coefficients");
    sub->add_option("--sigma2", grid.sigma2, "noise variance");
  };

  auto* test = app.add_subcommand("test", "test H: q = 1 on a dataset");
  common(test);
  inputs(test);

  auto* fit = app.add_subcommand("fit", "adaptive posterior mode and mean");
  common(fit);
  inputs(fit);
  solver(fit);
  fit->add_flag("--no-gate", noGate, "use the estimated q even when the test accepts");

  auto* simulate = app.add_subcommand("simulate", "simulation studies");
  simulate->require_subcommand(1);
  auto* power = simulate->add_subcommand("power", "level and power of the test");
  common(power);
  gridOptions(power);
  auto* estimate = simulate->add_subcommand("estimate", "adaptive versus Laplace estimation");
  common(estimate);
  gridOptions(estimate);
  solver(estimate);
  estimate->add_option("--threshold", grid.threshold, "selection metric threshold on |b - estimate|");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  try {
    if (*test) return cmd_test(cfg, data, out);
    if (*fit) return cmd_fit(cfg, data, !noGate, out, err);
    if (*power) {
      if (!power->count("--mc-reps")) cfg.mcReps = 100'000;
      return cmd_simulate_power(cfg, grid, out);
    }
    if (*estimate) {
      if (!estimate->count("--mc-reps")) cfg.mcReps = 100'000;
      return cmd_simulate_estimate(cfg, grid, out);
    }
    return exit_code::kUsage;
  } catch (const UsageError& e) {
    err << "eptest: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const ParseError& e) {
    err << "eptest: " << e.what() << '\n';
    return exit_code::kData;
  } catch (const BoundaryError& e) {
    err << "eptest: " << e.what() << '\n';
    return exit_code::kBoundary;
  } catch (const DomainError& e) {
    err << "eptest: " << e.what() << '\n';
    return exit_code::kData;
  } catch (const DegenerateInputError& e) {
    err << "eptest: " << e.what() << '\n';
    return exit_code::kData;
  } catch (const NotIdentifiableError& e) {
    err << "eptest: " << e.what() << '\n';
    return exit_code::kData;
  } catch (const std::exception& e) {
    err << "eptest: internal error: " << e.what() << '\n';
    return exit_code::kInternal;
  }
}

}  // namespace eptest
