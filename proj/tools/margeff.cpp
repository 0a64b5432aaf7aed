// margeff: calibrate scenarios, run simulation studies and render reports.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "margeff/bands.hpp"
#include "margeff/calibrate.hpp"
#include "margeff/error.hpp"
#include "margeff/harness.hpp"
#include "margeff/kernels.hpp"
#include "margeff/report.hpp"
#include "margeff/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace margeff;

namespace {

enum Exit { kOk = 0, kUserError = 2, kNumerical = 3, kBandBreach = 4 };

struct RunConfig {
  ScenarioConfig scenario;
  json run = json::object();
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  const json doc = read_json_file(path);
  RunConfig rc;
  try {
    if (doc.contains("scenario")) {
      rc.scenario = doc.at("scenario").get<ScenarioConfig>();
      if (doc.contains("run")) rc.run = doc.at("run");
    } else {
      rc.scenario = doc.get<ScenarioConfig>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path + ": " + e.what());
  }
  return rc;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates, bootstrap, threads;
  std::string out = "out";
  std::optional<std::string> profile;
  bool check = false;
};

struct CalibrateArgs {
  std::optional<double> target_or;
  std::string study = "s1";
  std::optional<std::size_t> draws;
};

std::uint64_t resolve_seed(const CommonArgs& a, const RunConfig& rc) {
  if (a.seed) return *a.seed;
  return rc.run.value("seed", StudySettings{}.seed);
}

std::size_t resolve_draws(std::optional<std::size_t> flag, const RunConfig& rc) {
  if (flag) return *flag;
  return rc.run.value("calibration_draws", kDefaultCalibrationDraws);
}

int cmd_calibrate(const CommonArgs& a, const CalibrateArgs& c) {
  RunConfig rc = load_config(a.config);
  const std::uint64_t seed = resolve_seed(a, rc);
  const std::size_t draws = resolve_draws(c.draws, rc);
  if (c.study != "s1" && c.study != "s2")
    throw Error(ErrorKind::InvalidArgument, "--study must be s1 or s2");
  const Study target_study = c.study == "s1" ? Study::s1 : Study::s2;

  json out{{"engine_version", kEngineVersion}, {"seed", seed}, {"draws", draws}};
  if (c.target_or) {
    if (rc.scenario.family != Family::logistic)
      throw Error(ErrorKind::InvalidArgument, "--target-or needs a logistic scenario");
    RandomStream rng(StreamKey{seed, 0, StreamPurpose::calibration, 0});
    rc.scenario.beta_t =
        solve_treatment_coefficient(rc.scenario, target_study, *c.target_or, draws, rng);
    out["target_or"] = *c.target_or;
    out["target_study"] = c.study;
  }
  out["beta_t"] = rc.scenario.beta_t;

  StudySettings settings;
  settings.seed = seed;
  settings.calibration_draws = draws;
  const TruthLedger ledger = truth_ledger(rc.scenario, settings);
  out["s1"] = ledger.ac_s1;
  out["s2"] = ledger.ac_s2;
  out["truth_ledger"] = ledger;

  if (c.target_or) {
    ensure_dir(a.out);
    json rc_run = rc.run;
    rc_run["seed"] = seed;
    const fs::path derived = fs::path(a.out) / "calibrated_config.json";
    write_file(derived, json{{"scenario", rc.scenario}, {"run", rc_run}}.dump(2) + "\n");
    out["derived_config"] = derived.string();
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

int print_bands(const std::vector<BandCheck>& checks) {
  for (const auto& c : checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  return all_pass(checks) ? kOk : kBandBreach;
}

int cmd_simulate(const CommonArgs& a) {
  const RunConfig rc = load_config(a.config);
  StudySettings settings;
  settings.seed = resolve_seed(a, rc);
  settings.calibration_draws = resolve_draws(std::nullopt, rc);

  std::string profile = a.profile.value_or(rc.run.value("profile", std::string("desk")));
  if (profile == "desk") {
    settings.replicates = 200;
    settings.bootstrap = 200;
  } else if (profile == "full") {
    settings.replicates = 2000;
    settings.bootstrap = 1000;
  } else if (profile != "custom") {
    throw Error(ErrorKind::InvalidArgument, "profile must be desk, full or custom");
  }
  const auto from_run = [&](const char* key, std::optional<std::size_t> flag, std::size_t& field) {
    std::optional<std::size_t> v = flag;
    if (!v && rc.run.contains(key)) v = rc.run.at(key).get<std::size_t>();
    if (v && *v != field) {
      field = *v;
      profile = "custom";
    }
  };
  from_run("replicates", a.replicates, settings.replicates);
  from_run("bootstrap", a.bootstrap, settings.bootstrap);
  if (settings.replicates == 0) throw Error(ErrorKind::InvalidArgument, "replicates must be positive");
  settings.threads = a.threads.value_or(rc.run.value("threads", std::size_t{0}));

  const TruthLedger ledger = truth_ledger(rc.scenario, settings);
  std::cerr << "truth delta_AB = " << ledger.delta_ab << "; running " << settings.replicates
            << " replicates with B = " << settings.bootstrap << '\n';

  std::size_t last_decile = 0;
  const auto records = run_study(rc.scenario, settings, [&](std::size_t done, std::size_t total) {
    const std::size_t decile = done * 10 / total;
    if (decile != last_decile) {
      last_decile = decile;
      std::cerr << "  " << done << '/' << total << " replicates\n";
    }
  });

  StudySummary summary;
  summary.engine_version = kEngineVersion;
  summary.seed = settings.seed;
  summary.profile = profile;
  summary.family = rc.scenario.family;
  summary.replicates = settings.replicates;
  summary.bootstrap = settings.bootstrap;
  summary.truth = ledger.delta_ab;
  summary.truth_ledger = ledger;
  summary.methods = summarize(records, ledger.delta_ab);

  const std::vector<std::string> provenance = {
      std::string("engine ") + kEngineVersion,
      "seed " + std::to_string(settings.seed),
      "profile " + profile,
      "family " + std::string(to_string(rc.scenario.family)),
      "replicates " + std::to_string(settings.replicates),
      "bootstrap " + std::to_string(settings.bootstrap),
  };
  ensure_dir(a.out);
  std::ostringstream csv;
  write_replicates_csv(csv, records, provenance);
  write_file(fs::path(a.out) / "replicates.csv", csv.str());
  write_file(fs::path(a.out) / "summary.json", json(summary).dump(2) + "\n");

  const json manifest{{"engine_version", kEngineVersion},
                      {"config", a.config},
                      {"seed", settings.seed},
                      {"profile", profile},
                      {"replicates", settings.replicates},
                      {"bootstrap", settings.bootstrap},
                      {"threads", settings.threads},
                      {"calibration_draws", settings.calibration_draws},
                      {"out", a.out},
                      {"kernel_backend", std::string(kernels::to_string(kernels::active_backend()))},
                      {"scenario", rc.scenario}};
  write_file(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");

  for (const auto& s : summary.methods) {
    std::printf("%-7s bias %8.4f (%.4f)  mse %7.4f (%.4f)  coverage %.3f (%.3f)  valid %zu\n",
                std::string(to_string(s.method)).c_str(), s.bias, s.bias_mcse, s.mse, s.mse_mcse,
                s.coverage, s.coverage_mcse, s.n_valid);
  }
  std::fflush(stdout);
  if (!a.check) return kOk;
  const auto checks = profile == "full"
                          ? check_full_bands(rc.scenario.family, summary.methods, settings.replicates)
                          : check_desk_bands(rc.scenario.family, summary.methods, settings.replicates);
  return print_bands(checks);
}

int cmd_report(const CommonArgs& a, const std::string& input) {
  const fs::path in_dir = input.empty() ? fs::path(a.out) : fs::path(input);
  StudySummary summary;
  try {
    summary = read_json_file(in_dir / "summary.json").get<StudySummary>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "summary.json: " + std::string(e.what()));
  }
  std::istringstream csv(read_file(in_dir / "replicates.csv"));
  const ReplicateTable table = read_replicates_csv(csv);
  ensure_dir(a.out);
  write_file(fs::path(a.out) / "report.txt", render_report_text(summary, table));
  write_file(fs::path(a.out) / "report.svg", render_report_svg(summary, table));
  std::cout << render_report_text(summary, table);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal versus conditional effects in anchored indirect comparisons"};
  app.set_version_flag("--version", kEngineVersion);
  app.require_subcommand(1);

  CommonArgs common;
  CalibrateArgs cal;
  std::string report_input;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "Scenario JSON (bare or {scenario, run})");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  };

  auto* calibrate = app.add_subcommand("calibrate", "Print true marginal effects; optionally solve beta_t");
  add_common(calibrate, true);
  calibrate->add_option("--target-or", cal.target_or, "Target marginal odds ratio")->check(CLI::PositiveNumber);
  calibrate->add_option("--study", cal.study, "Study the target refers to (s1 or s2)")
      ->check(CLI::IsMember({"s1", "s2"}))
      ->capture_default_str();
  calibrate->add_option("--draws", cal.draws, "Monte Carlo covariate draws");

  auto* simulate = app.add_subcommand("simulate", "Run a simulation study");
  add_common(simulate, true);
  simulate->add_option("--replicates", common.replicates, "Number of simulated dataset pairs R");
  simulate->add_option("--bootstrap", common.bootstrap, "Bootstrap resamples B");
  simulate->add_option("--threads", common.threads, "Worker threads (0 = all cores)");
  simulate->add_option("--profile", common.profile, "desk (R=200, B=200) or full (R=2000, B=1000)")
      ->check(CLI::IsMember({"desk", "full"}));
  simulate->add_flag("--check", common.check, "Evaluate acceptance bands; exit 4 on breach");

  auto* report = app.add_subcommand("report", "Render report.txt and report.svg");
  report->add_option("--out", common.out, "Output directory")->capture_default_str();
  report->add_option("--in", report_input, "Directory holding replicates.csv and summary.json (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUserError;
  }

  try {
    if (*calibrate) return cmd_calibrate(common, cal);
    if (*simulate) return cmd_simulate(common);
    return cmd_report(common, report_input);
  } catch (const Error& e) {
    std::cerr << "margeff: " << e.what() << '\n';
    return is_numerical(e.kind()) ? kNumerical : kUserError;
  } catch (const json::exception& e) {
    std::cerr << "margeff: " << e.what() << '\n';
    return kUserError;
  }
}
