// kvaccel_bench: workload driver over the simulated store.
//
//   kvaccel_bench run     --workload A --policy kvaccel --seed 3 --out-dir out/
//   kvaccel_bench compare --workload A --policy baseline-stall,kvaccel --out-dir out/
//   kvaccel_bench cdf     out/metrics.csv

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kvaccel/bench/workload.h"
#include "kvaccel/config.h"

namespace fs = std::filesystem;
using namespace kvaccel;

namespace {

constexpr int kExitInvariant = 3;
constexpr int kExitNoStalls = 2;

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string rollback_mode;
  uint64_t seed = 0;
  double duration = -1;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "key = value file applied over the desk profile");
  app->add_option("--set", c.sets, "override one key, e.g. --set compaction_workers=2");
  app->add_option("--rollback-mode", c.rollback_mode, "eager or lazy");
  app->add_option("--seed", c.seed, "RNG seed");
  app->add_option("--duration", c.duration, "measured virtual seconds");
  app->add_option("--out-dir", c.out_dir, "directory for CSV outputs");
  app->add_flag("-q,--quiet", c.quiet, "print only the summary table");
}

Config make_config(const Common& c) {
  Config cfg = Config::desk();
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  for (const auto& kv : c.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.rollback_mode.empty()) cfg.accel.rollback_mode = parse_rollback_mode(c.rollback_mode);
  if (c.seed != 0) cfg.sim.seed = c.seed;
  if (c.duration >= 0) cfg.workload.duration_s = c.duration;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bench::RunResult run_one(const Config& cfg, const std::string& workload, const fs::path& dir) {
  auto result = bench::run_workload(cfg, bench::WorkloadSpec::from_name(workload));
  if (!dir.empty()) {
    write_file(dir / "metrics.csv", bench::metrics_csv(result.samples));
    write_file(dir / "report.csv", bench::report_csv(result.report));
    write_file(dir / "config.txt", cfg.dump());
  }
  return result;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workload driver for the dual-interface KV store simulator"};
  app.require_subcommand(1);

  Common run_opts;
  std::string run_workload = "A";
  std::string run_policy = "kvaccel";
  auto* run = app.add_subcommand("run", "run one workload and write metrics.csv and report.csv");
  run->add_option("--workload", run_workload, "A, B, C or D");
  run->add_option("--policy", run_policy, "baseline-stall, baseline-slowdown or kvaccel");
  add_common(run, run_opts);

  Common cmp_opts;
  std::string cmp_workloads = "A";
  std::string cmp_policies = "baseline-stall,baseline-slowdown,kvaccel";
  auto* cmp = app.add_subcommand("compare", "run several workload/policy pairs side by side");
  cmp->add_option("--workload", cmp_workloads, "comma-separated workloads");
  cmp->add_option("--policy", cmp_policies, "comma-separated policies");
  add_common(cmp, cmp_opts);

  std::vector<std::string> cdf_inputs;
  std::string cdf_out;
  auto* cdf = app.add_subcommand("cdf", "stall-interval link utilization CDF of metrics files");
  cdf->add_option("metrics", cdf_inputs, "metrics.csv files")->required();
  cdf->add_option("--out", cdf_out, "write the CDF of the first input here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      Config cfg = make_config(run_opts);
      cfg.accel.policy = parse_policy(run_policy);
      auto result = run_one(cfg, run_workload, run_opts.out_dir);
      std::cout << bench::report_text(result.report);
      return result.report.invariant_violations > 0 ? kExitInvariant : 0;
    }
    if (*cmp) {
      Config base = make_config(cmp_opts);
      std::vector<bench::RunReport> reports;
      bool violated = false;
      for (const auto& w : split_list(cmp_workloads)) {
        for (const auto& p : split_list(cmp_policies)) {
          Config cfg = base;
          cfg.accel.policy = parse_policy(p);
          fs::path dir = cmp_opts.out_dir.empty() ? fs::path() : fs::path(cmp_opts.out_dir) / (w + "_" + p);
          auto result = run_one(cfg, w, dir);
          if (!cmp_opts.quiet) std::cout << bench::report_text(result.report) << "\n";
          violated |= result.report.invariant_violations > 0;
          reports.push_back(std::move(result.report));
        }
      }
      std::string table = bench::compare_table(reports);
      std::cout << table;
      if (!cmp_opts.out_dir.empty()) write_file(fs::path(cmp_opts.out_dir) / "compare.txt", table);
      return violated ? kExitInvariant : 0;
    }
    if (*cdf) {
      int rc = 0;
      for (size_t i = 0; i < cdf_inputs.size(); ++i) {
        std::ifstream in(cdf_inputs[i], std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + cdf_inputs[i]);
        std::stringstream ss;
        ss << in.rdbuf();
        auto samples = bench::parse_metrics_csv(ss.str());
        try {
          auto points = bench::utilization_cdf(samples);
          std::cout << "# " << cdf_inputs[i] << "\n" << bench::cdf_csv(points);
          if (i == 0 && !cdf_out.empty()) write_file(cdf_out, bench::cdf_csv(points));
        } catch (const std::invalid_argument& e) {
          std::cerr << cdf_inputs[i] << ": " << e.what() << "\n";
          rc = kExitNoStalls;
        }
      }
      return rc;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
