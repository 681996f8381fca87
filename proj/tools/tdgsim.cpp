// tdgsim: run volunteer-grid scenarios, audit credit ledgers, replay event logs.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tdg/tdg.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kAudit = 3 };

struct RunOptions {
  std::vector<std::string> scenarios;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string mode;
  std::string strategy;
  std::optional<tdg::Tick> ticks;
  unsigned jobs = 1;
};

int load_all(const RunOptions& o, std::vector<tdg::ScenarioConfig>& configs) {
  int status = kOk;
  for (const auto& path : o.scenarios) {
    try {
      auto cfg = tdg::parse_scenario(path);
      if (o.seed) cfg.seed = *o.seed;
      if (o.ticks) cfg.horizon_ticks = *o.ticks;
      if (!o.mode.empty()) cfg.mode = *tdg::parse_mode(o.mode);
      if (!o.strategy.empty()) cfg.strategy = *tdg::parse_strategy(o.strategy);
      configs.push_back(std::move(cfg));
    } catch (const tdg::ConfigError& e) {
      for (const auto& msg : e.errors()) std::cerr << msg << '\n';
      status = kConfig;
    } catch (const std::exception& e) {
      std::cerr << path << ": " << e.what() << '\n';
      status = kConfig;
    }
  }
  return status;
}

int cmd_run(const RunOptions& o) {
  std::vector<tdg::ScenarioConfig> configs;
  if (int status = load_all(o, configs); status != kOk) return status;

  std::vector<int> status(configs.size(), kOk);
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const auto& cfg = configs[i];
      const std::filesystem::path dir =
          configs.size() == 1 ? std::filesystem::path(o.out) : std::filesystem::path(o.out) / cfg.name;
      try {
        const auto result = tdg::run_scenario(cfg);
        tdg::write_outputs(result, dir);
        std::lock_guard lock(err_mutex);
        std::cout << cfg.name << ": validated " << result.report.validated << " of " << cfg.work.wu_count
                  << " WUs, outputs in " << dir.string() << '\n';
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        std::cerr << cfg.name << ": " << e.what() << '\n';
        status[i] = kRuntime;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (int s : status) {
    if (s != kOk) return s;
  }
  return kOk;
}

int cmd_verify(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << '\n';
    return kRuntime;
  }
  try {
    const auto ledger = tdg::import_ledger(in);
    if (auto bad = tdg::verify_chain(ledger)) {
      std::cerr << path << ": chain broken at block " << *bad << '\n';
      return kAudit;
    }
    std::cout << path << ": " << ledger.size() << " blocks intact, head " << tdg::to_hex(ledger.head()) << '\n';
    return kOk;
  } catch (const tdg::AuditError& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kAudit;
  }
}

int cmd_replay(const std::string& path, const std::string& out) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << '\n';
    return kRuntime;
  }
  try {
    const auto log = tdg::read_log(in);
    const auto report = tdg::compute_metrics(log);
    if (out.empty()) {
      tdg::write_summary(std::cout, report);
      return kOk;
    }
    std::filesystem::create_directories(out);
    std::ofstream summary(std::filesystem::path(out) / "summary.csv");
    std::ofstream series(std::filesystem::path(out) / "series.csv");
    tdg::write_summary(summary, report);
    tdg::write_series(series, report);
    if (!summary || !series) throw tdg::IoError("write to " + out + " failed");
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-based volunteer desktop grid simulator"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Simulate one or more scenarios");
  run_cmd->add_option("--scenario", run.scenarios, "Scenario file (repeatable)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--mode", run.mode, "Override mode")->check(CLI::IsMember({"centralized", "trust"}));
  run_cmd->add_option("--strategy", run.strategy, "Override strategy")
      ->check(CLI::IsMember({"drds", "dods", "dgds", "random"}));
  run_cmd->add_option("--ticks", run.ticks, "Override the horizon")->check(CLI::PositiveNumber);
  run_cmd->add_option("--jobs", run.jobs, "Scenarios run in parallel")->check(CLI::PositiveNumber);

  std::string ledger_path;
  auto* verify_cmd = app.add_subcommand("verify-ledger", "Audit an exported credit ledger");
  verify_cmd->add_option("ledger", ledger_path, "ledger.txt from a run")->required();

  std::string log_path;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Recompute metrics from an event log");
  replay_cmd->add_option("--log", log_path, "events.log from a run")->required();
  replay_cmd->add_option("--out", replay_out, "Write summary.csv/series.csv here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  if (*run_cmd) return cmd_run(run);
  if (*verify_cmd) return cmd_verify(ledger_path);
  return cmd_replay(log_path, replay_out);
}
