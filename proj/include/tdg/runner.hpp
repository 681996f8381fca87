#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "tdg/events.hpp"
#include "tdg/ledger.hpp"
#include "tdg/metrics.hpp"
#include "tdg/scenario.hpp"
#include "tdg/world.hpp"

namespace tdg {

// The live ledger and the one rebuilt from the event log disagree.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunResult {
  ScenarioConfig config;
  EventLog log;
  MetricsReport report;
  Ledger ledger;
  std::map<AgentId, double> final_tau;  // computing agents at the horizon
};

inline RunResult run_scenario(const ScenarioConfig& cfg) {
  World world(cfg);
  RunResult out;
  out.config = cfg;
  out.log.header = world.header();
  for (Tick t = 1; t <= cfg.horizon_ticks; ++t) {
    auto events = world.step(t);
    out.log.events.insert(out.log.events.end(), std::make_move_iterator(events.begin()),
                          std::make_move_iterator(events.end()));
  }
  out.ledger = world.ledger();
  for (const auto& a : world.agents()) out.final_tau[a.id] = a.reputation.tau();
  if (auto bad = verify_chain(out.ledger)) {
    throw ConsistencyError("ledger fails verification at block " + std::to_string(*bad));
  }
  out.report = compute_metrics(out.log);
  if (out.report.ledger_head != to_hex(out.ledger.head())) {
    throw ConsistencyError("ledger head differs from the one rebuilt from events");
  }
  return out;
}

namespace detail {

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  writer(out);
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace detail

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  detail::write_file(dir / "summary.csv", [&](std::ostream& o) { write_summary(o, r.report); });
  detail::write_file(dir / "series.csv", [&](std::ostream& o) { write_series(o, r.report); });
  detail::write_file(dir / "ledger.txt", [&](std::ostream& o) { export_ledger(r.ledger, o); });
  detail::write_file(dir / "effective_config.txt", [&](std::ostream& o) { o << emit_scenario(r.config); });
  detail::write_file(dir / "events.log", [&](std::ostream& o) { write_log(o, r.log); });
}

}  // namespace tdg
