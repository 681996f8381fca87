// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "tdg/tdg.hpp"

namespace {

using namespace tdg;

const std::string kScenarioDir = TDG_SCENARIO_DIR;

bool less(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
}

// Every run made by the suite is audited for credit conservation and
// community lifecycle soundness.
struct Audit {
  std::mutex mutex;
  int runs = 0;
  std::vector<std::string> conservation;
  std::vector<std::string> lifecycle;
  std::vector<std::string> quorum;

  void check(const RunResult& r) {
    std::vector<std::string> bad_credit, bad_life, bad_quorum;
    Millicredits committed = 0;
    std::map<CommunityId, std::vector<MembershipEvent>> logs;
    for (const auto& e : r.log.events) {
      if (const auto* v = e.as<ev::WuValidated>()) committed += r.config.work.base_credit * v->complexity * 1000;
      if (const auto* t = e.as<ev::TcEvent>()) logs[t->event.community].push_back(t->event);
    }
    Millicredits held = 0;
    for (const auto& [agent, mc] : balances(r.ledger)) held += mc;
    if (held != committed) {
      bad_credit.push_back(r.config.name + " seed " + std::to_string(r.config.seed) + ": balances " +
                           std::to_string(held) + " != committed " + std::to_string(committed));
    }
    for (const auto& [id, log] : logs) {
      for (auto& p : check_lifecycle(log)) bad_life.push_back(r.config.name + ": " + p);
      std::size_t invited = 0;
      for (const auto& e : log) {
        if (e.tick == log.front().tick && e.kind == MembershipKind::Invited) ++invited;
      }
      if (invited < r.config.params.community.min_size) {
        bad_quorum.push_back(r.config.name + ": community " + std::to_string(id.value) + " formed with " +
                             std::to_string(invited) + " invitees");
      }
    }
    std::lock_guard lock(mutex);
    ++runs;
    conservation.insert(conservation.end(), bad_credit.begin(), bad_credit.end());
    lifecycle.insert(lifecycle.end(), bad_life.begin(), bad_life.end());
    quorum.insert(quorum.end(), bad_quorum.begin(), bad_quorum.end());
  }
};

Audit audit;

RunResult run(const ScenarioConfig& cfg) {
  auto r = run_scenario(cfg);
  audit.check(r);
  return r;
}

ScenarioConfig load(const std::string& name) { return parse_scenario(kScenarioDir + "/" + name); }

// Runs f(seed) for seeds 1..10 in parallel and returns the results in seed order.
template <typename F>
auto per_seed(F f) {
  std::vector<std::future<decltype(f(std::uint64_t{1}))>> futures;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) futures.push_back(std::async(std::launch::async, f, seed));
  std::vector<decltype(f(std::uint64_t{1}))> out;
  for (auto& fu : futures) out.push_back(fu.get());
  return out;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<std::pair<std::string, Outcome>> results;

void report(const std::string& id, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %s: %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
  results.emplace_back(id, o);
}

Outcome ac1() {
  const ReplicationLimits limits;
  const bool ends = raw_replication_factor(1.0, limits) == 1.5 && raw_replication_factor(0.0, limits) == 5.0;
  std::ostringstream detail;
  detail << "f(1)=" << raw_replication_factor(1.0, limits) << " f(0)=" << raw_replication_factor(0.0, limits);
  bool unbiased = true;
  for (double x : {1.5, 3.25, 4.9}) {
    Rng rng = make_stream(2024, "ac1");
    double sum = 0;
    for (int i = 0; i < 100000; ++i) sum += roulette_round(x, rng);
    const double err = std::abs(sum / 100000 - x);
    unbiased = unbiased && err <= 0.02;
    detail << " |mean-" << x << "|=" << err;
  }
  return {ends && unbiased, detail.str()};
}

Outcome ac2() {
  Rng rng = make_stream(99, "ac2");
  const ReplicationLimits limits;
  int emitted = 0, violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto n = 2 + uniform_index(rng, 40);
    std::vector<Candidate> pool;
    for (std::uint32_t i = 0; i < n; ++i) {
      const double tau = uniform01(rng);
      pool.push_back(make_candidate(AgentId{i}, tau, std::max(1, roulette_round(raw_replication_factor(tau, limits), rng)),
                                    bernoulli(rng, 0.2)));
    }
    Rng sel = make_stream(static_cast<std::uint64_t>(trial), "ac2-select");
    const auto s = dgds_select(pool, sel);
    if (!s) continue;
    ++emitted;
    int untrusted = 0, trusted = 0;
    for (AgentId a : s.group.members) {
      const auto cls = pool[a.value].trust_class;
      untrusted += cls == TrustClass::Untrusted;
      trusted += cls == TrustClass::Trusted;
    }
    violations += untrusted > trusted;
  }
  return {violations == 0 && emitted > 0,
          std::to_string(emitted) + " groups emitted, " + std::to_string(violations) + " with untrusted > trusted"};
}

Outcome ac3() {
  const auto base = load("malice_dgds.tdg");
  struct Row {
    Rational dgds, random;
    int malicious = 0, untrusted = 0;
  };
  const auto rows = per_seed([&](std::uint64_t seed) {
    auto cfg = base;
    cfg.seed = seed;
    cfg.strategy = Strategy::Dgds;
    const auto d = run(cfg);
    cfg.strategy = Strategy::Random;
    cfg.params.random_replication = d.report.mean_group_size.value();
    const auto r = run(cfg);
    Row row{d.report.wrong_result_acceptance_rate, r.report.wrong_result_acceptance_rate};
    for (const auto& [id, profile] : d.log.header.agents) {
      if (profile != Behavior::Malicious) continue;
      ++row.malicious;
      row.untrusted += classify(d.final_tau.at(id)) == TrustClass::Untrusted;
    }
    return row;
  });
  int lower = 0, all_untrusted = 0;
  std::ostringstream detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    lower += less(rows[i].dgds, rows[i].random);
    all_untrusted += rows[i].malicious > 0 && rows[i].untrusted == rows[i].malicious;
    detail << " s" << i + 1 << "=" << rows[i].dgds.str() << "/" << rows[i].random.str() << "/" << rows[i].untrusted
           << "of" << rows[i].malicious;
  }
  return {lower >= 9 && all_untrusted == 10,
          "dgds lower in " + std::to_string(lower) + "/10 seeds, all malicious untrusted in " +
              std::to_string(all_untrusted) + "/10 seeds (wrong-rate dgds/random/untrusted:" + detail.str() + ")"};
}

Outcome ac4() {
  const auto cfg = load("outage_centralized.tdg");
  Tick down = 0, up = 0;
  for (const auto& f : cfg.faults) {
    if (f.entity != EntityKind::Server) continue;
    (f.up ? up : down) = f.tick;
  }
  const auto r = run(cfg);
  int issued_in_window = 0;
  std::vector<WorkUnitId> buffered, flushed;
  bool validated_early = false;
  for (const auto& e : r.log.events) {
    if (e.as<ev::WuIssued>() && e.tick >= down && e.tick < up) ++issued_in_window;
    if (const auto* c = e.as<ev::WuCompleted>(); c && c->route == CollectRoute::Buffered) buffered.push_back(c->wu);
    if (const auto* v = e.as<ev::WuValidated>()) {
      const bool was_buffered = std::find(buffered.begin(), buffered.end(), v->wu) != buffered.end();
      if (was_buffered && e.tick < up) validated_early = true;
      if (was_buffered && e.tick == up) flushed.push_back(v->wu);
    }
  }
  const bool pass = issued_in_window == 0 && !buffered.empty() && flushed == buffered && !validated_early &&
                    r.report.issuance_gap_ticks >= up - down;
  return {pass, "issued in [" + std::to_string(down) + "," + std::to_string(up) + ")=" +
                    std::to_string(issued_in_window) + ", buffered " + std::to_string(buffered.size()) +
                    ", flushed in order at " + std::to_string(up) + ": " + std::to_string(flushed.size()) +
                    ", issuance_gap_ticks=" + std::to_string(r.report.issuance_gap_ticks)};
}

Outcome ac5() {
  const auto cfg = load("failover_trust.tdg");
  Tick fault_tick = 0;
  for (const auto& f : cfg.faults) {
    if (f.entity == EntityKind::Server && !f.up) fault_tick = f.tick;
  }
  auto clean = cfg;
  clean.faults.clear();
  auto faulted = std::async(std::launch::async, [&] { return run(cfg); });
  const auto base = run(clean);
  const auto r = faulted.get();

  bool founder_was_tcm = false;
  Tick reelected = -1;
  const AgentId founder = r.log.header.work_agents.at(0);
  for (const auto& e : r.log.events) {
    const auto* t = e.as<ev::TcEvent>();
    if (!t || e.tick < fault_tick) continue;
    if (t->event.kind == MembershipKind::TcmFailed && t->event.agent == founder) founder_was_tcm = true;
    if (t->event.kind == MembershipKind::TcmElected && founder_was_tcm && reelected < 0) reelected = e.tick;
  }
  const bool throughput_ok = r.report.validated * 10 >= base.report.validated * 9;
  const bool pass = founder_was_tcm && reelected >= 0 && reelected <= fault_tick + 1 &&
                    r.report.issuance_gap_ticks <= 2 && throughput_ok;
  return {pass, "TcmElected at tick " + std::to_string(reelected) + ", issuance_gap_ticks=" +
                    std::to_string(r.report.issuance_gap_ticks) + ", throughput " + r.report.throughput.str() +
                    " vs no-fault " + base.report.throughput.str()};
}

Outcome ac6() {
  const auto base = load("etc_throughput.tdg");
  struct Row {
    Rational on_tp, off_tp, on_ro, off_ro;
  };
  const auto rows = per_seed([&](std::uint64_t seed) {
    auto cfg = base;
    cfg.seed = seed;
    cfg.params.formation_enabled = true;
    const auto on = run(cfg);
    cfg.params.formation_enabled = false;
    const auto off = run(cfg);
    return Row{on.report.throughput, off.report.throughput, on.report.replication_overhead,
               off.report.replication_overhead};
  });
  int wins = 0;
  std::ostringstream detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    wins += less(r.off_tp, r.on_tp) && less(r.on_ro, r.off_ro);
    detail << " s" << i + 1 << "=" << r.on_tp.str() << "/" << r.off_tp.str();
  }
  return {wins >= 9, "eTC run better on both metrics in " + std::to_string(wins) +
                         "/10 seeds (throughput on/off:" + detail.str() + ")"};
}

Outcome ac7() {
  const auto r = run(load("minimal.tdg"));
  Rng rng = make_stream(7, "ac7");
  int detected = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    auto blocks = r.ledger.blocks();
    auto& b = blocks[uniform_index(rng, blocks.size())];
    const int bit = static_cast<int>(uniform_index(rng, 64));
    switch (uniform_index(rng, 7)) {
      case 0: b.index ^= 1ULL << bit; break;
      case 1: b.prev_hash[uniform_index(rng, 32)] ^= static_cast<std::uint8_t>(1u << (bit % 8)); break;
      case 2: b.wu.value ^= 1ULL << bit; break;
      case 3: b.allocations[uniform_index(rng, b.allocations.size())].agent.value ^= 1u << (bit % 32); break;
      case 4: b.allocations[uniform_index(rng, b.allocations.size())].amount ^= std::int64_t{1} << bit; break;
      case 5: b.tick ^= std::int64_t{1} << bit; break;
      default: b.hash[uniform_index(rng, 32)] ^= static_cast<std::uint8_t>(1u << (bit % 8)); break;
    }
    detected += verify_chain(Ledger::from_blocks(std::move(blocks))).has_value();
  }
  std::lock_guard lock(audit.mutex);
  const bool pass = detected == trials && audit.conservation.empty() && audit.runs > 0;
  return {pass, std::to_string(detected) + "/" + std::to_string(trials) + " mutations detected; conservation held on " +
                    std::to_string(audit.runs - static_cast<int>(audit.conservation.size())) + "/" +
                    std::to_string(audit.runs) + " runs" +
                    (audit.conservation.empty() ? "" : " (first: " + audit.conservation.front() + ")")};
}

Outcome ac8() {
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(kScenarioDir)) {
    if (entry.path().extension() == ".tdg") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  auto render = [](const RunResult& r) {
    std::ostringstream s, t, l;
    write_summary(s, r.report);
    write_series(t, r.report);
    export_ledger(r.ledger, l);
    return s.str() + "\x1f" + t.str() + "\x1f" + l.str();
  };
  std::vector<std::string> differing;
  for (const auto& p : paths) {
    const auto cfg = parse_scenario(p);
    auto first = std::async(std::launch::async, [&] { return render(run(cfg)); });
    const auto second = render(run(cfg));
    if (first.get() != second) differing.push_back(std::filesystem::path(p).filename().string());
  }
  std::string detail = std::to_string(paths.size() - differing.size()) + "/" + std::to_string(paths.size()) +
                       " bundled scenarios byte-identical on rerun";
  for (const auto& d : differing) detail += " differs:" + d;
  return {differing.empty() && !paths.empty(), detail};
}

Outcome ac9() {
  Rng rng = make_stream(5, "ac9");
  CommunityParams params;
  int misfires = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::map<AgentId, double> reps;
    const auto n = uniform_index(rng, 12);
    for (std::uint32_t i = 1; i <= n; ++i) reps[AgentId{i}] = uniform01(rng);
    const auto eligible = static_cast<std::size_t>(
        std::count_if(reps.begin(), reps.end(), [&](const auto& kv) { return kv.second >= params.join_threshold; }));
    const auto invites = evaluate_formation(AgentId{0}, reps, params);
    misfires += invites.has_value() != (eligible >= params.min_size);
  }
  std::lock_guard lock(audit.mutex);
  const bool pass = misfires == 0 && audit.lifecycle.empty() && audit.quorum.empty();
  std::string detail = std::to_string(audit.lifecycle.size()) + " illegal transitions over " +
                       std::to_string(audit.runs) + " runs, " + std::to_string(audit.quorum.size()) +
                       " formations below quorum, " + std::to_string(misfires) +
                       " evaluate_formation misfires in 10000 random pools";
  if (!audit.lifecycle.empty()) detail += " (first: " + audit.lifecycle.front() + ")";
  if (!audit.quorum.empty()) detail += " (first: " + audit.quorum.front() + ")";
  return {pass, detail};
}

}  // namespace

int main() {
  report("AC-1", ac1);
  report("AC-2", ac2);
  report("AC-3", ac3);
  report("AC-4", ac4);
  report("AC-5", ac5);
  report("AC-6", ac6);
  report("AC-8", ac8);
  // Conservation and lifecycle soundness cover every run made above.
  report("AC-7", ac7);
  report("AC-9", ac9);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.second.pass; });
  std::printf("%zu/%zu acceptance criteria passed\n", results.size() - static_cast<std::size_t>(failed),
              results.size());
  return failed == 0 ? 0 : 1;
}
