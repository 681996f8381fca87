#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "tdg/runner.hpp"

using namespace tdg;

namespace {

const RunResult& minimal() {
  static const RunResult r = run_scenario(parse_scenario(std::string(TDG_SCENARIO_DIR) + "/minimal.tdg"));
  return r;
}

EventLog hand_log() {
  EventLog log;
  log.header.scenario = "hand";
  log.header.mode = Mode::Centralized;
  log.header.strategy = Strategy::Drds;
  log.header.horizon = 8;
  log.header.wu_total = 3;
  log.header.agents = {{AgentId{0}, Behavior::Reliable}, {AgentId{1}, Behavior::Malicious}};
  auto add = [&](Tick t, EventPayload p) { log.events.push_back(SimEvent{t, std::move(p)}); };
  add(1, ev::WuIssued{WorkUnitId{0}, AgentId{0}, {AgentId{0}}, false, std::nullopt});
  add(1, ev::WuAccepted{WorkUnitId{0}, AgentId{0}});
  add(3, ev::WuCompleted{WorkUnitId{0}, AgentId{0}, 4, 11});
  add(3, ev::WuValidated{WorkUnitId{0}, AgentId{0}, {AgentId{0}}, 1, 4, true});
  add(3, ev::CreditCommitted{WorkUnitId{0}, 0, {{AgentId{0}, 400000}}});
  // Agent 1 idles with work queued during ticks 1..5.
  add(6, ev::WuIssued{WorkUnitId{1}, AgentId{0}, {AgentId{1}}, false, std::nullopt});
  add(6, ev::WuAccepted{WorkUnitId{1}, AgentId{1}});
  add(7, ev::WuCompleted{WorkUnitId{1}, AgentId{1}, 2, 99});
  add(7, ev::WuValidated{WorkUnitId{1}, AgentId{0}, {AgentId{1}}, 1, 2, false});
  add(7, ev::CreditCommitted{WorkUnitId{1}, 1, {{AgentId{1}, 200000}}});
  add(7, ev::RatingIssued{WorkUnitId{1}, AgentId{0}, AgentId{1}, RatingCause::WrongResult, -1.0});
  return log;
}

}  // namespace

TEST(Rational, SixDecimalsHalfAwayFromZero) {
  EXPECT_EQ((Rational{1, 3}).str(), "0.333333");
  EXPECT_EQ((Rational{2, 3}).str(), "0.666667");
  EXPECT_EQ((Rational{1, 2000000}).str(), "0.000001");
  EXPECT_EQ((Rational{-5, 2}).str(), "-2.500000");
  EXPECT_EQ((Rational{7, 0}).str(), "0.000000");
  EXPECT_EQ((Rational{1, 2}), (Rational{3, 6}));
}

TEST(Metrics, HandBuiltLog) {
  const auto r = compute_metrics(hand_log());
  EXPECT_EQ(r.issued, 2);
  EXPECT_EQ(r.validated, 2);
  EXPECT_EQ(r.wrong_accepted, 1);
  EXPECT_EQ(r.throughput, (Rational{2, 8}));
  EXPECT_EQ(r.wrong_result_acceptance_rate, (Rational{1, 2}));
  EXPECT_EQ(r.mean_group_size, (Rational{1, 1}));
  EXPECT_EQ(r.wasted_work, 0);
  // Ticks 2..5: one WU still queued, agent 1 idle, nothing issued.
  EXPECT_EQ(r.issuance_gap_ticks, 4);
  EXPECT_EQ(r.credits_total, 600000);
  EXPECT_EQ(r.credits.at(Behavior::Malicious), 200000);
  EXPECT_DOUBLE_EQ(r.mean_tau.at(Behavior::Malicious), 0.0);
  EXPECT_DOUBLE_EQ(r.mean_tau.at(Behavior::Reliable), 0.5);
  EXPECT_EQ(r.ledger_blocks, 2);
  EXPECT_EQ(r.value("validated"), "2");
  EXPECT_EQ(r.value("throughput"), "0.250000");
  EXPECT_THROW(r.value("nope"), std::out_of_range);
  ASSERT_EQ(r.series.size(), 8u);
  EXPECT_EQ(r.series[5], (SeriesRow{6, 1, 0, 2, 0}));
}

TEST(Metrics, RejectsMismatchedCreditBlocks) {
  auto log = hand_log();
  std::get<ev::CreditCommitted>(log.events[4].payload).block = 5;
  EXPECT_THROW(compute_metrics(log), LogParseError);
}

TEST(Metrics, RunAgreesWithIndependentCounts) {
  const auto& r = minimal();
  std::int64_t issued = 0, validated = 0, wrong = 0, members = 0, group = 0;
  Millicredits credits = 0;
  std::set<CommunityId> elected;
  for (const auto& e : r.log.events) {
    if (const auto* i = e.as<ev::WuIssued>()) {
      ++issued;
      members += static_cast<std::int64_t>(i->members.size());
    }
    if (const auto* v = e.as<ev::WuValidated>()) {
      ++validated;
      group += v->group_size;
      wrong += !v->correct;
      credits += r.config.work.base_credit * v->complexity * 1000;
    }
    if (const auto* t = e.as<ev::TcEvent>(); t && t->event.kind == MembershipKind::TcmElected) {
      elected.insert(t->event.community);
    }
  }
  const auto& m = r.report;
  EXPECT_EQ(m.issued, issued);
  EXPECT_EQ(m.validated, validated);
  EXPECT_EQ(m.throughput, (Rational{validated, r.config.horizon_ticks}));
  EXPECT_EQ(m.replication_overhead, (Rational{group, validated}));
  EXPECT_EQ(m.mean_group_size, (Rational{members, issued}));
  EXPECT_EQ(m.wrong_result_acceptance_rate, (Rational{wrong, validated}));
  EXPECT_EQ(m.credits_total, credits);
  EXPECT_EQ(m.communities_formed, static_cast<std::int64_t>(elected.size()));
  EXPECT_EQ(m.ledger_blocks, static_cast<std::int64_t>(r.ledger.size()));
  EXPECT_EQ(m.ledger_head, to_hex(r.ledger.head()));
}

TEST(Metrics, ReplayedLogReproducesOutputs) {
  const auto& r = minimal();
  std::stringstream text;
  write_log(text, r.log);
  const auto back = read_log(text);
  EXPECT_EQ(back.header, r.log.header);
  EXPECT_EQ(back.events, r.log.events);
  const auto again = compute_metrics(back);
  std::ostringstream a, b, c, d;
  write_summary(a, r.report);
  write_summary(b, again);
  write_series(c, r.report);
  write_series(d, again);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(c.str(), d.str());
}

TEST(Metrics, SummaryLeadsWithRunIdentity) {
  const auto& s = minimal().report.summary;
  ASSERT_GE(s.size(), 6u);
  EXPECT_EQ(s[0], (std::pair<std::string, std::string>{"scenario", "minimal"}));
  EXPECT_EQ(s[1].first, "mode");
  EXPECT_EQ(s[5], (std::pair<std::string, std::string>{"hash_function", "sha256"}));
  EXPECT_EQ(s.back().first, "ledger_head");
}

TEST(EventLog, MalformedInputIsRejected) {
  std::stringstream none("1 WuIssued\n");
  EXPECT_THROW(read_log(none), LogParseError);
  std::stringstream text;
  write_log(text, hand_log());
  auto broken = text.str() + "9 NoSuchEvent x=1\n";
  std::stringstream in(broken);
  EXPECT_THROW(read_log(in), LogParseError);
}
