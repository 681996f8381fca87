#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tdg/events.hpp"
#include "tdg/ledger.hpp"
#include "tdg/scenario.hpp"

namespace tdg {

// Exact ratio, printed with six decimals (half away from zero).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

  std::string str() const {
    if (den == 0) return "0.000000";
    const bool negative = (num < 0) != (den < 0);
    const auto n = static_cast<unsigned __int128>(num < 0 ? -num : num);
    const auto d = static_cast<unsigned __int128>(den < 0 ? -den : den);
    const auto scaled = (n * 1'000'000 * 2 + d) / (2 * d);
    const auto whole = static_cast<std::uint64_t>(scaled / 1'000'000);
    auto frac = std::to_string(static_cast<std::uint64_t>(scaled % 1'000'000));
    frac.insert(0, 6 - frac.size(), '0');
    return std::string(negative && scaled != 0 ? "-" : "") + std::to_string(whole) + "." + frac;
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
  }
};

struct SeriesRow {
  Tick tick = 0;
  std::int64_t issued = 0;
  std::int64_t validated = 0;
  std::int64_t active_agents = 0;
  std::int64_t etc_size = 0;

  friend bool operator==(const SeriesRow&, const SeriesRow&) = default;
};

struct MetricsReport {
  std::int64_t issued = 0;
  std::int64_t validated = 0;
  Rational throughput;            // validated WUs per tick
  Rational replication_overhead;  // results computed per validated WU
  Rational mean_group_size;       // replicas per issued WU
  std::int64_t wasted_work = 0;   // complexity units outside any consensus
  std::int64_t wrong_accepted = 0;
  Rational wrong_result_acceptance_rate;
  std::int64_t issuance_gap_ticks = 0;
  std::int64_t short_groups = 0;
  std::int64_t redistributed = 0;
  std::int64_t ratings = 0;
  Millicredits credits_total = 0;
  std::map<Behavior, double> mean_tau;
  std::map<Behavior, Millicredits> credits;
  std::int64_t ledger_blocks = 0;
  std::string ledger_head;
  std::int64_t communities_formed = 0;
  std::vector<SeriesRow> series;
  std::vector<std::pair<std::string, std::string>> summary;  // ordered metric,value rows

  std::string value(std::string_view metric) const {
    for (const auto& [k, v] : summary) {
      if (k == metric) return v;
    }
    throw std::out_of_range("no metric " + std::string(metric));
  }
};

// Every metric comes from the event log alone, so a replayed log yields the
// same report as the live run.
inline MetricsReport compute_metrics(const EventLog& log) {
  const auto& h = log.header;
  MetricsReport r;
  const std::int64_t min_group = h.mode == Mode::Centralized ? 1 : 2;

  std::map<AgentId, bool> online;
  std::map<AgentId, std::optional<WorkUnitId>> holding;
  std::map<AgentId, std::deque<double>> windows;
  for (const auto& [id, profile] : h.agents) {
    online[id] = true;
    holding[id] = std::nullopt;
    windows[id];
  }
  std::map<WorkUnitId, std::vector<std::pair<AgentId, std::int64_t>>> outcomes;
  std::map<CommunityId, std::int64_t> community_size;
  std::set<CommunityId> elected;
  std::int64_t queued = h.wu_total;
  std::int64_t issued_members = 0;
  std::int64_t validated_group = 0;
  Ledger ledger;

  std::int64_t run = 0;
  std::size_t i = 0;
  for (Tick tick = 1; tick <= h.horizon; ++tick) {
    SeriesRow row{tick};
    std::int64_t queued_at_issue = -1;
    std::int64_t idle_at_issue = 0;
    auto snapshot = [&] {
      if (queued_at_issue >= 0) return;
      queued_at_issue = queued;
      for (const auto& [id, up] : online) {
        if (up && !holding[id]) ++idle_at_issue;
      }
    };
    auto release = [&](AgentId a, WorkUnitId wu) {
      auto it = holding.find(a);
      if (it != holding.end() && it->second == wu) it->second.reset();
    };

    for (; i < log.events.size() && log.events[i].tick <= tick; ++i) {
      const auto& e = log.events[i];
      if (e.tick < tick) throw LogParseError("events out of tick order");
      const auto kind = e.kind();
      if (kind != EventKind::ServerDown && kind != EventKind::ServerUp && kind != EventKind::AgentDown &&
          kind != EventKind::AgentUp) {
        snapshot();
      }
      std::visit(
          [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ev::WuIssued>) {
              ++r.issued;
              ++row.issued;
              --queued;
              issued_members += static_cast<std::int64_t>(p.members.size());
              if (p.short_group) ++r.short_groups;
              outcomes[p.wu].clear();
            } else if constexpr (std::is_same_v<T, ev::WuAccepted>) {
              holding[p.agent] = p.wu;
            } else if constexpr (std::is_same_v<T, ev::WuCompleted> || std::is_same_v<T, ev::WuDropped> ||
                                 std::is_same_v<T, ev::WuTimedOut>) {
              release(p.agent, p.wu);
              outcomes[p.wu].emplace_back(p.agent, p.units);
            } else if constexpr (std::is_same_v<T, ev::WuValidated>) {
              ++r.validated;
              ++row.validated;
              validated_group += p.group_size;
              if (!p.correct) ++r.wrong_accepted;
              for (const auto& [agent, units] : outcomes[p.wu]) {
                if (std::find(p.consensus.begin(), p.consensus.end(), agent) == p.consensus.end()) {
                  r.wasted_work += units;
                }
              }
              outcomes.erase(p.wu);
            } else if constexpr (std::is_same_v<T, ev::WuRedistributed>) {
              ++queued;
              ++r.redistributed;
              for (const auto& o : outcomes[p.wu]) r.wasted_work += o.second;
              outcomes.erase(p.wu);
            } else if constexpr (std::is_same_v<T, ev::AgentDown>) {
              online[p.agent] = false;
            } else if constexpr (std::is_same_v<T, ev::AgentUp>) {
              online[p.agent] = true;
            } else if constexpr (std::is_same_v<T, ev::RatingIssued>) {
              ++r.ratings;
              auto& w = windows[p.subject];
              w.push_back(p.value);
              if (w.size() > h.window) w.pop_front();
            } else if constexpr (std::is_same_v<T, ev::TcEvent>) {
              const auto& m = p.event;
              switch (m.kind) {
                case MembershipKind::Joined: ++community_size[m.community]; break;
                case MembershipKind::Left:
                case MembershipKind::Evicted: --community_size[m.community]; break;
                case MembershipKind::Dissolved: community_size.erase(m.community); break;
                case MembershipKind::TcmElected:
                  if (elected.insert(m.community).second) ++r.communities_formed;
                  break;
                default: break;
              }
            } else if constexpr (std::is_same_v<T, ev::CreditCommitted>) {
              Millicredits total = 0;
              for (const auto& a : p.allocations) {
                total += a.amount;
                auto it = h.agents.find(a.agent);
                if (it != h.agents.end()) r.credits[it->second] += a.amount;
              }
              const auto& block = ledger.append(p.wu, p.allocations, total, tick);
              if (block.index != p.block) throw LogParseError("credit block index mismatch");
              r.credits_total += total;
            }
          },
          e.payload);
    }
    snapshot();

    const bool starved = queued_at_issue > 0 && idle_at_issue >= min_group && row.issued == 0;
    run = starved ? run + 1 : 0;
    r.issuance_gap_ticks = std::max(r.issuance_gap_ticks, run);

    for (const auto& [id, up] : online) row.active_agents += up ? 1 : 0;
    for (const auto& [id, size] : community_size) row.etc_size += size;
    r.series.push_back(row);
  }
  if (i != log.events.size()) throw LogParseError("events beyond the horizon");

  r.throughput = Rational{r.validated, h.horizon};
  r.replication_overhead = Rational{validated_group, r.validated};
  r.mean_group_size = Rational{issued_members, r.issued};
  r.wrong_result_acceptance_rate = Rational{r.wrong_accepted, r.validated};
  r.ledger_blocks = static_cast<std::int64_t>(ledger.size());
  r.ledger_head = to_hex(ledger.head());

  std::map<Behavior, std::pair<double, int>> tau_sum;
  for (const auto& [id, profile] : h.agents) {
    const auto& w = windows[id];
    const double tau = w.empty() ? kNeutralReputation
                                 : (1.0 + std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size())) / 2.0;
    tau_sum[profile].first += tau;
    ++tau_sum[profile].second;
    r.credits.try_emplace(profile, 0);
  }
  for (const auto& [profile, s] : tau_sum) r.mean_tau[profile] = s.first / s.second;

  auto put = [&](std::string key, std::string value) { r.summary.emplace_back(std::move(key), std::move(value)); };
  put("scenario", h.scenario);
  put("mode", std::string(to_string(h.mode)));
  put("strategy", std::string(to_string(h.strategy)));
  put("seed", std::to_string(h.seed));
  put("horizon_ticks", std::to_string(h.horizon));
  put("hash_function", std::string(kHashFunction));
  put("wu_total", std::to_string(h.wu_total));
  put("issued", std::to_string(r.issued));
  put("validated", std::to_string(r.validated));
  put("throughput", r.throughput.str());
  put("replication_overhead", r.replication_overhead.str());
  put("mean_group_size", r.mean_group_size.str());
  put("wasted_work", std::to_string(r.wasted_work));
  put("wrong_result_acceptance_rate", r.wrong_result_acceptance_rate.str());
  put("issuance_gap_ticks", std::to_string(r.issuance_gap_ticks));
  put("short_groups", std::to_string(r.short_groups));
  put("redistributed", std::to_string(r.redistributed));
  put("ratings", std::to_string(r.ratings));
  put("communities_formed", std::to_string(r.communities_formed));
  put("credits_total", std::to_string(r.credits_total));
  for (const auto& [profile, tau] : r.mean_tau) {
    put("mean_tau_" + std::string(to_string(profile)), detail::format_double(tau));
  }
  for (const auto& [profile, mc] : r.credits) put("credits_" + std::string(to_string(profile)), std::to_string(mc));
  put("ledger_blocks", std::to_string(r.ledger_blocks));
  put("ledger_head", r.ledger_head);
  return r;
}

inline void write_summary(std::ostream& out, const MetricsReport& r) {
  out << "metric,value\n";
  for (const auto& [k, v] : r.summary) out << k << ',' << v << '\n';
}

inline void write_series(std::ostream& out, const MetricsReport& r) {
  out << "tick,issued,validated,active_agents,etc_size\n";
  for (const auto& s : r.series) {
    out << s.tick << ',' << s.issued << ',' << s.validated << ',' << s.active_agents << ',' << s.etc_size << '\n';
  }
}

}  // namespace tdg
