#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tdg/community.hpp"
#include "tdg/distribution.hpp"
#include "tdg/events.hpp"
#include "tdg/ledger.hpp"
#include "tdg/random.hpp"
#include "tdg/scenario.hpp"
#include "tdg/trust.hpp"
#include "tdg/types.hpp"

namespace tdg {

enum class WuState { Queued, Assigned, Collected, Validated, Failed };

// A result returned in a round that reached no majority.
struct UnratedResult {
  AgentId agent;
  std::uint64_t token = 0;
  bool late = false;
};

struct WorkUnit {
  WorkUnitId id{};
  std::uint32_t project = 0;  // owning work server / work agent
  int complexity = 1;
  std::uint64_t ground_truth = 0;
  Tick deadline_ticks = 0;
  WuState state = WuState::Queued;
  int requeues = 0;
  bool deferred_once = false;  // under-filled group already postponed one round
  std::vector<UnratedResult> unrated;  // rated against the result that finally validates
};

// XORed into the ground truth by every malicious agent, so they collude.
inline constexpr std::uint64_t kCollusionKey = 0x5eed'bad0'c0de'f00dULL;

enum class ReplicaState { Computing, Returned, Dropped, TimedOut };

struct Replica {
  AgentId agent;
  Tick assigned = 0;
  Tick quote_deadline = 0;  // agent's own pessimistic estimate
  Tick hard_deadline = 0;   // system timeout
  std::int64_t progress = 0;
  ReplicaState state = ReplicaState::Computing;
  std::uint64_t token = 0;
  bool late = false;
};

struct Assignment {
  WorkUnitId wu{};
  AgentId issuer{};
  std::optional<CommunityId> community;
  std::vector<Replica> replicas;
  std::int64_t group_size = 0;
  bool buffered = false;  // centralized: result parked in the collection server
};

struct AgentModel {
  AgentId id{};
  Behavior profile = Behavior::Reliable;
  int speed = 1;
  bool online = true;
  bool forced_down = false;
  std::optional<ChurnSchedule> churn;
  Tick churn_offset = 0;
  std::optional<WorkUnitId> current_wu;
  std::optional<CommunityId> community;
  ReputationProfile reputation;

  bool churn_online(Tick tick) const {
    if (!churn) return true;
    const Tick period = churn->up + churn->down;
    if (period <= 0 || churn->down == 0) return true;
    return (tick + churn_offset) % period < churn->up;
  }
};

struct WorkServer {
  std::uint32_t index = 0;
  AgentId owner{};  // trust mode: the work agent that replaced this server
  std::deque<WorkUnitId> queue;
  bool online = true;
  std::optional<CommunityId> community;
  Tick next_formation_attempt = 0;
};

struct BufferedResult {
  WorkUnitId wu{};
  std::uint32_t server = 0;
  AgentId agent{};
  std::uint64_t token = 0;
};

struct CentralizedTopology {
  std::vector<WorkServer> servers;
  std::deque<BufferedResult> collection_buffer;
  Tick timeout_ticks = 100;
  std::size_t cursor = 0;  // round-robin position of the assignment server
};

// Assignment server: round-robin over online servers with queued work.
inline std::optional<WorkUnitId> centralized_assign(CentralizedTopology& topo, std::vector<WorkUnit>& wus) {
  const auto n = topo.servers.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = topo.servers[(topo.cursor + i) % n];
    if (!s.online || s.queue.empty()) continue;
    const WorkUnitId wu = s.queue.front();
    s.queue.pop_front();
    topo.cursor = (topo.cursor + i + 1) % n;
    wus[wu.value].state = WuState::Assigned;
    return wu;
  }
  return std::nullopt;
}

// Routes a finished result to its work server, or parks it in the collection
// server while that work server is down.
inline CollectRoute collect_result(CentralizedTopology& topo, WorkUnit& wu, AgentId agent, std::uint64_t token) {
  if (wu.state != WuState::Assigned || wu.project >= topo.servers.size()) {
    throw ValidationError("result for unknown or unassigned WU " + std::to_string(wu.id.value));
  }
  if (topo.servers[wu.project].online) {
    wu.state = WuState::Collected;
    return CollectRoute::Routed;
  }
  topo.collection_buffer.push_back(BufferedResult{wu.id, wu.project, agent, token});
  return CollectRoute::Buffered;
}

// Removes the buffered results of one server, FIFO.
inline std::vector<BufferedResult> flush_collection_buffer(CentralizedTopology& topo, std::uint32_t server) {
  std::vector<BufferedResult> out;
  std::deque<BufferedResult> keep;
  for (auto& r : topo.collection_buffer) {
    if (r.server == server) out.push_back(r);
    else keep.push_back(r);
  }
  topo.collection_buffer = std::move(keep);
  return out;
}

struct ReplicaOutcome {
  AgentId agent;
  ReplicaState state = ReplicaState::Returned;
  std::uint64_t token = 0;
  bool late = false;
};

struct Verdict {
  bool validated = false;
  std::uint64_t token = 0;
  std::vector<AgentId> consensus;
  std::vector<std::pair<AgentId, RatingCause>> ratings;
};

// Strict majority of all group members, silent ones included.
inline Verdict validate_replicas(std::span<const ReplicaOutcome> group) {
  std::map<std::uint64_t, std::size_t> votes;
  for (const auto& o : group) {
    if (o.state == ReplicaState::Computing) throw StateError("validation before every replica finished");
    if (o.state == ReplicaState::Returned) ++votes[o.token];
  }
  Verdict v;
  for (const auto& [token, count] : votes) {
    if (2 * count > group.size()) {
      v.validated = true;
      v.token = token;
    }
  }
  for (const auto& o : group) {
    switch (o.state) {
      case ReplicaState::Returned:
        if (!v.validated) break;
        if (o.token == v.token) {
          v.consensus.push_back(o.agent);
          v.ratings.emplace_back(o.agent, o.late ? RatingCause::CorrectLate : RatingCause::CorrectOnTime);
        } else {
          v.ratings.emplace_back(o.agent, RatingCause::WrongResult);
        }
        break;
      case ReplicaState::Dropped: v.ratings.emplace_back(o.agent, RatingCause::DroppedWU); break;
      case ReplicaState::TimedOut: v.ratings.emplace_back(o.agent, RatingCause::TimedOut); break;
      case ReplicaState::Computing: break;
    }
  }
  return v;
}

// The simulated grid. One instance per run, advanced one tick at a time by a
// single driver. Phase order within a tick: faults, issuance, compute and
// collection, timeouts and validation, community lifecycle.
class World {
 public:
  explicit World(ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        workload_rng_(make_stream(cfg_.seed, "workload")),
        churn_rng_(make_stream(cfg_.seed, "churn")),
        selection_rng_(make_stream(cfg_.seed, "selection")),
        roulette_rng_(make_stream(cfg_.seed, "roulette")),
        behavior_rng_(make_stream(cfg_.seed, "behavior")),
        accept_rng_(make_stream(cfg_.seed, "acceptance")) {
    cfg_.limits.validate();
    cfg_.params.community.validate();

    std::uint32_t next_id = 0;
    for (const auto& g : cfg_.agents) {
      for (int i = 0; i < g.count; ++i) {
        AgentModel a;
        a.id = AgentId{next_id++};
        a.profile = g.profile;
        a.speed = g.speed;
        a.churn = g.churn;
        if (a.churn) {
          const Tick period = a.churn->up + a.churn->down;
          a.churn_offset = period > 0 ? static_cast<Tick>(uniform_index(churn_rng_, static_cast<std::size_t>(period))) : 0;
        }
        a.reputation = ReputationProfile(a.id, cfg_.params.window);
        agents_.push_back(std::move(a));
      }
    }

    topology_.timeout_ticks = cfg_.params.timeout_ticks;
    for (int s = 0; s < cfg_.work.servers; ++s) {
      WorkServer ws;
      ws.index = static_cast<std::uint32_t>(s);
      ws.owner = AgentId{next_id++};
      topology_.servers.push_back(ws);
    }

    for (std::int64_t i = 0; i < cfg_.work.wu_count; ++i) {
      WorkUnit wu;
      wu.id = WorkUnitId{static_cast<std::uint64_t>(i)};
      wu.project = static_cast<std::uint32_t>(i % cfg_.work.servers);
      const auto span = static_cast<std::size_t>(cfg_.work.complexity_hi - cfg_.work.complexity_lo + 1);
      wu.complexity = cfg_.work.complexity_lo + static_cast<int>(uniform_index(workload_rng_, span));
      wu.ground_truth = workload_rng_();
      wu.deadline_ticks = cfg_.params.timeout_ticks;
      topology_.servers[wu.project].queue.push_back(wu.id);
      wus_.push_back(wu);
    }

    header_.scenario = cfg_.name;
    header_.mode = cfg_.mode;
    header_.strategy = cfg_.strategy;
    header_.seed = cfg_.seed;
    header_.horizon = cfg_.horizon_ticks;
    header_.window = cfg_.params.window;
    header_.wu_total = cfg_.work.wu_count;
    for (const auto& a : agents_) header_.agents[a.id] = a.profile;
    if (cfg_.mode == Mode::Trust) {
      for (const auto& s : topology_.servers) header_.work_agents.push_back(s.owner);
    }
  }

  const ScenarioConfig& config() const noexcept { return cfg_; }
  const LogHeader& header() const noexcept { return header_; }
  const std::vector<AgentModel>& agents() const noexcept { return agents_; }
  const std::vector<WorkUnit>& work_units() const noexcept { return wus_; }
  const CentralizedTopology& topology() const noexcept { return topology_; }
  const std::map<WorkUnitId, Assignment>& in_flight() const noexcept { return assignments_; }
  const std::map<CommunityId, TrustCommunity>& communities() const noexcept { return communities_; }
  const Ledger& ledger() const noexcept { return ledger_; }
  std::size_t dgds_fallbacks() const noexcept { return dgds_fallbacks_; }

  std::vector<SimEvent> step(Tick tick) {
    events_.clear();
    now_ = tick;
    apply_faults();
    if (cfg_.mode == Mode::Centralized) {
      issue_centralized();
    } else {
      issue_trust();
    }
    compute();
    if (cfg_.mode == Mode::Centralized) {
      redistribute_on_timeout();
      validate_centralized();
    } else {
      expire_replicas();
      validate_trust();
      if (cfg_.params.formation_enabled) lifecycle();
    }
    return std::move(events_);
  }

  // Applies one fault immediately; the scheduled ones run in the fault phase.
  void inject_fault(const FaultSpec& f) {
    if (f.entity == EntityKind::Server) {
      if (f.index >= topology_.servers.size()) throw ValidationError("fault names unknown server");
      auto& s = topology_.servers[f.index];
      if (s.online == f.up) return;
      s.online = f.up;
      if (!f.up) {
        emit(ev::ServerDown{f.index});
        return;
      }
      emit(ev::ServerUp{f.index});
      if (cfg_.mode == Mode::Centralized) {
        for (const auto& r : flush_collection_buffer(topology_, f.index)) {
          wus_[r.wu.value].state = WuState::Collected;
          assignments_.at(r.wu).buffered = false;
          ready_.push_back(r.wu);
        }
      } else {
        for (auto& [id, tc] : communities_) {
          if (tc.founder() == s.owner) tc.pending_handback().clear();
        }
      }
      return;
    }
    if (f.index >= agents_.size()) throw ValidationError("fault names unknown agent");
    auto& a = agents_[f.index];
    a.forced_down = !f.up;
    set_online(a, f.up && a.churn_online(now_));
  }

 private:
  template <typename Payload>
  void emit(Payload&& p) {
    events_.push_back(SimEvent{now_, EventPayload{std::forward<Payload>(p)}});
  }

  void set_online(AgentModel& a, bool online) {
    if (a.online == online) return;
    a.online = online;
    if (online) emit(ev::AgentUp{a.id});
    else emit(ev::AgentDown{a.id});
  }

  bool is_work_agent(AgentId id) const { return id.value >= agents_.size(); }

  WorkServer& server_of_owner(AgentId owner) { return topology_.servers[owner.value - agents_.size()]; }

  bool available(AgentId id) const {
    if (is_work_agent(id)) return topology_.servers[id.value - agents_.size()].online;
    return agents_[id.value].online;
  }

  double tau_of(AgentId id) const { return is_work_agent(id) ? kNeutralReputation : agents_[id.value].reputation.tau(); }

  void rate(AgentId rater, AgentId subject, RatingCause cause, WorkUnitId wu) {
    const Rating r = make_rating(rater, subject, cause, now_);
    agents_[subject.value].reputation.record(r);
    emit(ev::RatingIssued{wu, rater, subject, cause, r.value});
  }

  // ---- phase 1 ----------------------------------------------------------
  void apply_faults() {
    for (const auto& f : cfg_.faults) {
      if (f.tick == now_) inject_fault(f);
    }
    for (auto& a : agents_) {
      if (a.churn) set_online(a, !a.forced_down && a.churn_online(now_));
    }
  }

  // ---- phase 2 ----------------------------------------------------------
  void start_assignment(WorkUnit& wu, AgentId issuer, std::optional<CommunityId> community,
                        const std::vector<AgentId>& members, bool short_group) {
    wu.state = WuState::Assigned;
    wu.deferred_once = false;
    Assignment a;
    a.wu = wu.id;
    a.issuer = issuer;
    a.community = community;
    a.group_size = static_cast<std::int64_t>(members.size());
    for (AgentId m : members) {
      auto& agent = agents_[m.value];
      const Tick expected = (wu.complexity + agent.speed - 1) / agent.speed;
      a.replicas.push_back(Replica{m, now_, now_ + 2 * expected, now_ + cfg_.params.timeout_ticks});
      agent.current_wu = wu.id;
    }
    assignments_[wu.id] = std::move(a);
    emit(ev::WuIssued{wu.id, issuer, members, short_group, community});
    for (AgentId m : members) emit(ev::WuAccepted{wu.id, m});
  }

  void issue_centralized() {
    for (auto& a : agents_) {
      if (!a.online || a.current_wu) continue;
      auto wu = centralized_assign(topology_, wus_);
      if (!wu) break;
      auto& unit = wus_[wu->value];
      start_assignment(unit, AgentId{unit.project}, std::nullopt, {a.id}, false);
    }
  }

  Selection select(std::span<const Candidate> pool, WorkUnitId wu) {
    switch (cfg_.strategy) {
      case Strategy::Drds: return drds_select(pool, selection_rng_);
      case Strategy::Dods: {
        const WorkUnitId one[] = {wu};
        return dods_assign(pool, one).front();
      }
      case Strategy::Dgds: {
        auto s = dgds_select(pool, selection_rng_, cfg_.params.dgds_trusted);
        if (s.status == SelectionStatus::FallbackToDrds) {
          // Untrusted agents sit out the fallback so they never outnumber trusted ones.
          ++dgds_fallbacks_;
          std::vector<Candidate> without_untrusted(pool.begin(), pool.end());
          for (auto& c : without_untrusted) c.busy = c.busy || c.trust_class == TrustClass::Untrusted;
          s = drds_select(without_untrusted, selection_rng_);
        }
        return s;
      }
      case Strategy::Random: {
        const int replication = std::max(1, roulette_round(cfg_.params.random_replication, roulette_rng_));
        return random_baseline_select(pool, replication, selection_rng_);
      }
    }
    return Selection::failed();
  }

  static void mark_busy(std::vector<Candidate>& pool, AgentId id) {
    for (auto& c : pool) {
      if (c.agent == id) c.busy = true;
    }
  }

  void issue_trust() {
    for (auto& s : topology_.servers) {
      if (s.queue.empty()) continue;
      std::optional<AgentId> issuer;
      const TrustCommunity* tc = nullptr;
      if (s.community) {
        tc = &communities_.at(*s.community);
        if (tc->tcm() && available(*tc->tcm())) issuer = tc->tcm();
      } else if (s.online) {
        issuer = s.owner;
      }
      if (!issuer) continue;

      // One f_min draw per idle agent per round.
      std::vector<Candidate> members;
      std::vector<Candidate> combined;
      for (const auto& a : agents_) {
        if (!a.online || a.current_wu) continue;
        const bool member = tc && a.community == tc->id();
        if (a.community && !member) continue;
        const auto c = make_candidate(a.id, a.reputation.tau(),
                                      std::max(1, effective_f_min(a.reputation, cfg_.limits, roulette_rng_)));
        if (member) members.push_back(c);
        combined.push_back(c);
      }

      while (!s.queue.empty()) {
        auto& wu = wus_[s.queue.front().value];
        std::optional<Selection> chosen;
        if (tc) {
          auto inside = select(members, wu.id);
          if (inside && !inside.group.short_group) chosen = std::move(inside);
        }
        if (!chosen) {
          auto any = select(combined, wu.id);
          if (!any) break;
          if (any.group.short_group && !cfg_.params.allow_short_groups && !wu.deferred_once) {
            wu.deferred_once = true;
            break;
          }
          chosen = std::move(any);
        }

        std::vector<AgentId> accepted;
        for (AgentId m : chosen->group.members) {
          if (cfg_.params.accept_probability < 1.0 && !bernoulli(accept_rng_, cfg_.params.accept_probability)) {
            emit(ev::WuRejected{wu.id, m});
            rate(*issuer, m, RatingCause::RejectedWU, wu.id);
            mark_busy(members, m);
            mark_busy(combined, m);
          } else {
            accepted.push_back(m);
          }
        }
        if (accepted.size() < std::min<std::size_t>(2, chosen->group.size())) continue;
        for (AgentId m : accepted) {
          mark_busy(members, m);
          mark_busy(combined, m);
        }
        s.queue.pop_front();
        const bool short_group = chosen->group.short_group || accepted.size() < chosen->group.size();
        start_assignment(wu, *issuer, tc ? std::optional{tc->id()} : std::nullopt, accepted, short_group);
      }
    }
  }

  // ---- phase 3 + 4 ------------------------------------------------------
  Replica& replica_of(Assignment& a, AgentId agent) {
    for (auto& r : a.replicas) {
      if (r.agent == agent) return r;
    }
    throw StateError("agent holds no replica of WU " + std::to_string(a.wu.value));
  }

  void compute() {
    for (auto& agent : agents_) {
      if (!agent.online || !agent.current_wu) continue;
      auto& a = assignments_.at(*agent.current_wu);
      auto& r = replica_of(a, agent.id);
      if (r.assigned >= now_ || r.state != ReplicaState::Computing) continue;
      auto& wu = wus_[a.wu.value];
      if (agent.profile == Behavior::FreeRider) {
        r.state = ReplicaState::Dropped;
        agent.current_wu.reset();
        emit(ev::WuDropped{wu.id, agent.id, r.progress});
        continue;
      }
      if (agent.profile == Behavior::Slow && !bernoulli(behavior_rng_, cfg_.params.slow_progress_probability)) continue;
      r.progress += agent.speed;
      if (r.progress < wu.complexity) continue;

      r.token = agent.profile == Behavior::Malicious ? wu.ground_truth ^ kCollusionKey : wu.ground_truth;
      r.state = ReplicaState::Returned;
      r.late = now_ > r.quote_deadline;
      agent.current_wu.reset();
      CollectRoute route = CollectRoute::Held;
      if (cfg_.mode == Mode::Centralized) {
        route = collect_result(topology_, wu, agent.id, r.token);
        if (route == CollectRoute::Routed) ready_.push_back(wu.id);
        else a.buffered = true;
      }
      emit(ev::WuCompleted{wu.id, agent.id, wu.complexity, r.token, r.late, route});
    }
  }

  // ---- phase 5 ----------------------------------------------------------
  void requeue(WorkUnit& wu, RequeueReason why) {
    ++wu.requeues;
    emit(ev::WuRedistributed{wu.id, why});
    if (cfg_.params.max_requeues > 0 && wu.requeues > cfg_.params.max_requeues) {
      wu.state = WuState::Failed;
      return;
    }
    wu.state = WuState::Queued;
    topology_.servers[wu.project].queue.push_back(wu.id);
  }

  void commit_credit(const WorkUnit& wu, const std::vector<AgentId>& consensus) {
    const Millicredits total = cfg_.work.base_credit * wu.complexity * 1000;
    auto allocs = split_credits(total, consensus);
    const auto& block = ledger_.append(wu.id, allocs, total, now_);
    emit(ev::CreditCommitted{wu.id, block.index, std::move(allocs)});
  }

  // Centralized mode: lapsed WUs go back to the queue; the lapsing client is
  // not penalized and may request again.
  void redistribute_on_timeout() {
    for (auto it = assignments_.begin(); it != assignments_.end();) {
      auto& a = it->second;
      auto& wu = wus_[a.wu.value];
      const auto& server = topology_.servers[wu.project];
      auto& r = a.replicas.front();
      if (!server.online || a.buffered || wu.state != WuState::Assigned || now_ < r.hard_deadline) {
        ++it;
        continue;
      }
      std::int64_t units = 0;
      if (r.state == ReplicaState::Computing) {
        units = r.progress;
        agents_[r.agent.value].current_wu.reset();
      }
      r.state = ReplicaState::TimedOut;
      emit(ev::WuTimedOut{wu.id, r.agent, units});
      requeue(wu, RequeueReason::Timeout);
      it = assignments_.erase(it);
    }
  }

  void validate_centralized() {
    while (!ready_.empty()) {
      const WorkUnitId id = ready_.front();
      ready_.pop_front();
      auto& wu = wus_[id.value];
      auto& a = assignments_.at(id);
      const auto& r = a.replicas.front();
      const ReplicaOutcome outcome{r.agent, r.state, r.token, r.late};
      const auto verdict = validate_replicas(std::span(&outcome, 1));
      wu.state = WuState::Validated;
      emit(ev::WuValidated{id, AgentId{wu.project}, verdict.consensus, a.group_size, wu.complexity,
                           verdict.token == wu.ground_truth});
      commit_credit(wu, verdict.consensus);
      assignments_.erase(id);
    }
  }

  void expire_replicas() {
    for (auto& [id, a] : assignments_) {
      for (auto& r : a.replicas) {
        if (r.state != ReplicaState::Computing || now_ < r.hard_deadline) continue;
        r.state = ReplicaState::TimedOut;
        auto& agent = agents_[r.agent.value];
        if (agent.current_wu == id) agent.current_wu.reset();
        emit(ev::WuTimedOut{id, r.agent, r.progress});
      }
    }
  }

  // Current TCM of the project's community, else the project owner.
  std::optional<AgentId> validator_for(const WorkServer& s) const {
    if (s.community) {
      const auto& tc = communities_.at(*s.community);
      if (tc.tcm() && available(*tc.tcm())) return tc.tcm();
    }
    if (s.online) return s.owner;
    return std::nullopt;
  }

  void validate_trust() {
    for (auto it = assignments_.begin(); it != assignments_.end();) {
      auto& a = it->second;
      const bool done = std::all_of(a.replicas.begin(), a.replicas.end(),
                                    [](const Replica& r) { return r.state != ReplicaState::Computing; });
      auto& wu = wus_[a.wu.value];
      const auto& server = topology_.servers[wu.project];
      const auto validator = done ? validator_for(server) : std::nullopt;
      if (!validator) {
        ++it;
        continue;
      }
      std::vector<ReplicaOutcome> outcomes;
      for (const auto& r : a.replicas) outcomes.push_back(ReplicaOutcome{r.agent, r.state, r.token, r.late});
      const auto verdict = validate_replicas(outcomes);
      if (verdict.validated) {
        wu.state = WuState::Validated;
        emit(ev::WuValidated{wu.id, *validator, verdict.consensus, a.group_size, wu.complexity,
                             verdict.token == wu.ground_truth});
      }
      for (const auto& [agent, cause] : verdict.ratings) rate(*validator, agent, cause, wu.id);
      if (verdict.validated) {
        for (const auto& u : wu.unrated) {
          const auto cause = u.token != verdict.token ? RatingCause::WrongResult
                             : u.late                 ? RatingCause::CorrectLate
                                                      : RatingCause::CorrectOnTime;
          rate(*validator, u.agent, cause, wu.id);
        }
        wu.unrated.clear();
      } else {
        for (const auto& r : a.replicas) {
          if (r.state == ReplicaState::Returned) wu.unrated.push_back(UnratedResult{r.agent, r.token, r.late});
        }
      }
      if (verdict.validated) {
        commit_credit(wu, verdict.consensus);
        if (a.community && !server.online) {
          if (auto tc = communities_.find(*a.community); tc != communities_.end()) {
            tc->second.pending_handback().push_back(wu.id);
          }
        }
      } else {
        requeue(wu, RequeueReason::Failed);
      }
      it = assignments_.erase(it);
    }
  }

  // ---- phase 6 ----------------------------------------------------------
  void sync_log(const TrustCommunity& tc) {
    auto& mirrored = mirrored_[tc.id()];
    const auto& log = tc.log();
    for (; mirrored < log.size(); ++mirrored) emit(ev::TcEvent{log[mirrored]});
  }

  std::map<AgentId, double> reputations() const {
    std::map<AgentId, double> out;
    for (const auto& a : agents_) out[a.id] = a.reputation.tau();
    return out;
  }

  double mean_tau(const std::vector<AgentId>& ids) const {
    if (ids.empty()) return kNeutralReputation;
    double sum = 0.0;
    for (AgentId id : ids) sum += tau_of(id);
    return sum / static_cast<double>(ids.size());
  }

  std::vector<AgentId> open_agents(bool online_only) const {
    std::vector<AgentId> out;
    for (const auto& a : agents_) {
      if (!a.community && (!online_only || a.online)) out.push_back(a.id);
    }
    return out;
  }

  bool project_complete(const WorkServer& s) const {
    if (!s.queue.empty()) return false;
    return std::none_of(assignments_.begin(), assignments_.end(),
                        [&](const auto& kv) { return wus_[kv.first.value].project == s.index; });
  }

  void release(TrustCommunity& tc, WorkServer& s) {
    for (auto& a : agents_) {
      if (a.community == tc.id()) a.community.reset();
    }
    s.community.reset();
  }

  JoinOffer offer_for(AgentId agent, const std::vector<AgentId>& inside) const {
    std::vector<AgentId> outside;
    for (AgentId id : open_agents(false)) {
      if (id != agent && std::find(inside.begin(), inside.end(), id) == inside.end()) outside.push_back(id);
    }
    return JoinOffer{expected_share(1.0, mean_tau(inside), cfg_.limits),
                     expected_share(1.0, mean_tau(outside), cfg_.limits)};
  }

  void try_formation(WorkServer& s) {
    const auto& params = cfg_.params.community;
    std::map<AgentId, double> open;
    for (AgentId id : open_agents(true)) open[id] = tau_of(id);
    auto invites = evaluate_formation(s.owner, open, params);
    if (!invites) return;

    const CommunityId id{next_community_++};
    auto& tc = communities_.emplace(id, TrustCommunity(id, s.owner)).first->second;
    for (AgentId a : *invites) tc.invite(a, tau_of(a), now_);
    tc.admit(s.owner, kNeutralReputation, now_);
    std::size_t joined = 0;
    for (AgentId a : *invites) {
      if (!join_decision(agents_[a.value].profile, offer_for(a, *invites))) continue;
      tc.admit(a, tau_of(a), now_);
      agents_[a.value].community = id;
      ++joined;
    }
    s.community = id;
    if (joined < params.min_size) {
      tc.dissolve(now_);
      release(tc, s);
      s.next_formation_attempt = now_ + params.formation_retry_ticks;
    } else if (!elect_tcm(tc, [this](AgentId a) { return available(a); }, now_)) {
      release(tc, s);
    }
    sync_log(tc);
  }

  void operate(TrustCommunity& tc, WorkServer& s) {
    const auto& params = cfg_.params.community;
    auto is_available = [this](AgentId a) { return available(a); };
    if (!handle_tcm_failure(tc, is_available, now_)) {
      release(tc, s);
      return;
    }

    std::vector<AgentId> computing;
    for (const auto& m : tc.members()) {
      if (!is_work_agent(m.agent)) computing.push_back(m.agent);
    }
    const auto outsiders = open_agents(true);
    const auto actions = operate_tick(tc, reputations(), outsiders, computing, params);
    for (const auto& action : actions) {
      if (const auto* evict = std::get_if<EvictAction>(&action)) {
        tc.remove(evict->agent, MembershipKind::Evicted, tau_of(evict->agent), now_);
        agents_[evict->agent.value].community.reset();
        std::erase(computing, evict->agent);
      } else if (const auto* invite = std::get_if<InviteAction>(&action)) {
        tc.invite(invite->agent, tau_of(invite->agent), now_);
        if (join_decision(agents_[invite->agent.value].profile, offer_for(invite->agent, computing))) {
          tc.admit(invite->agent, tau_of(invite->agent), now_);
          agents_[invite->agent.value].community = tc.id();
          computing.push_back(invite->agent);
        }
      } else if (const auto* duty = std::get_if<AssignMonitorAction>(&action)) {
        monitor_assignments_ += duty->targets.size();
      }
    }
    if (!tc.tcm() && !elect_tcm(tc, is_available, now_)) {
      release(tc, s);
      return;
    }
    if (dissolve_check(tc, params, project_complete(s), now_)) release(tc, s);
  }

  void lifecycle() {
    for (auto& s : topology_.servers) {
      if (s.community) {
        auto& tc = communities_.at(*s.community);
        operate(tc, s);
        sync_log(tc);
      } else if (s.online && now_ >= s.next_formation_attempt && !project_complete(s)) {
        try_formation(s);
      }
    }
  }

  ScenarioConfig cfg_;
  LogHeader header_;
  Rng workload_rng_, churn_rng_, selection_rng_, roulette_rng_, behavior_rng_, accept_rng_;
  std::vector<AgentModel> agents_;
  std::vector<WorkUnit> wus_;
  CentralizedTopology topology_;
  std::map<WorkUnitId, Assignment> assignments_;
  std::deque<WorkUnitId> ready_;  // centralized: collected results awaiting validation, FIFO
  std::map<CommunityId, TrustCommunity> communities_;
  std::map<CommunityId, std::size_t> mirrored_;
  std::uint32_t next_community_ = 0;
  Ledger ledger_;
  std::vector<SimEvent> events_;
  Tick now_ = 0;
  std::size_t dgds_fallbacks_ = 0;
  std::size_t monitor_assignments_ = 0;
};

}  // namespace tdg
