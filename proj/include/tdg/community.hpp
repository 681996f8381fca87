#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tdg/trust.hpp"
#include "tdg/types.hpp"

namespace tdg {

enum class Phase { PreOrganisation, Formation, Operation, Dissolved };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::PreOrganisation: return "PreOrganisation";
    case Phase::Formation: return "Formation";
    case Phase::Operation: return "Operation";
    case Phase::Dissolved: return "Dissolved";
  }
  return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
  for (Phase p : {Phase::PreOrganisation, Phase::Formation, Phase::Operation, Phase::Dissolved}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

enum class MembershipKind { Invited, Joined, Left, Evicted, TcmElected, TcmFailed, Dissolved };

inline std::string_view to_string(MembershipKind k) {
  switch (k) {
    case MembershipKind::Invited: return "Invited";
    case MembershipKind::Joined: return "Joined";
    case MembershipKind::Left: return "Left";
    case MembershipKind::Evicted: return "Evicted";
    case MembershipKind::TcmElected: return "TcmElected";
    case MembershipKind::TcmFailed: return "TcmFailed";
    case MembershipKind::Dissolved: return "Dissolved";
  }
  return "?";
}

inline std::optional<MembershipKind> parse_membership_kind(std::string_view s) {
  for (MembershipKind k : {MembershipKind::Invited, MembershipKind::Joined, MembershipKind::Left,
                           MembershipKind::Evicted, MembershipKind::TcmElected, MembershipKind::TcmFailed,
                           MembershipKind::Dissolved}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct MembershipEvent {
  Tick tick = 0;
  std::uint64_t sequence = 0;  // per-community order within the log
  CommunityId community{};
  MembershipKind kind = MembershipKind::Invited;
  AgentId agent{};
  Phase phase_after = Phase::PreOrganisation;
  double tau = kNeutralReputation;  // subject's reputation when the event happened

  friend bool operator==(const MembershipEvent&, const MembershipEvent&) = default;
};

struct CommunityParams {
  std::size_t min_size = 5;
  std::size_t max_size = 40;
  double join_threshold = 0.7;
  double evict_threshold = 0.5;
  double drop_delta = 0.2;
  double dissolve_fraction = 0.5;
  Tick election_delay = 1;
  Tick formation_retry_ticks = 25;

  void validate() const {
    if (min_size < 1) throw ValidationError("min_size must be >= 1");
    if (max_size < min_size) throw ValidationError("max_size must be >= min_size");
    if (!(dissolve_fraction >= 0.0 && dissolve_fraction <= 1.0)) throw ValidationError("dissolve_fraction out of [0, 1]");
    if (election_delay < 0) throw ValidationError("election_delay must be >= 0");
  }
};

struct Member {
  AgentId agent;
  Tick joined_tick = 0;
  double tau_at_join = kNeutralReputation;

  friend bool operator==(const Member&, const Member&) = default;
};

// Explicit trust community with a manager. Single writer; every mutation is
// mirrored into the append-only membership log.
class TrustCommunity {
 public:
  TrustCommunity() = default;
  TrustCommunity(CommunityId id, AgentId founder) : id_(id), founder_(founder) {}

  CommunityId id() const noexcept { return id_; }
  AgentId founder() const noexcept { return founder_; }
  Phase phase() const noexcept { return phase_; }
  std::optional<AgentId> tcm() const noexcept { return tcm_; }
  const std::vector<Member>& members() const noexcept { return members_; }
  std::size_t peak_size() const noexcept { return peak_size_; }
  const std::vector<MembershipEvent>& log() const noexcept { return log_; }

  // Every member stores the WU-construction binary, so any of them can act as TCM.
  std::vector<AgentId> binary_holders() const {
    std::vector<AgentId> out;
    for (const auto& m : members_) out.push_back(m.agent);
    return out;
  }

  bool is_member(AgentId a) const { return find(a) != nullptr; }

  const Member* find(AgentId a) const {
    auto it = std::find_if(members_.begin(), members_.end(), [a](const Member& m) { return m.agent == a; });
    return it == members_.end() ? nullptr : &*it;
  }

  void invite(AgentId agent, double tau, Tick tick) {
    require_not_dissolved();
    if (phase_ == Phase::PreOrganisation) phase_ = Phase::Formation;
    append(tick, MembershipKind::Invited, agent, tau);
  }

  void admit(AgentId agent, double tau, Tick tick) {
    require_not_dissolved();
    if (phase_ == Phase::PreOrganisation) throw StateError("admission before formation");
    if (is_member(agent)) throw StateError("agent already a member");
    auto pos = std::lower_bound(members_.begin(), members_.end(), agent,
                                [](const Member& m, AgentId a) { return m.agent < a; });
    members_.insert(pos, Member{agent, tick, tau});
    peak_size_ = std::max(peak_size_, members_.size());
    append(tick, MembershipKind::Joined, agent, tau);
  }

  // Left or Evicted. A departing TCM leaves the community without a manager
  // until the caller runs a failover election.
  void remove(AgentId agent, MembershipKind why, double tau, Tick tick) {
    if (why != MembershipKind::Left && why != MembershipKind::Evicted) throw StateError("remove needs Left or Evicted");
    require_not_dissolved();
    auto it = std::find_if(members_.begin(), members_.end(), [agent](const Member& m) { return m.agent == agent; });
    if (it == members_.end()) throw StateError("agent is not a member");
    members_.erase(it);
    if (tcm_ == agent) tcm_.reset();
    append(tick, why, agent, tau);
  }

  void set_tcm(AgentId agent, Tick tick) {
    require_not_dissolved();
    if (!is_member(agent)) throw StateError("TCM must be a member");
    tcm_ = agent;
    phase_ = Phase::Operation;
    append(tick, MembershipKind::TcmElected, agent, kNeutralReputation);
  }

  void mark_tcm_failed(Tick tick) {
    if (!tcm_) return;
    const AgentId failed = *tcm_;
    tcm_.reset();
    append(tick, MembershipKind::TcmFailed, failed, kNeutralReputation);
  }

  void dissolve(Tick tick) {
    require_not_dissolved();
    members_.clear();
    tcm_.reset();
    phase_ = Phase::Dissolved;
    append(tick, MembershipKind::Dissolved, founder_, kNeutralReputation);
  }

  // Results validated while the founder was away, handed back when it returns.
  std::vector<WorkUnitId>& pending_handback() noexcept { return pending_handback_; }

 private:
  void require_not_dissolved() const {
    if (phase_ == Phase::Dissolved) throw StateError("community already dissolved");
  }

  void append(Tick tick, MembershipKind kind, AgentId agent, double tau) {
    log_.push_back(MembershipEvent{tick, log_.size(), id_, kind, agent, phase_, tau});
  }

  CommunityId id_{};
  AgentId founder_{};
  Phase phase_ = Phase::PreOrganisation;
  std::vector<Member> members_;  // sorted by agent id
  std::optional<AgentId> tcm_;
  std::size_t peak_size_ = 0;
  std::vector<MembershipEvent> log_;
  std::vector<WorkUnitId> pending_handback_;
};

// Invitation list: agents at or above the join threshold, best first, capped
// at max_size. Absent when fewer than min_size qualify.
inline std::optional<std::vector<AgentId>> evaluate_formation(AgentId founder,
                                                              const std::map<AgentId, double>& reputations,
                                                              const CommunityParams& params) {
  std::vector<std::pair<AgentId, double>> eligible;
  for (const auto& [agent, tau] : reputations) {
    if (agent != founder && tau >= params.join_threshold) eligible.emplace_back(agent, tau);
  }
  if (eligible.size() < params.min_size) return std::nullopt;
  std::stable_sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (eligible.size() > params.max_size) eligible.resize(params.max_size);
  std::vector<AgentId> out;
  out.reserve(eligible.size());
  for (const auto& e : eligible) out.push_back(e.first);
  return out;
}

struct JoinOffer {
  double inside_share = 0.0;   // expected credits per WU inside the community
  double outside_share = 0.0;  // expected credits per WU in the open grid
};

// Expected per-WU share when the whole group has mean reputation `mean_tau`.
inline double expected_share(double wu_credit, double mean_tau, const ReplicationLimits& limits) {
  return wu_credit / (1.0 + raw_replication_factor(mean_tau, limits));
}

inline bool join_decision(Behavior agent, const JoinOffer& offer) {
  if (agent == Behavior::Egoistic) return false;
  return offer.inside_share > offer.outside_share;
}

// First election prefers the founder; failover takes the available member
// with the earliest join tick, ties to the lowest id. With nobody available
// the community dissolves and nullopt is returned.
template <std::predicate<AgentId> Available>
std::optional<AgentId> elect_tcm(TrustCommunity& tc, Available&& available, Tick tick) {
  if (tc.phase() != Phase::Formation && tc.phase() != Phase::Operation) {
    throw StateError("election needs Formation or Operation");
  }
  if (tc.phase() == Phase::Formation && tc.is_member(tc.founder()) && available(tc.founder())) {
    tc.set_tcm(tc.founder(), tick);
    return tc.founder();
  }
  const Member* best = nullptr;
  for (const auto& m : tc.members()) {
    if (!available(m.agent)) continue;
    if (best == nullptr || m.joined_tick < best->joined_tick) best = &m;  // members are id-sorted
  }
  if (best == nullptr) {
    tc.dissolve(tick);
    return std::nullopt;
  }
  const AgentId chosen = best->agent;
  tc.set_tcm(chosen, tick);
  return chosen;
}

template <std::predicate<AgentId> Available>
std::optional<AgentId> handle_tcm_failure(TrustCommunity& tc, Available&& available, Tick tick) {
  if (tc.phase() != Phase::Operation) throw StateError("TCM failover outside Operation");
  if (tc.tcm() && available(*tc.tcm())) return tc.tcm();
  tc.mark_tcm_failed(tick);
  return elect_tcm(tc, std::forward<Available>(available), tick);
}

struct EvictAction {
  AgentId agent;
  friend bool operator==(const EvictAction&, const EvictAction&) = default;
};
struct InviteAction {
  AgentId agent;
  friend bool operator==(const InviteAction&, const InviteAction&) = default;
};
struct AssignMonitorAction {
  AgentId monitor;
  std::vector<AgentId> targets;
  friend bool operator==(const AssignMonitorAction&, const AssignMonitorAction&) = default;
};
using CommunityAction = std::variant<EvictAction, InviteAction, AssignMonitorAction>;

// One round of TCM duties. `reputations` covers members and outsiders alike;
// `outsiders` lists agents free to be invited. Monitoring of `targets` is
// dealt round-robin across members, each member skipping itself when possible.
inline std::vector<CommunityAction> operate_tick(const TrustCommunity& tc, const std::map<AgentId, double>& reputations,
                                                 std::span<const AgentId> outsiders, std::span<const AgentId> targets,
                                                 const CommunityParams& params) {
  if (tc.phase() != Phase::Operation) throw StateError("operate_tick outside Operation");
  auto tau_of = [&](AgentId a) {
    auto it = reputations.find(a);
    return it == reputations.end() ? kNeutralReputation : it->second;
  };

  std::vector<CommunityAction> actions;
  std::size_t remaining = tc.members().size();
  for (const auto& m : tc.members()) {
    if (m.agent == tc.founder()) continue;
    const double tau = tau_of(m.agent);
    if (tau < params.evict_threshold || m.tau_at_join - tau > params.drop_delta) {
      actions.emplace_back(EvictAction{m.agent});
      --remaining;
    }
  }

  std::vector<std::pair<AgentId, double>> invitees;
  for (AgentId a : outsiders) {
    if (!tc.is_member(a) && tau_of(a) >= params.join_threshold) invitees.emplace_back(a, tau_of(a));
  }
  std::stable_sort(invitees.begin(), invitees.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  for (const auto& [a, tau] : invitees) {
    if (remaining >= params.max_size) break;
    actions.emplace_back(InviteAction{a});
    ++remaining;
  }

  const auto& members = tc.members();
  if (!members.empty() && !targets.empty()) {
    std::vector<std::vector<AgentId>> duty(members.size());
    for (std::size_t i = 0; i < targets.size(); ++i) duty[(i + 1) % members.size()].push_back(targets[i]);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (!duty[i].empty()) actions.emplace_back(AssignMonitorAction{members[i].agent, std::move(duty[i])});
    }
  }
  return actions;
}

// Dissolves the community when it has shrunk below quorum, below the fraction
// of its peak, or its project is finished.
inline bool dissolve_check(TrustCommunity& tc, const CommunityParams& params, bool project_complete, Tick tick) {
  if (tc.phase() != Phase::Operation) throw StateError("dissolve_check outside Operation");
  const auto size = tc.members().size();
  const bool dissolve = size < params.min_size ||
                        static_cast<double>(size) < params.dissolve_fraction * static_cast<double>(tc.peak_size()) ||
                        project_complete;
  if (dissolve) tc.dissolve(tick);
  return dissolve;
}

// Legal phase moves: Pre -> Formation -> Operation -> Dissolved, plus
// Formation -> Dissolved on a failed quorum.
inline bool legal_transition(Phase from, Phase to) {
  if (from == to) return from != Phase::Dissolved;
  switch (from) {
    case Phase::PreOrganisation: return to == Phase::Formation;
    case Phase::Formation: return to == Phase::Operation || to == Phase::Dissolved;
    case Phase::Operation: return to == Phase::Dissolved;
    case Phase::Dissolved: return false;
  }
  return false;
}

// Checks one community's log against the lifecycle automaton. Returns a
// description of every violation; empty means sound.
inline std::vector<std::string> check_lifecycle(std::span<const MembershipEvent> log) {
  std::vector<std::string> problems;
  Phase phase = Phase::PreOrganisation;
  std::vector<AgentId> members;
  std::optional<AgentId> tcm;
  Tick last_tick = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    const std::string where = "community " + std::to_string(e.community.value) + " event " + std::to_string(i);
    if (e.sequence != i) problems.push_back(where + ": sequence gap");
    if (i > 0 && e.tick < last_tick) problems.push_back(where + ": tick went backwards");
    last_tick = e.tick;
    if (!legal_transition(phase, e.phase_after)) {
      problems.push_back(where + ": illegal transition " + std::string(to_string(phase)) + " -> " +
                         std::string(to_string(e.phase_after)));
    }
    switch (e.kind) {
      case MembershipKind::Invited:
        if (e.phase_after != Phase::Formation && e.phase_after != Phase::Operation) {
          problems.push_back(where + ": invitation outside Formation/Operation");
        }
        break;
      case MembershipKind::Joined:
        members.push_back(e.agent);
        break;
      case MembershipKind::Left:
      case MembershipKind::Evicted:
        std::erase(members, e.agent);
        if (tcm == e.agent) tcm.reset();
        break;
      case MembershipKind::TcmElected:
        if (std::find(members.begin(), members.end(), e.agent) == members.end()) {
          problems.push_back(where + ": elected TCM is not a member");
        }
        if (e.phase_after != Phase::Operation) problems.push_back(where + ": election did not enter Operation");
        tcm = e.agent;
        break;
      case MembershipKind::TcmFailed:
        tcm.reset();
        break;
      case MembershipKind::Dissolved:
        if (e.phase_after != Phase::Dissolved) problems.push_back(where + ": dissolution without Dissolved phase");
        members.clear();
        tcm.reset();
        break;
    }
    phase = e.phase_after;
  }
  return problems;
}

struct CommunitySnapshot {
  Phase phase = Phase::PreOrganisation;
  std::vector<Member> members;  // sorted by agent id
  std::optional<AgentId> tcm;
  std::size_t peak_size = 0;

  friend bool operator==(const CommunitySnapshot&, const CommunitySnapshot&) = default;
};

inline CommunitySnapshot snapshot(const TrustCommunity& tc) {
  return CommunitySnapshot{tc.phase(), tc.members(), tc.tcm(), tc.peak_size()};
}

// Rebuilds community state purely from its membership log.
inline CommunitySnapshot replay_membership(std::span<const MembershipEvent> log) {
  CommunitySnapshot s;
  for (const auto& e : log) {
    switch (e.kind) {
      case MembershipKind::Joined: {
        auto pos = std::lower_bound(s.members.begin(), s.members.end(), e.agent,
                                    [](const Member& m, AgentId a) { return m.agent < a; });
        s.members.insert(pos, Member{e.agent, e.tick, e.tau});
        s.peak_size = std::max(s.peak_size, s.members.size());
        break;
      }
      case MembershipKind::Left:
      case MembershipKind::Evicted:
        std::erase_if(s.members, [&](const Member& m) { return m.agent == e.agent; });
        if (s.tcm == e.agent) s.tcm.reset();
        break;
      case MembershipKind::TcmElected: s.tcm = e.agent; break;
      case MembershipKind::TcmFailed: s.tcm.reset(); break;
      case MembershipKind::Dissolved:
        s.members.clear();
        s.tcm.reset();
        break;
      case MembershipKind::Invited: break;
    }
    s.phase = e.phase_after;
  }
  return s;
}

}  // namespace tdg
