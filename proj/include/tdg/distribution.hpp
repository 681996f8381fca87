#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tdg/random.hpp"
#include "tdg/trust.hpp"
#include "tdg/types.hpp"

namespace tdg {

struct Candidate {
  AgentId agent;
  double tau = kNeutralReputation;
  int f_min = 1;
  TrustClass trust_class = TrustClass::Undecided;
  bool busy = false;
};

inline Candidate make_candidate(AgentId agent, double tau, int f_min, bool busy = false) {
  if (f_min < 1) throw ValidationError("candidate f_min must be >= 1");
  return Candidate{agent, tau, f_min, classify(tau), busy};
}

struct ReplicaGroup {
  WorkUnitId wu{};
  AgentId initiator{};
  std::vector<AgentId> members;  // selection order, initiator first
  int required_size = 0;         // 1 + highest f_min among members
  bool short_group = false;      // pool ran out before required_size was reached

  std::size_t size() const noexcept { return members.size(); }
};

enum class SelectionStatus { Selected, SelectionFailed, FallbackToDrds };

struct Selection {
  SelectionStatus status = SelectionStatus::SelectionFailed;
  ReplicaGroup group;

  explicit operator bool() const noexcept { return status == SelectionStatus::Selected; }

  static Selection failed(SelectionStatus s = SelectionStatus::SelectionFailed) { return Selection{s, {}}; }
};

enum class Strategy { Drds, Dods, Dgds, Random };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Drds: return "drds";
    case Strategy::Dods: return "dods";
    case Strategy::Dgds: return "dgds";
    case Strategy::Random: return "random";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  for (Strategy st : {Strategy::Drds, Strategy::Dods, Strategy::Dgds, Strategy::Random}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

// How many trusted agents DGDS pairs with the untrusted ones.
enum class DgdsTrustedCount {
  MatchTotalUntrusted,       // 1 + k_actual, guarantees no untrusted majority
  MatchAdditionalUntrusted,  // k_actual only
};

namespace detail {

inline std::vector<std::size_t> free_indices(std::span<const Candidate> pool) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].busy) out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> free_indices(std::span<const Candidate> pool, TrustClass cls) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].busy && pool[i].trust_class == cls) out.push_back(i);
  }
  return out;
}

// Removes and returns a uniformly chosen element.
template <typename URBG>
std::size_t take_random(std::vector<std::size_t>& from, URBG& rng) {
  const std::size_t pos = uniform_index(rng, from.size());
  const std::size_t picked = from[pos];
  from.erase(from.begin() + static_cast<std::ptrdiff_t>(pos));
  return picked;
}

inline void check_distinct(std::span<const Candidate> pool) {
  std::vector<AgentId> ids;
  ids.reserve(pool.size());
  for (const auto& c : pool) ids.push_back(c.agent);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("candidate pool lists an agent twice");
  }
}

}  // namespace detail

// Dynamic Random Distribution: random initiator plus f_min random others.
template <typename URBG>
Selection drds_select(std::span<const Candidate> pool, URBG& rng) {
  detail::check_distinct(pool);
  auto free = detail::free_indices(pool);
  if (free.size() < 2) return Selection::failed();

  const Candidate& init = pool[detail::take_random(free, rng)];
  ReplicaGroup g;
  g.initiator = init.agent;
  g.members.push_back(init.agent);
  g.required_size = 1 + init.f_min;

  const auto others = std::min<std::size_t>(static_cast<std::size_t>(init.f_min), free.size());
  for (std::size_t i = 0; i < others; ++i) g.members.push_back(pool[detail::take_random(free, rng)].agent);
  g.short_group = static_cast<int>(g.members.size()) < g.required_size;
  return Selection{SelectionStatus::Selected, std::move(g)};
}

// Dynamic Ordered Distribution over one scheduling round. Returns one
// Selection per WU, in order; WUs that cannot get at least two agents fail.
inline std::vector<Selection> dods_assign(std::span<const Candidate> pool, std::span<const WorkUnitId> wus) {
  detail::check_distinct(pool);
  std::vector<const Candidate*> order;
  for (const auto& c : pool) {
    if (!c.busy) order.push_back(&c);
  }
  std::sort(order.begin(), order.end(), [](const Candidate* a, const Candidate* b) {
    if (a->f_min != b->f_min) return a->f_min < b->f_min;
    return a->agent < b->agent;
  });

  std::vector<Selection> out;
  out.reserve(wus.size());
  std::size_t next = 0;
  for (WorkUnitId wu : wus) {
    if (order.size() - next < 2) {
      out.push_back(Selection::failed());
      continue;
    }
    ReplicaGroup g;
    g.wu = wu;
    g.initiator = order[next]->agent;
    int highest = 0;
    // Appending can raise the highest f_min, so loop to a fixed point.
    while (next < order.size() && static_cast<int>(g.members.size()) < 1 + highest) {
      highest = std::max(highest, order[next]->f_min);
      g.members.push_back(order[next]->agent);
      ++next;
    }
    g.required_size = 1 + highest;
    g.short_group = static_cast<int>(g.members.size()) < g.required_size;
    out.push_back(Selection{SelectionStatus::Selected, std::move(g)});
  }
  return out;
}

// Dynamic Grouping Distribution: untrusted agents are always matched by at
// least as many trusted ones, then undecided agents fill up to 1 + max f_min.
template <typename URBG>
Selection dgds_select(std::span<const Candidate> pool, URBG& rng,
                      DgdsTrustedCount trusted_count = DgdsTrustedCount::MatchTotalUntrusted) {
  detail::check_distinct(pool);
  auto untrusted = detail::free_indices(pool, TrustClass::Untrusted);
  auto trusted = detail::free_indices(pool, TrustClass::Trusted);
  auto undecided = detail::free_indices(pool, TrustClass::Undecided);
  if (untrusted.empty() || trusted.empty()) return Selection::failed(SelectionStatus::FallbackToDrds);

  ReplicaGroup g;
  const Candidate& first = pool[detail::take_random(untrusted, rng)];
  g.initiator = first.agent;
  g.members.push_back(first.agent);
  int highest = first.f_min;

  // Extra untrusted are bounded so the trusted side can always match them.
  const std::size_t trusted_cap =
      trusted_count == DgdsTrustedCount::MatchTotalUntrusted ? trusted.size() - 1 : trusted.size();
  std::size_t extra_untrusted = 0;
  while (!untrusted.empty() && extra_untrusted < trusted_cap &&
         extra_untrusted < static_cast<std::size_t>((highest - 1) / 2)) {
    const Candidate& u = pool[detail::take_random(untrusted, rng)];
    g.members.push_back(u.agent);
    highest = std::max(highest, u.f_min);
    ++extra_untrusted;
  }

  const std::size_t want_trusted =
      trusted_count == DgdsTrustedCount::MatchTotalUntrusted ? 1 + extra_untrusted : extra_untrusted;
  for (std::size_t i = 0; i < want_trusted; ++i) {
    const Candidate& t = pool[detail::take_random(trusted, rng)];
    g.members.push_back(t.agent);
    highest = std::max(highest, t.f_min);
  }

  while (!undecided.empty() && static_cast<int>(g.members.size()) < 1 + highest) {
    const Candidate& n = pool[detail::take_random(undecided, rng)];
    g.members.push_back(n.agent);
    highest = std::max(highest, n.f_min);
  }
  g.required_size = 1 + highest;
  g.short_group = static_cast<int>(g.members.size()) < g.required_size;
  return Selection{SelectionStatus::Selected, std::move(g)};
}

// Control condition: a uniform group of fixed size, reputation ignored.
template <typename URBG>
Selection random_baseline_select(std::span<const Candidate> pool, int replication, URBG& rng) {
  detail::check_distinct(pool);
  if (replication < 1) throw ValidationError("replication must be >= 1");
  auto free = detail::free_indices(pool);
  if (free.size() < static_cast<std::size_t>(replication)) return Selection::failed();
  ReplicaGroup g;
  for (int i = 0; i < replication; ++i) g.members.push_back(pool[detail::take_random(free, rng)].agent);
  g.initiator = g.members.front();
  g.required_size = replication;
  return Selection{SelectionStatus::Selected, std::move(g)};
}

}  // namespace tdg
