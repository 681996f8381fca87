#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tdg/community.hpp"
#include "tdg/ledger.hpp"
#include "tdg/scenario.hpp"
#include "tdg/trust.hpp"
#include "tdg/types.hpp"

namespace tdg {

enum class CollectRoute { Held, Routed, Buffered };

inline std::string_view to_string(CollectRoute r) {
  switch (r) {
    case CollectRoute::Held: return "held";
    case CollectRoute::Routed: return "routed";
    case CollectRoute::Buffered: return "buffered";
  }
  return "?";
}

enum class RequeueReason { Timeout, Failed };

namespace ev {

struct WuIssued {
  WorkUnitId wu;
  AgentId issuer;  // work server index in centralized mode
  std::vector<AgentId> members;
  bool short_group = false;
  std::optional<CommunityId> community;
  friend bool operator==(const WuIssued&, const WuIssued&) = default;
};
struct WuAccepted {
  WorkUnitId wu;
  AgentId agent;
  friend bool operator==(const WuAccepted&, const WuAccepted&) = default;
};
struct WuRejected {
  WorkUnitId wu;
  AgentId agent;
  friend bool operator==(const WuRejected&, const WuRejected&) = default;
};
struct WuCompleted {
  WorkUnitId wu;
  AgentId agent;
  std::int64_t units = 0;
  std::uint64_t token = 0;
  bool late = false;
  CollectRoute route = CollectRoute::Held;
  friend bool operator==(const WuCompleted&, const WuCompleted&) = default;
};
struct WuDropped {
  WorkUnitId wu;
  AgentId agent;
  std::int64_t units = 0;
  friend bool operator==(const WuDropped&, const WuDropped&) = default;
};
struct WuTimedOut {
  WorkUnitId wu;
  AgentId agent;
  std::int64_t units = 0;
  friend bool operator==(const WuTimedOut&, const WuTimedOut&) = default;
};
struct WuValidated {
  WorkUnitId wu;
  AgentId validator;
  std::vector<AgentId> consensus;
  std::int64_t group_size = 0;
  std::int64_t complexity = 0;
  bool correct = true;
  friend bool operator==(const WuValidated&, const WuValidated&) = default;
};
struct WuRedistributed {
  WorkUnitId wu;
  RequeueReason reason = RequeueReason::Timeout;
  friend bool operator==(const WuRedistributed&, const WuRedistributed&) = default;
};
struct ServerDown {
  std::uint32_t server = 0;
  friend bool operator==(const ServerDown&, const ServerDown&) = default;
};
struct ServerUp {
  std::uint32_t server = 0;
  friend bool operator==(const ServerUp&, const ServerUp&) = default;
};
struct AgentDown {
  AgentId agent;
  friend bool operator==(const AgentDown&, const AgentDown&) = default;
};
struct AgentUp {
  AgentId agent;
  friend bool operator==(const AgentUp&, const AgentUp&) = default;
};
struct RatingIssued {
  WorkUnitId wu;
  AgentId rater;
  AgentId subject;
  RatingCause cause = RatingCause::CorrectOnTime;
  double value = 0.0;
  friend bool operator==(const RatingIssued&, const RatingIssued&) = default;
};
struct TcEvent {
  MembershipEvent event;
  friend bool operator==(const TcEvent&, const TcEvent&) = default;
};
struct CreditCommitted {
  WorkUnitId wu;
  std::uint64_t block = 0;
  std::vector<Allocation> allocations;
  friend bool operator==(const CreditCommitted&, const CreditCommitted&) = default;
};

}  // namespace ev

// Variant order matches EventKind.
using EventPayload =
    std::variant<ev::WuIssued, ev::WuAccepted, ev::WuRejected, ev::WuCompleted, ev::WuDropped, ev::WuTimedOut,
                 ev::WuValidated, ev::WuRedistributed, ev::ServerDown, ev::ServerUp, ev::AgentDown, ev::AgentUp,
                 ev::RatingIssued, ev::TcEvent, ev::CreditCommitted>;

enum class EventKind {
  WuIssued,
  WuAccepted,
  WuRejected,
  WuCompleted,
  WuDropped,
  WuTimedOut,
  WuValidated,
  WuRedistributed,
  ServerDown,
  ServerUp,
  AgentDown,
  AgentUp,
  RatingIssued,
  TcEvent,
  CreditCommitted,
};

inline constexpr std::string_view kEventKindNames[] = {
    "WuIssued",   "WuAccepted",  "WuRejected", "WuCompleted",  "WuDropped",
    "WuTimedOut", "WuValidated", "WuRedistributed", "ServerDown", "ServerUp",
    "AgentDown",  "AgentUp",     "RatingIssued", "TcEvent",    "CreditCommitted"};

inline std::string_view to_string(EventKind k) { return kEventKindNames[static_cast<std::size_t>(k)]; }

struct SimEvent {
  Tick tick = 0;
  EventPayload payload;

  EventKind kind() const noexcept { return static_cast<EventKind>(payload.index()); }

  template <typename T>
  const T* as() const noexcept {
    return std::get_if<T>(&payload);
  }

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

// Static facts about a run that metrics need beyond the events themselves.
struct LogHeader {
  std::string scenario;
  Mode mode = Mode::Trust;
  Strategy strategy = Strategy::Dgds;
  std::uint64_t seed = 0;
  Tick horizon = 0;
  std::size_t window = kDefaultWindow;
  std::int64_t wu_total = 0;
  std::map<AgentId, Behavior> agents;  // computing agents
  std::vector<AgentId> work_agents;    // trust mode: one per work server

  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

struct EventLog {
  LogHeader header;
  std::vector<SimEvent> events;
};

namespace detail {

inline std::string join_ids(const std::vector<AgentId>& ids) {
  if (ids.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(ids[i].value);
  }
  return s;
}

inline std::optional<std::vector<AgentId>> split_ids(std::string_view s) {
  std::vector<AgentId> out;
  if (s == "-") return out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto part = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    auto v = parse_number<std::uint32_t>(part);
    if (!v) return std::nullopt;
    out.emplace_back(*v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string join_allocations(const std::vector<Allocation>& allocs) {
  if (allocs.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < allocs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(allocs[i].agent.value) + ':' + std::to_string(allocs[i].amount);
  }
  return s;
}

inline std::optional<std::vector<Allocation>> split_allocations(std::string_view s) {
  std::vector<Allocation> out;
  if (s == "-") return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const auto part = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto a = parse_number<std::uint32_t>(part.substr(0, colon));
    auto m = parse_number<Millicredits>(part.substr(colon + 1));
    if (!a || !m) return std::nullopt;
    out.push_back(Allocation{AgentId{*a}, *m});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct FieldWriter {
  std::ostream& out;
  template <typename T>
  FieldWriter& operator()(std::string_view key, const T& value) {
    out << ' ' << key << '=' << value;
    return *this;
  }
};

}  // namespace detail

// One event per line: "<tick> <Kind> key=value ...", keys fixed per kind.
inline void write_event(std::ostream& out, const SimEvent& e) {
  using detail::join_ids;
  out << e.tick << ' ' << to_string(e.kind());
  detail::FieldWriter w{out};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ev::WuIssued>) {
          w("wu", p.wu.value)("issuer", p.issuer.value)("members", join_ids(p.members))("short", p.short_group ? 1 : 0)(
              "community", p.community ? std::to_string(p.community->value) : std::string("-"));
        } else if constexpr (std::is_same_v<T, ev::WuAccepted> || std::is_same_v<T, ev::WuRejected>) {
          w("wu", p.wu.value)("agent", p.agent.value);
        } else if constexpr (std::is_same_v<T, ev::WuCompleted>) {
          w("wu", p.wu.value)("agent", p.agent.value)("units", p.units)("token", p.token)("late", p.late ? 1 : 0)(
              "route", to_string(p.route));
        } else if constexpr (std::is_same_v<T, ev::WuDropped> || std::is_same_v<T, ev::WuTimedOut>) {
          w("wu", p.wu.value)("agent", p.agent.value)("units", p.units);
        } else if constexpr (std::is_same_v<T, ev::WuValidated>) {
          w("wu", p.wu.value)("validator", p.validator.value)("consensus", join_ids(p.consensus))(
              "group", p.group_size)("complexity", p.complexity)("correct", p.correct ? 1 : 0);
        } else if constexpr (std::is_same_v<T, ev::WuRedistributed>) {
          w("wu", p.wu.value)("reason", p.reason == RequeueReason::Timeout ? "timeout" : "failed");
        } else if constexpr (std::is_same_v<T, ev::ServerDown> || std::is_same_v<T, ev::ServerUp>) {
          w("server", p.server);
        } else if constexpr (std::is_same_v<T, ev::AgentDown> || std::is_same_v<T, ev::AgentUp>) {
          w("agent", p.agent.value);
        } else if constexpr (std::is_same_v<T, ev::RatingIssued>) {
          w("wu", p.wu.value)("rater", p.rater.value)("subject", p.subject.value)("cause", to_string(p.cause))(
              "value", detail::format_double(p.value));
        } else if constexpr (std::is_same_v<T, ev::TcEvent>) {
          const auto& m = p.event;
          w("community", m.community.value)("seq", m.sequence)("kind", to_string(m.kind))("agent", m.agent.value)(
              "phase", to_string(m.phase_after))("tau", detail::format_double(m.tau));
        } else if constexpr (std::is_same_v<T, ev::CreditCommitted>) {
          w("wu", p.wu.value)("block", p.block)("allocations", detail::join_allocations(p.allocations));
        }
      },
      e.payload);
  out << '\n';
}

inline void write_log(std::ostream& out, const EventLog& log) {
  const auto& h = log.header;
  out << "# tdg-event-log 1\n"
      << "# scenario " << h.scenario << '\n'
      << "# mode " << to_string(h.mode) << '\n'
      << "# strategy " << to_string(h.strategy) << '\n'
      << "# seed " << h.seed << '\n'
      << "# horizon " << h.horizon << '\n'
      << "# window " << h.window << '\n'
      << "# wu_total " << h.wu_total << '\n';
  for (const auto& [id, b] : h.agents) out << "# agent " << id.value << ' ' << to_string(b) << '\n';
  for (auto id : h.work_agents) out << "# work_agent " << id.value << '\n';
  for (const auto& e : log.events) write_event(out, e);
}

inline std::string to_text(const EventLog& log) {
  std::ostringstream o;
  write_log(o, log);
  return o.str();
}

class LogParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline EventLog read_log(std::istream& in) {
  using detail::parse_number;
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> void {
    throw LogParseError("event log line " + std::to_string(lineno) + ": " + what);
  };
  bool saw_magic = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto parts = detail::split_ws(line);
    if (parts.front() == "#") {
      if (parts.size() < 2) continue;
      const auto key = parts[1];
      auto arg = [&](std::size_t i) -> std::string_view {
        if (parts.size() <= i) fail("header '" + std::string(key) + "' is missing a value");
        return parts[i];
      };
      auto num = [&](std::size_t i) {
        auto v = parse_number<std::int64_t>(arg(i));
        if (!v) fail("bad number in header");
        return *v;
      };
      if (key == "tdg-event-log") saw_magic = true;
      else if (key == "scenario") log.header.scenario = std::string(arg(2));
      else if (key == "mode") {
        auto m = parse_mode(arg(2));
        if (!m) fail("bad mode");
        log.header.mode = *m;
      } else if (key == "strategy") {
        auto s = parse_strategy(arg(2));
        if (!s) fail("bad strategy");
        log.header.strategy = *s;
      } else if (key == "seed") {
        auto s = parse_number<std::uint64_t>(arg(2));
        if (!s) fail("bad seed");
        log.header.seed = *s;
      } else if (key == "horizon") log.header.horizon = num(2);
      else if (key == "window") log.header.window = static_cast<std::size_t>(num(2));
      else if (key == "wu_total") log.header.wu_total = num(2);
      else if (key == "agent") {
        auto b = parse_behavior(arg(3));
        if (!b) fail("bad profile");
        log.header.agents[AgentId{static_cast<std::uint32_t>(num(2))}] = *b;
      } else if (key == "work_agent") log.header.work_agents.emplace_back(static_cast<std::uint32_t>(num(2)));
      continue;
    }
    if (!saw_magic) fail("missing '# tdg-event-log' header");
    if (parts.size() < 2) fail("truncated event");
    SimEvent e;
    auto tick = parse_number<Tick>(parts[0]);
    if (!tick) fail("bad tick");
    e.tick = *tick;
    std::map<std::string_view, std::string_view> f;
    for (std::size_t i = 2; i < parts.size(); ++i) {
      auto eq = parts[i].find('=');
      if (eq == std::string_view::npos) fail("field without '='");
      f[parts[i].substr(0, eq)] = parts[i].substr(eq + 1);
    }
    auto field = [&](std::string_view k) -> std::string_view {
      auto it = f.find(k);
      if (it == f.end()) fail("missing field '" + std::string(k) + "'");
      return it->second;
    };
    auto u64 = [&](std::string_view k) {
      auto v = parse_number<std::uint64_t>(field(k));
      if (!v) fail("bad field '" + std::string(k) + "'");
      return *v;
    };
    auto i64 = [&](std::string_view k) {
      auto v = parse_number<std::int64_t>(field(k));
      if (!v) fail("bad field '" + std::string(k) + "'");
      return *v;
    };
    auto agent = [&](std::string_view k) { return AgentId{static_cast<std::uint32_t>(u64(k))}; };
    auto wu = [&] { return WorkUnitId{u64("wu")}; };
    auto ids = [&](std::string_view k) {
      auto v = detail::split_ids(field(k));
      if (!v) fail("bad id list '" + std::string(k) + "'");
      return *v;
    };
    auto real = [&](std::string_view k) {
      auto v = parse_number<double>(field(k));
      if (!v) fail("bad field '" + std::string(k) + "'");
      return *v;
    };

    const auto kind = parts[1];
    if (kind == "WuIssued") {
      ev::WuIssued p{wu(), agent("issuer"), ids("members"), u64("short") != 0, std::nullopt};
      if (field("community") != "-") p.community = CommunityId{static_cast<std::uint32_t>(u64("community"))};
      e.payload = std::move(p);
    } else if (kind == "WuAccepted") {
      e.payload = ev::WuAccepted{wu(), agent("agent")};
    } else if (kind == "WuRejected") {
      e.payload = ev::WuRejected{wu(), agent("agent")};
    } else if (kind == "WuCompleted") {
      const auto r = field("route");
      CollectRoute route = r == "held" ? CollectRoute::Held : r == "routed" ? CollectRoute::Routed : CollectRoute::Buffered;
      if (r != "held" && r != "routed" && r != "buffered") fail("bad route");
      e.payload = ev::WuCompleted{wu(), agent("agent"), i64("units"), u64("token"), u64("late") != 0, route};
    } else if (kind == "WuDropped") {
      e.payload = ev::WuDropped{wu(), agent("agent"), i64("units")};
    } else if (kind == "WuTimedOut") {
      e.payload = ev::WuTimedOut{wu(), agent("agent"), i64("units")};
    } else if (kind == "WuValidated") {
      e.payload = ev::WuValidated{wu(), agent("validator"), ids("consensus"), i64("group"), i64("complexity"),
                                  u64("correct") != 0};
    } else if (kind == "WuRedistributed") {
      const auto r = field("reason");
      if (r != "timeout" && r != "failed") fail("bad reason");
      e.payload = ev::WuRedistributed{wu(), r == "timeout" ? RequeueReason::Timeout : RequeueReason::Failed};
    } else if (kind == "ServerDown") {
      e.payload = ev::ServerDown{static_cast<std::uint32_t>(u64("server"))};
    } else if (kind == "ServerUp") {
      e.payload = ev::ServerUp{static_cast<std::uint32_t>(u64("server"))};
    } else if (kind == "AgentDown") {
      e.payload = ev::AgentDown{agent("agent")};
    } else if (kind == "AgentUp") {
      e.payload = ev::AgentUp{agent("agent")};
    } else if (kind == "RatingIssued") {
      auto cause = parse_rating_cause(field("cause"));
      if (!cause) fail("bad cause");
      e.payload = ev::RatingIssued{wu(), agent("rater"), agent("subject"), *cause, real("value")};
    } else if (kind == "TcEvent") {
      auto k = parse_membership_kind(field("kind"));
      auto ph = parse_phase(field("phase"));
      if (!k || !ph) fail("bad community event");
      e.payload = ev::TcEvent{MembershipEvent{e.tick, u64("seq"), CommunityId{static_cast<std::uint32_t>(u64("community"))},
                                              *k, agent("agent"), *ph, real("tau")}};
    } else if (kind == "CreditCommitted") {
      auto allocs = detail::split_allocations(field("allocations"));
      if (!allocs) fail("bad allocations");
      e.payload = ev::CreditCommitted{wu(), u64("block"), *allocs};
    } else {
      fail("unknown event kind '" + std::string(kind) + "'");
    }
    log.events.push_back(std::move(e));
  }
  if (!saw_magic) throw LogParseError("not an event log (missing '# tdg-event-log' header)");
  return log;
}

}  // namespace tdg
