#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tdg/community.hpp"
#include "tdg/distribution.hpp"
#include "tdg/ledger.hpp"
#include "tdg/trust.hpp"
#include "tdg/types.hpp"

namespace tdg {

enum class Mode { Centralized, Trust };

inline std::string_view to_string(Mode m) { return m == Mode::Centralized ? "centralized" : "trust"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "centralized") return Mode::Centralized;
  if (s == "trust") return Mode::Trust;
  return std::nullopt;
}

struct ChurnSchedule {
  Tick up = 0;
  Tick down = 0;
  friend bool operator==(const ChurnSchedule&, const ChurnSchedule&) = default;
};

struct AgentGroup {
  int count = 1;
  Behavior profile = Behavior::Reliable;
  int speed = 1;
  std::optional<ChurnSchedule> churn;
  friend bool operator==(const AgentGroup&, const AgentGroup&) = default;
};

struct WorkSpec {
  std::int64_t wu_count = 1;
  int complexity_lo = 1;
  int complexity_hi = 1;
  std::int64_t base_credit = 100;  // credits per complexity unit
  int servers = 1;
  friend bool operator==(const WorkSpec&, const WorkSpec&) = default;
};

enum class EntityKind { Server, Agent };

struct FaultSpec {
  Tick tick = 0;
  EntityKind entity = EntityKind::Server;
  std::uint32_t index = 0;
  bool up = false;
  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

struct SimParams {
  std::size_t window = kDefaultWindow;
  CommunityParams community;
  bool formation_enabled = true;
  bool allow_short_groups = false;
  DgdsTrustedCount dgds_trusted = DgdsTrustedCount::MatchTotalUntrusted;
  double random_replication = 3.0;  // roulette-rounded per WU
  Tick timeout_ticks = 100;
  double accept_probability = 1.0;
  double slow_progress_probability = 0.5;
  int max_requeues = 0;  // 0 = unlimited
  std::string hash{kHashFunction};
};

inline bool operator==(const CommunityParams& a, const CommunityParams& b) {
  return a.min_size == b.min_size && a.max_size == b.max_size && a.join_threshold == b.join_threshold &&
         a.evict_threshold == b.evict_threshold && a.drop_delta == b.drop_delta &&
         a.dissolve_fraction == b.dissolve_fraction && a.election_delay == b.election_delay &&
         a.formation_retry_ticks == b.formation_retry_ticks;
}
inline bool operator==(const SimParams& a, const SimParams& b) {
  return a.window == b.window && a.community == b.community && a.formation_enabled == b.formation_enabled &&
         a.allow_short_groups == b.allow_short_groups && a.dgds_trusted == b.dgds_trusted &&
         a.random_replication == b.random_replication && a.timeout_ticks == b.timeout_ticks &&
         a.accept_probability == b.accept_probability && a.slow_progress_probability == b.slow_progress_probability &&
         a.max_requeues == b.max_requeues && a.hash == b.hash;
}
inline bool operator==(const ReplicationLimits& a, const ReplicationLimits& b) { return a.lo == b.lo && a.hi == b.hi; }

struct ScenarioConfig {
  std::string name = "scenario";
  Mode mode = Mode::Trust;
  Strategy strategy = Strategy::Dgds;
  std::vector<AgentGroup> agents;
  WorkSpec work;
  std::vector<FaultSpec> faults;
  SimParams params;
  ReplicationLimits limits;
  std::uint64_t seed = 1;
  Tick horizon_ticks = 1000;

  std::size_t agent_count() const {
    std::size_t n = 0;
    for (const auto& g : agents) n += static_cast<std::size_t>(g.count);
    return n;
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  return std::nullopt;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Parses the sectioned key = value scenario format. Every problem found is
// collected and thrown together as a ConfigError.
inline ScenarioConfig parse_scenario_text(std::string_view text, std::string_view source = "<scenario>") {
  using detail::parse_number;
  ScenarioConfig cfg;
  std::vector<std::string> errors;
  std::string section;
  std::size_t lineno = 0;
  bool saw_agents = false;

  auto error = [&](const std::string& msg) {
    errors.push_back(std::string(source) + ":" + std::to_string(lineno) + ": " + msg);
  };

  // Setters per section; each returns false when the value is malformed.
  using Setter = std::function<bool(std::string_view)>;
  auto real_in = [](double& dst, double lo, double hi) -> Setter {
    return [&dst, lo, hi](std::string_view v) {
      auto x = parse_number<double>(v);
      if (!x || *x < lo || *x > hi) return false;
      dst = *x;
      return true;
    };
  };
  auto integer_at_least = [](auto& dst, long long lo) -> Setter {
    return [&dst, lo](std::string_view v) {
      auto x = parse_number<long long>(v);
      if (!x || *x < lo) return false;
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(*x);
      return true;
    };
  };
  auto boolean = [](bool& dst) -> Setter {
    return [&dst](std::string_view v) {
      auto b = detail::parse_bool(v);
      if (!b) return false;
      dst = *b;
      return true;
    };
  };

  auto& p = cfg.params;
  auto& cp = p.community;
  const std::map<std::string, std::map<std::string, Setter>> scalars = {
      {"scenario",
       {{"name",
         [&](std::string_view v) {
           if (v.empty() || v.find_first_of(" \t,") != std::string_view::npos) return false;
           cfg.name = std::string(v);
           return true;
         }},
        {"mode",
         [&](std::string_view v) {
           auto m = parse_mode(v);
           if (m) cfg.mode = *m;
           return m.has_value();
         }},
        {"strategy",
         [&](std::string_view v) {
           auto s = parse_strategy(v);
           if (s) cfg.strategy = *s;
           return s.has_value();
         }},
        {"seed",
         [&](std::string_view v) {
           auto s = parse_number<std::uint64_t>(v);
           if (s) cfg.seed = *s;
           return s.has_value();
         }},
        {"horizon_ticks", integer_at_least(cfg.horizon_ticks, 1)}}},
      {"work",
       {{"wu_count", integer_at_least(cfg.work.wu_count, 0)},
        {"complexity",
         [&](std::string_view v) {
           const auto dots = v.find("..");
           auto lo = parse_number<int>(v.substr(0, dots));
           auto hi = dots == std::string_view::npos ? lo : parse_number<int>(v.substr(dots + 2));
           if (!lo || !hi || *lo < 1 || *hi < *lo) return false;
           cfg.work.complexity_lo = *lo;
           cfg.work.complexity_hi = *hi;
           return true;
         }},
        {"base_credit", integer_at_least(cfg.work.base_credit, 0)},
        {"servers", integer_at_least(cfg.work.servers, 1)}}},
      {"params",
       {{"window", integer_at_least(p.window, 1)},
        {"min_size", integer_at_least(cp.min_size, 1)},
        {"max_size", integer_at_least(cp.max_size, 1)},
        {"join_threshold", real_in(cp.join_threshold, 0.0, 1.0)},
        {"evict_threshold", real_in(cp.evict_threshold, 0.0, 1.0)},
        {"drop_delta", real_in(cp.drop_delta, 0.0, 1.0)},
        {"dissolve_fraction", real_in(cp.dissolve_fraction, 0.0, 1.0)},
        {"election_delay", integer_at_least(cp.election_delay, 0)},
        {"formation_retry_ticks", integer_at_least(cp.formation_retry_ticks, 1)},
        {"formation_enabled", boolean(p.formation_enabled)},
        {"allow_short_groups", boolean(p.allow_short_groups)},
        {"dgds_trusted",
         [&](std::string_view v) {
           if (v == "total") p.dgds_trusted = DgdsTrustedCount::MatchTotalUntrusted;
           else if (v == "additional") p.dgds_trusted = DgdsTrustedCount::MatchAdditionalUntrusted;
           else return false;
           return true;
         }},
        {"random_replication", real_in(p.random_replication, 1.0, 1e6)},
        {"timeout_ticks", integer_at_least(p.timeout_ticks, 1)},
        {"accept_probability", real_in(p.accept_probability, 0.0, 1.0)},
        {"slow_progress_probability", real_in(p.slow_progress_probability, 0.0, 1.0)},
        {"max_requeues", integer_at_least(p.max_requeues, 0)},
        {"hash",
         [&](std::string_view v) {
           if (v != kHashFunction) return false;
           p.hash = std::string(v);
           return true;
         }}}},
      {"limits", {{"lo", real_in(cfg.limits.lo, 1.0, 1e6)}, {"hi", real_in(cfg.limits.hi, 1.0, 1e6)}}},
  };

  auto parse_group = [&](std::string_view v) -> std::optional<AgentGroup> {
    // <count> <profile> [speed=<n>] [churn=<up>/<down>]
    auto parts = detail::split_ws(v);
    if (parts.size() < 2) return std::nullopt;
    AgentGroup g;
    auto count = parse_number<int>(parts[0]);
    auto profile = parse_behavior(parts[1]);
    if (!count || *count < 1 || !profile) return std::nullopt;
    g.count = *count;
    g.profile = *profile;
    for (std::size_t i = 2; i < parts.size(); ++i) {
      auto kv = parts[i];
      if (kv.starts_with("speed=")) {
        auto s = parse_number<int>(kv.substr(6));
        if (!s || *s < 1) return std::nullopt;
        g.speed = *s;
      } else if (kv.starts_with("churn=")) {
        auto body = kv.substr(6);
        auto slash = body.find('/');
        if (slash == std::string_view::npos) return std::nullopt;
        auto up = parse_number<Tick>(body.substr(0, slash));
        auto down = parse_number<Tick>(body.substr(slash + 1));
        if (!up || !down || *up < 1 || *down < 0) return std::nullopt;
        g.churn = ChurnSchedule{*up, *down};
      } else {
        return std::nullopt;
      }
    }
    return g;
  };

  auto parse_fault = [&](std::string_view v) -> std::optional<FaultSpec> {
    // <tick> server:<i>|agent:<i> down|up
    auto parts = detail::split_ws(v);
    if (parts.size() != 3) return std::nullopt;
    FaultSpec f;
    auto tick = parse_number<Tick>(parts[0]);
    if (!tick || *tick < 1) return std::nullopt;
    f.tick = *tick;
    std::string_view entity = parts[1];
    if (entity.starts_with("server:")) {
      f.entity = EntityKind::Server;
      entity.remove_prefix(7);
    } else if (entity.starts_with("agent:")) {
      f.entity = EntityKind::Agent;
      entity.remove_prefix(6);
    } else {
      return std::nullopt;
    }
    auto idx = parse_number<std::uint32_t>(entity);
    if (!idx) return std::nullopt;
    f.index = *idx;
    if (parts[2] == "down") f.up = false;
    else if (parts[2] == "up") f.up = true;
    else return std::nullopt;
    return f;
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        error("malformed section header");
        continue;
      }
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (section != "scenario" && section != "agents" && section != "work" && section != "faults" &&
          section != "params" && section != "limits") {
        error("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      error("expected key = value");
      continue;
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (section.empty()) {
      error("key '" + key + "' outside any section");
      continue;
    }
    if (section == "agents") {
      if (key != "group") {
        error("unknown key '" + key + "' in [agents]");
      } else if (auto g = parse_group(value)) {
        if (!saw_agents) cfg.agents.clear();
        saw_agents = true;
        cfg.agents.push_back(*g);
      } else {
        error("bad agent group '" + std::string(value) + "'");
      }
      continue;
    }
    if (section == "faults") {
      if (key != "fault") {
        error("unknown key '" + key + "' in [faults]");
      } else if (auto f = parse_fault(value)) {
        cfg.faults.push_back(*f);
      } else {
        error("bad fault '" + std::string(value) + "'");
      }
      continue;
    }
    auto sec = scalars.find(section);
    if (sec == scalars.end()) continue;  // unknown section already reported
    auto setter = sec->second.find(key);
    if (setter == sec->second.end()) {
      error("unknown key '" + key + "' in [" + section + "]");
    } else if (!setter->second(value)) {
      error("invalid value '" + std::string(value) + "' for " + section + "." + key);
    }
  }

  lineno = 0;
  auto global = [&](const std::string& msg) { errors.push_back(std::string(source) + ": " + msg); };
  if (cfg.agents.empty()) global("scenario declares no agents");
  if (cfg.limits.lo > cfg.limits.hi) global("limits.lo exceeds limits.hi");
  if (cp.max_size < cp.min_size) global("params.max_size is below params.min_size");
  const auto agents = cfg.agent_count();
  for (const auto& f : cfg.faults) {
    if (f.entity == EntityKind::Server && f.index >= static_cast<std::uint32_t>(cfg.work.servers)) {
      global("fault at tick " + std::to_string(f.tick) + " references unknown entity server:" + std::to_string(f.index));
    }
    if (f.entity == EntityKind::Agent && f.index >= agents) {
      global("fault at tick " + std::to_string(f.tick) + " references unknown entity agent:" + std::to_string(f.index));
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

inline ScenarioConfig parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path + ": cannot open scenario file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path);
}

// Writes every field, defaults included, in the format parse_scenario reads.
inline std::string emit_scenario(const ScenarioConfig& cfg) {
  using detail::format_double;
  std::ostringstream o;
  const auto& p = cfg.params;
  const auto& cp = p.community;
  o << "[scenario]\n"
    << "name = " << cfg.name << '\n'
    << "mode = " << to_string(cfg.mode) << '\n'
    << "strategy = " << to_string(cfg.strategy) << '\n'
    << "seed = " << cfg.seed << '\n'
    << "horizon_ticks = " << cfg.horizon_ticks << "\n\n";
  o << "[agents]\n";
  for (const auto& g : cfg.agents) {
    o << "group = " << g.count << ' ' << to_string(g.profile) << " speed=" << g.speed;
    if (g.churn) o << " churn=" << g.churn->up << '/' << g.churn->down;
    o << '\n';
  }
  o << "\n[work]\n"
    << "wu_count = " << cfg.work.wu_count << '\n'
    << "complexity = " << cfg.work.complexity_lo << ".." << cfg.work.complexity_hi << '\n'
    << "base_credit = " << cfg.work.base_credit << '\n'
    << "servers = " << cfg.work.servers << "\n\n";
  o << "[faults]\n";
  for (const auto& f : cfg.faults) {
    o << "fault = " << f.tick << ' ' << (f.entity == EntityKind::Server ? "server:" : "agent:") << f.index << ' '
      << (f.up ? "up" : "down") << '\n';
  }
  o << "\n[params]\n"
    << "window = " << p.window << '\n'
    << "min_size = " << cp.min_size << '\n'
    << "max_size = " << cp.max_size << '\n'
    << "join_threshold = " << format_double(cp.join_threshold) << '\n'
    << "evict_threshold = " << format_double(cp.evict_threshold) << '\n'
    << "drop_delta = " << format_double(cp.drop_delta) << '\n'
    << "dissolve_fraction = " << format_double(cp.dissolve_fraction) << '\n'
    << "election_delay = " << cp.election_delay << '\n'
    << "formation_retry_ticks = " << cp.formation_retry_ticks << '\n'
    << "formation_enabled = " << (p.formation_enabled ? "true" : "false") << '\n'
    << "allow_short_groups = " << (p.allow_short_groups ? "true" : "false") << '\n'
    << "dgds_trusted = " << (p.dgds_trusted == DgdsTrustedCount::MatchTotalUntrusted ? "total" : "additional") << '\n'
    << "random_replication = " << format_double(p.random_replication) << '\n'
    << "timeout_ticks = " << p.timeout_ticks << '\n'
    << "accept_probability = " << format_double(p.accept_probability) << '\n'
    << "slow_progress_probability = " << format_double(p.slow_progress_probability) << '\n'
    << "max_requeues = " << p.max_requeues << '\n'
    << "hash = " << p.hash << "\n\n";
  o << "[limits]\n"
    << "lo = " << format_double(cfg.limits.lo) << '\n'
    << "hi = " << format_double(cfg.limits.hi) << '\n';
  return o.str();
}

}  // namespace tdg
