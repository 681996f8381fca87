#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tdg {

// Tagged integer so agent, work-unit and community ids cannot be mixed up.
template <typename Tag, typename Rep = std::uint32_t>
struct StrongId {
  using rep_type = Rep;
  Rep value{};

  constexpr StrongId() = default;
  constexpr explicit StrongId(Rep v) : value(v) {}

  friend constexpr auto operator<=>(StrongId, StrongId) = default;
};

using AgentId = StrongId<struct AgentTag>;
using WorkUnitId = StrongId<struct WorkUnitTag, std::uint64_t>;
using CommunityId = StrongId<struct CommunityTag>;

using Tick = std::int64_t;
using Millicredits = std::int64_t;

enum class Behavior { Reliable, Churner, Slow, Malicious, FreeRider, Egoistic };

inline constexpr Behavior kAllBehaviors[] = {Behavior::Reliable,  Behavior::Churner,   Behavior::Slow,
                                             Behavior::Malicious, Behavior::FreeRider, Behavior::Egoistic};

inline std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Reliable: return "reliable";
    case Behavior::Churner: return "churner";
    case Behavior::Slow: return "slow";
    case Behavior::Malicious: return "malicious";
    case Behavior::FreeRider: return "freerider";
    case Behavior::Egoistic: return "egoistic";
  }
  return "?";
}

inline std::optional<Behavior> parse_behavior(std::string_view s) {
  for (Behavior b : kAllBehaviors) {
    if (to_string(b) == s) return b;
  }
  return std::nullopt;
}

// Precondition or range violation on an input value.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation invoked in a state that does not allow it.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Ledger integrity failure.
class AuditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario file problems; carries every error found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += '\n';
      out += e;
    }
    return out;
  }

  std::vector<std::string> errors_;
};

}  // namespace tdg

template <typename Tag, typename Rep>
struct std::hash<tdg::StrongId<Tag, Rep>> {
  std::size_t operator()(tdg::StrongId<Tag, Rep> id) const noexcept { return std::hash<Rep>{}(id.value); }
};
