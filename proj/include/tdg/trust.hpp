#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "tdg/random.hpp"
#include "tdg/types.hpp"

namespace tdg {

enum class RatingCause { CorrectOnTime, CorrectLate, WrongResult, RejectedWU, DroppedWU, TimedOut };

inline constexpr RatingCause kAllRatingCauses[] = {RatingCause::CorrectOnTime, RatingCause::CorrectLate,
                                                   RatingCause::WrongResult,   RatingCause::RejectedWU,
                                                   RatingCause::DroppedWU,     RatingCause::TimedOut};

// Fixed cause table; ordered by harm, wrong results worst.
inline constexpr double rating_value(RatingCause cause) noexcept {
  switch (cause) {
    case RatingCause::CorrectOnTime: return 1.0;
    case RatingCause::CorrectLate: return 0.5;
    case RatingCause::RejectedWU: return -0.25;
    case RatingCause::DroppedWU: return -0.75;
    case RatingCause::TimedOut: return -0.75;
    case RatingCause::WrongResult: return -1.0;
  }
  return 0.0;
}

inline std::string_view to_string(RatingCause cause) {
  switch (cause) {
    case RatingCause::CorrectOnTime: return "CorrectOnTime";
    case RatingCause::CorrectLate: return "CorrectLate";
    case RatingCause::WrongResult: return "WrongResult";
    case RatingCause::RejectedWU: return "RejectedWU";
    case RatingCause::DroppedWU: return "DroppedWU";
    case RatingCause::TimedOut: return "TimedOut";
  }
  return "?";
}

inline std::optional<RatingCause> parse_rating_cause(std::string_view s) {
  for (RatingCause c : kAllRatingCauses) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

struct Rating {
  AgentId rater;
  AgentId subject;
  double value = 0.0;
  Tick tick = 0;
  RatingCause cause = RatingCause::CorrectOnTime;
};

inline Rating make_rating(AgentId rater, AgentId subject, RatingCause cause, Tick tick) {
  return Rating{rater, subject, rating_value(cause), tick, cause};
}

inline constexpr double kNeutralReputation = 0.5;
inline constexpr double kTrustedAbove = 0.7;
inline constexpr double kUntrustedAtOrBelow = 0.4;
inline constexpr std::size_t kDefaultWindow = 50;

// Affine-scaled mean of rating values: (1 + mean) / 2, neutral when empty.
template <typename Range>
double aggregate_reputation(const Range& window) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Rating& r : window) {
    sum += r.value;
    ++n;
  }
  if (n == 0) return kNeutralReputation;
  return (1.0 + sum / static_cast<double>(n)) / 2.0;
}

inline double aggregate_reputation(std::span<const Rating> window) {
  return aggregate_reputation<std::span<const Rating>>(window);
}

// Sliding window of the most recent ratings about one agent.
class ReputationProfile {
 public:
  ReputationProfile() = default;
  explicit ReputationProfile(AgentId subject, std::size_t window_capacity = kDefaultWindow)
      : subject_(subject), capacity_(window_capacity) {
    if (capacity_ == 0) throw ValidationError("reputation window must hold at least one rating");
  }

  AgentId subject() const noexcept { return subject_; }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<Rating>& window() const noexcept { return window_; }
  double tau() const noexcept { return tau_; }

  void record(const Rating& rating) {
    if (rating.subject != subject_) {
      throw ValidationError("rating subject " + std::to_string(rating.subject.value) + " does not match profile " +
                            std::to_string(subject_.value));
    }
    if (!(rating.value >= -1.0 && rating.value <= 1.0)) {
      throw ValidationError("rating value out of [-1, 1]");
    }
    window_.push_back(rating);
    if (window_.size() > capacity_) window_.pop_front();
    tau_ = aggregate_reputation(window_);
  }

 private:
  AgentId subject_{};
  std::size_t capacity_ = kDefaultWindow;
  std::deque<Rating> window_;
  double tau_ = kNeutralReputation;
};

inline ReputationProfile record_rating(ReputationProfile profile, const Rating& rating) {
  profile.record(rating);
  return profile;
}

enum class TrustClass { Trusted, Undecided, Untrusted };

inline std::string_view to_string(TrustClass c) {
  switch (c) {
    case TrustClass::Trusted: return "trusted";
    case TrustClass::Undecided: return "undecided";
    case TrustClass::Untrusted: return "untrusted";
  }
  return "?";
}

inline TrustClass classify(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau out of [0, 1]");
  if (tau > kTrustedAbove) return TrustClass::Trusted;
  if (tau <= kUntrustedAtOrBelow) return TrustClass::Untrusted;
  return TrustClass::Undecided;
}

struct ReplicationLimits {
  double lo = 1.5;
  double hi = 5.0;

  void validate() const {
    if (!(lo >= 1.0 && lo <= hi)) throw ValidationError("replication limits need 1 <= lo <= hi");
  }
};

// Linear interpolation: tau 1 maps to lo, tau 0 maps to hi.
inline double raw_replication_factor(double tau, const ReplicationLimits& limits) {
  limits.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau out of [0, 1]");
  return limits.hi - tau * (limits.hi - limits.lo);
}

// Roulette-wheel rounding: ceil(x) with probability frac(x), floor(x) otherwise.
template <typename URBG>
int roulette_round(double x, URBG& rng) {
  if (!(x >= 0.0)) throw ValidationError("roulette_round needs x >= 0");
  const double floor_x = std::floor(x);
  const double frac = x - floor_x;
  const double u = uniform01(rng);
  return static_cast<int>(floor_x) + (u < frac ? 1 : 0);
}

// Number of OTHER agents that must co-compute a WU handed to this agent.
template <typename URBG>
int effective_f_min(const ReputationProfile& profile, const ReplicationLimits& limits, URBG& rng) {
  return roulette_round(raw_replication_factor(profile.tau(), limits), rng);
}

}  // namespace tdg
