#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace homeguard {

using UserId = std::string;
using DeviceId = std::string;

/// Seconds on the engine's logical clock. Time of day is derived modulo 86400.
using Instant = std::int64_t;

inline constexpr Instant kSecondsPerDay = 86400;
inline constexpr std::int64_t kMinutesPerDay = 1440;

inline std::int64_t minute_of_day(Instant t) {
  auto s = t % kSecondsPerDay;
  if (s < 0) s += kSecondsPerDay;
  return s / 60;
}

enum class ClauseId : std::uint64_t {};
enum class SessionId : std::uint64_t {};

inline std::uint64_t to_underlying(ClauseId id) { return static_cast<std::uint64_t>(id); }
inline std::uint64_t to_underlying(SessionId id) { return static_cast<std::uint64_t>(id); }

enum class Action { Demand, Restrict };

enum class Presence { Away = 0, Home = 1 };

std::string_view to_string(Action a);
std::string_view to_string(Presence p);
Action action_from_string(std::string_view s);
Presence presence_from_string(std::string_view s);

/// A message queued for a user. Delivery is pull-based.
struct Notice {
  UserId recipient;
  std::string message;

  friend bool operator==(const Notice&, const Notice&) = default;
};

/// Base for all recoverable engine errors. `code` is a stable machine-readable tag.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace homeguard
