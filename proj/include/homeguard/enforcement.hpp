#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "homeguard/abac.hpp"
#include "homeguard/model.hpp"
#include "homeguard/priority.hpp"

namespace homeguard {

enum class ThreatTag { T1 = 1, T2, T3, T4, T5 };
std::string_view to_string(ThreatTag t);
ThreatTag threat_tag_from_string(std::string_view s);

enum class Origin { HomeNetwork, Remote };
std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

struct SetValue {
  std::string attribute;
  std::int64_t value = 0;
  friend bool operator==(const SetValue&, const SetValue&) = default;
};
struct Switch {
  bool on = true;
  friend bool operator==(const Switch&, const Switch&) = default;
};
struct InstallApp {
  std::string app_id;
  std::vector<DeviceId> devices;
  friend bool operator==(const InstallApp&, const InstallApp&) = default;
};
struct AddDevice {
  DeviceKind kind = DeviceKind::Sensor;
  friend bool operator==(const AddDevice&, const AddDevice&) = default;
};
struct RemoveDevice {
  friend bool operator==(const RemoveDevice&, const RemoveDevice&) = default;
};
struct SetCode {
  friend bool operator==(const SetCode&, const SetCode&) = default;
};

using Verb = std::variant<SetValue, Switch, InstallApp, AddDevice, RemoveDevice, SetCode>;
std::string_view verb_name(const Verb& v);

/// For add_device, `device` is the id of the device being added; for
/// install_app it may be empty.
struct DeviceCommand {
  UserId actor;
  DeviceId device;
  Verb verb;
  Instant timestamp = 0;
  std::optional<Origin> origin;  // absent: use the presence map

  friend bool operator==(const DeviceCommand&, const DeviceCommand&) = default;
};

using PresenceMap = std::map<UserId, Presence>;

enum class DenialReason {
  None,
  UnknownActor,
  Expired,
  PendingResolution,
  DevicePermission,
  AppInstall,
  Restricted,
  OutsidePermit,
  PriorityEscalation
};
std::string_view to_string(DenialReason r);

struct Decision {
  enum class Verdict { Allow, Deny };
  Verdict verdict = Verdict::Allow;
  std::optional<ClauseId> matched_rule;
  std::optional<ThreatTag> threat;
  DenialReason reason = DenialReason::None;
  std::string detail;
  std::vector<Notice> notifications;

  bool allowed() const { return verdict == Verdict::Allow; }
  friend bool operator==(const Decision&, const Decision&) = default;
};

std::string_view to_string(Decision::Verdict v);

struct EnforcementConfig {
  /// Highest class number still allowed to install apps.
  int app_install_max_class = 1;
};

using DeviceRoster = std::map<DeviceId, DeviceDescriptor>;

struct DenialContext {
  DenialReason reason = DenialReason::None;
  bool actor_temporary = false;
  bool time_bound = false;  // the firing rule is scoped by time of day
};

/// Threat class for a denial; nullopt for allows and untagged denials.
std::optional<ThreatTag> detect_threat_class(const DeviceCommand& cmd, const Decision::Verdict verdict,
                                             const DenialContext& ctx);

/// Throws Error("unknown_device") when the command names a device not in the
/// roster (add_device and install_app excepted).
Decision authorize(const DeviceCommand& cmd, const RuleTable& rules, const PriorityTable& priorities,
                   const PresenceMap& presence, Instant now, const DeviceRoster& devices,
                   const EnforcementConfig& config = {});

/// Values of `attribute` in `domain` that `actor` could set right now.
IntervalSet effective_region(const UserId& actor, const DeviceId& device, const std::string& attribute,
                             const IntervalSet& domain, const RuleTable& rules, const PriorityTable& priorities,
                             const PresenceMap& presence, Instant now, const DeviceRoster& devices,
                             std::optional<Origin> origin = std::nullopt);

}  // namespace homeguard
