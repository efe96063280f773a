#pragma once

// JSON encoding of the domain types. Objects use sorted keys, so `dump()` of
// any encoded value is canonical.

#include "json.hpp"

#include "homeguard/engine.hpp"

namespace homeguard {

using json = nlohmann::json;

void to_json(json& j, const IntervalSet& v);
void from_json(const json& j, IntervalSet& v);
void to_json(json& j, const ClockSpan& v);
void from_json(const json& j, ClockSpan& v);
void to_json(json& j, const Condition& v);
void from_json(const json& j, Condition& v);
void to_json(json& j, const ConditionSet& v);
void from_json(const json& j, ConditionSet& v);
void to_json(json& j, const PolicyClause& v);
void from_json(const json& j, PolicyClause& v);
void to_json(json& j, const UserRecord& v);
void from_json(const json& j, UserRecord& v);
void to_json(json& j, const PendingAssignment& v);
void from_json(const json& j, PendingAssignment& v);
void to_json(json& j, const UserEntry& v);
void from_json(const json& j, UserEntry& v);
void to_json(json& j, const PriorityTable& v);
void from_json(const json& j, PriorityTable& v);
void to_json(json& j, const DeviceDescriptor& v);
void from_json(const json& j, DeviceDescriptor& v);
void to_json(json& j, const DevicePolicyArray& v);
void from_json(const json& j, DevicePolicyArray& v);
void to_json(json& j, const AttributeOverlap& v);
void from_json(const json& j, AttributeOverlap& v);
void to_json(json& j, const ConflictReport& v);
void from_json(const json& j, ConflictReport& v);
void to_json(json& j, const DeferredPlan& v);
void from_json(const json& j, DeferredPlan& v);
void to_json(json& j, const NegotiationSession& v);
void from_json(const json& j, NegotiationSession& v);
void to_json(json& j, const NegotiationOutcome& v);
void to_json(json& j, const Notice& v);
void from_json(const json& j, Notice& v);
void to_json(json& j, const NotificationRecord& v);
void from_json(const json& j, NotificationRecord& v);
void to_json(json& j, const DeviceCommand& v);
void from_json(const json& j, DeviceCommand& v);
void to_json(json& j, const Decision& v);
void from_json(const json& j, Decision& v);
void to_json(json& j, const AbacRule& v);
void to_json(json& j, const RuleTable& v);
void to_json(json& j, const EngineState& v);
void from_json(const json& j, EngineState& v);
void to_json(json& j, const AddUserReport& v);
void to_json(json& j, const InstallStep& v);
void to_json(json& j, const SubmitReport& v);
void to_json(json& j, const ParseDiagnostic& v);

std::string canonical(const json& j);

}  // namespace homeguard
