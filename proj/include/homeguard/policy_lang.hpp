#pragma once

// Textual policy language.
//
//   # comment
//   @alice
//   restrict :: ~ : thermostat_1 : temperature notin [60-70] ;
//   demand :: kyle : bulb_3 : time in [7:00pm-7:00am] ;
//
// clause     := action "::" targets ":" devices ":" conditions ";"
// targets    := "~" | ident {"," ident}
// devices    := ident {"," ident}
// conditions := "~" | cond {"," cond}
// cond       := ident ("in" | "notin") "[" item {"," item} "]"
// item       := int "-" int | clock "-" clock | ident
// clock      := H ":" MM ("am" | "pm")

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "homeguard/region.hpp"
#include "homeguard/types.hpp"

namespace homeguard {

struct PolicySource {
  std::string text;
  std::string origin = "<input>";
};

struct ParseDiagnostic {
  enum class Severity { Error, Warning };
  int line = 1;
  int column = 1;
  std::string message;
  Severity severity = Severity::Error;

  std::string format(std::string_view origin) const;
};

/// Time-of-day window [start, end) in minutes; wraps midnight when start > end,
/// covers the whole day when start == end.
struct ClockSpan {
  int start_minute = 0;
  int end_minute = 0;

  friend bool operator==(const ClockSpan&, const ClockSpan&) = default;
};

enum class ConditionOp { In, NotIn };

using NumericItems = std::vector<Interval>;
using ClockItems = std::vector<ClockSpan>;
using IdentItems = std::vector<std::string>;

struct ConditionAst {
  std::string attribute;
  ConditionOp op = ConditionOp::In;
  std::variant<NumericItems, ClockItems, IdentItems> value;

  friend bool operator==(const ConditionAst&, const ConditionAst&) = default;
};

enum class ClauseAction { Demand, Restrict, Location };

struct ClauseAst {
  UserId owner;
  ClauseAction action = ClauseAction::Demand;
  std::vector<UserId> targets;  // empty: all users
  std::vector<DeviceId> devices;
  std::vector<ConditionAst> conditions;

  friend bool operator==(const ClauseAst&, const ClauseAst&) = default;
};

struct ParseResult {
  std::vector<ClauseAst> clauses;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

ParseResult parse_policy_set(const PolicySource& source);

/// Throws homeguard::Error("parse", ...) on malformed input.
ConditionAst parse_condition(std::string_view text);

std::string render_condition(const ConditionAst& c);
std::string render_clause(const ClauseAst& clause);
/// Renders a whole document: clauses grouped under `@owner` headers in order.
std::string render_policy_set(const std::vector<ClauseAst>& clauses);

std::string format_clock(int minute_of_day);
/// Parses "7:00pm" style clock text into a minute of day.
int parse_clock(std::string_view text);

std::string_view to_string(ClauseAction a);

}  // namespace homeguard
