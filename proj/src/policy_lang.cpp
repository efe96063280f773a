#include "homeguard/policy_lang.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>

namespace homeguard {

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool valid_ident(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_ident_char) && s.front() != '-';
}

[[noreturn]] void fail(const std::string& msg) { throw Error("parse", msg); }

// Piece of the input with its byte offset, so diagnostics can point inside a clause.
struct Slice {
  std::string_view text;
  std::size_t offset = 0;
};

Slice trimmed(Slice s) {
  std::size_t lead = 0;
  while (lead < s.text.size() && is_space(s.text[lead])) ++lead;
  auto t = trim(s.text);
  return {t, s.offset + lead};
}

/// Splits on `sep` outside brackets.
std::vector<Slice> split_top(Slice s, char sep) {
  std::vector<Slice> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t k = 0; k < s.text.size(); ++k) {
    const char c = s.text[k];
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == sep && depth == 0) {
      out.push_back({s.text.substr(start, k - start), s.offset + start});
      start = k + 1;
    }
  }
  out.push_back({s.text.substr(start), s.offset + start});
  return out;
}

std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    fail("unparseable bound '" + std::string(s) + "'");
  return v;
}

Interval parse_numeric_item(std::string_view item) {
  item = trim(item);
  // a leading sign belongs to the lower bound, so search for the separator after it
  auto dash = item.find('-', 1);
  if (dash == std::string_view::npos) {
    auto v = parse_int(item);
    return {v, v};
  }
  auto lo = parse_int(item.substr(0, dash));
  auto hi = parse_int(item.substr(dash + 1));
  if (lo > hi)
    fail("inverted interval [" + std::to_string(lo) + "-" + std::to_string(hi) + "]: lower bound exceeds upper");
  return {lo, hi};
}

ClockSpan parse_clock_item(std::string_view item) {
  item = trim(item);
  auto dash = item.find('-');
  if (dash == std::string_view::npos) fail("time window '" + std::string(item) + "' needs start-end");
  return {parse_clock(item.substr(0, dash)), parse_clock(item.substr(dash + 1))};
}

bool starts_numeric(std::string_view s) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '-' && s.size() > 1) return std::isdigit(static_cast<unsigned char>(s[1])) != 0;
  return std::isdigit(static_cast<unsigned char>(s.front())) != 0;
}

// 1-based line/column lookup for byte offsets.
class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    starts_.push_back(0);
    for (std::size_t k = 0; k < text.size(); ++k)
      if (text[k] == '\n') starts_.push_back(k + 1);
  }
  std::pair<int, int> at(std::size_t offset) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    const auto line = static_cast<int>(it - starts_.begin());
    return {line, static_cast<int>(offset - starts_[line - 1]) + 1};
  }

 private:
  std::vector<std::size_t> starts_;
};

bool action_from_keyword(std::string_view kw, ClauseAction& out) {
  if (kw == "demand") out = ClauseAction::Demand;
  else if (kw == "restrict") out = ClauseAction::Restrict;
  else if (kw == "location") out = ClauseAction::Location;
  else return false;
  return true;
}

/// True when a line beginning at `pos` looks like the start of a new clause.
bool clause_starts_at(std::string_view text, std::size_t pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  auto end = pos;
  while (end < text.size() && is_ident_char(text[end])) ++end;
  ClauseAction a;
  if (!action_from_keyword(text.substr(pos, end - pos), a)) return false;
  while (end < text.size() && (text[end] == ' ' || text[end] == '\t')) ++end;
  return text.substr(end, 2) == "::";
}

struct ClauseError {
  std::size_t offset;
  std::string message;
};

std::vector<std::string> parse_ident_list(Slice s, bool allow_empty, const char* what) {
  auto t = trimmed(s);
  if (t.text == "~") {
    if (!allow_empty) throw ClauseError{t.offset, std::string(what) + " list is empty"};
    return {};
  }
  std::vector<std::string> out;
  for (auto part : split_top(t, ',')) {
    auto p = trimmed(part);
    if (!valid_ident(p.text))
      throw ClauseError{p.offset, "invalid " + std::string(what) + " identifier '" + std::string(p.text) + "'"};
    out.emplace_back(p.text);
  }
  return out;
}

ClauseAst parse_clause_body(Slice body, const UserId& owner) {
  auto sep = body.text.find("::");
  if (sep == std::string_view::npos) throw ClauseError{body.offset, "expected '::' after action"};
  auto kw = trimmed({body.text.substr(0, sep), body.offset});
  ClauseAst ast;
  ast.owner = owner;
  if (!action_from_keyword(kw.text, ast.action))
    throw ClauseError{kw.offset, "unknown action '" + std::string(kw.text) + "' (expected demand, restrict or location)"};

  Slice rest{body.text.substr(sep + 2), body.offset + sep + 2};
  auto slots = split_top(rest, ':');
  if (slots.size() != 3)
    throw ClauseError{rest.offset, "expected 'targets : devices : conditions', found " + std::to_string(slots.size()) +
                                       " slot(s)"};
  ast.targets = parse_ident_list(slots[0], true, "target");
  ast.devices = parse_ident_list(slots[1], false, "device");

  auto conds = trimmed(slots[2]);
  if (conds.text.empty()) throw ClauseError{conds.offset, "conditions slot is empty (use '~' for none)"};
  if (conds.text != "~") {
    for (auto part : split_top(conds, ',')) {
      auto p = trimmed(part);
      try {
        ast.conditions.push_back(parse_condition(p.text));
      } catch (const Error& e) {
        throw ClauseError{p.offset, std::string("malformed condition: ") + e.what()};
      }
    }
  }
  return ast;
}

void append_items(std::ostringstream& os, const ConditionAst& c) {
  std::visit(
      [&](const auto& items) {
        using T = std::decay_t<decltype(items)>;
        for (std::size_t k = 0; k < items.size(); ++k) {
          if (k) os << ", ";
          if constexpr (std::is_same_v<T, NumericItems>) {
            os << items[k].lo << '-' << items[k].hi;
          } else if constexpr (std::is_same_v<T, ClockItems>) {
            os << format_clock(items[k].start_minute) << '-' << format_clock(items[k].end_minute);
          } else {
            os << items[k];
          }
        }
      },
      c.value);
}

}  // namespace

std::string ParseDiagnostic::format(std::string_view origin) const {
  std::ostringstream os;
  os << origin << ':' << line << ':' << column << ": "
     << (severity == Severity::Error ? "error" : "warning") << ": " << message;
  return os.str();
}

int parse_clock(std::string_view text) {
  auto t = trim(text);
  std::string s(t);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s.size() < 6) fail("bad clock '" + std::string(t) + "'");
  const auto suffix = s.substr(s.size() - 2);
  if (suffix != "am" && suffix != "pm") fail("clock '" + std::string(t) + "' needs am or pm");
  const auto body = std::string_view(s).substr(0, s.size() - 2);
  const auto colon = body.find(':');
  if (colon == std::string_view::npos || body.size() - colon != 3) fail("bad clock '" + std::string(t) + "'");
  const auto h = parse_int(body.substr(0, colon));
  const auto m = parse_int(body.substr(colon + 1));
  if (h < 1 || h > 12 || m < 0 || m > 59) fail("clock '" + std::string(t) + "' out of range");
  int minute = static_cast<int>((h % 12) * 60 + m);
  if (suffix == "pm") minute += 720;
  return minute;
}

std::string format_clock(int minute_of_day) {
  const int h = minute_of_day / 60;
  const int m = minute_of_day % 60;
  const int h12 = h % 12 == 0 ? 12 : h % 12;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%d:%02d%s", h12, m, h < 12 ? "am" : "pm");
  return buf;
}

ConditionAst parse_condition(std::string_view text) {
  auto t = trim(text);
  std::size_t k = 0;
  while (k < t.size() && is_ident_char(t[k])) ++k;
  ConditionAst c;
  c.attribute = std::string(t.substr(0, k));
  if (!valid_ident(c.attribute)) fail("expected attribute name in '" + std::string(t) + "'");
  auto rest = trim(t.substr(k));
  if (rest.substr(0, 5) == "notin" && rest.size() > 5 && !is_ident_char(rest[5])) {
    c.op = ConditionOp::NotIn;
    rest = trim(rest.substr(5));
  } else if (rest.substr(0, 2) == "in" && rest.size() > 2 && !is_ident_char(rest[2])) {
    c.op = ConditionOp::In;
    rest = trim(rest.substr(2));
  } else {
    fail("expected 'in' or 'notin' after '" + c.attribute + "'");
  }
  if (rest.empty() || rest.front() != '[') fail("expected '[' after operator");
  auto close = rest.find(']');
  if (close == std::string_view::npos) fail("missing ']'");
  if (!trim(rest.substr(close + 1)).empty()) fail("unexpected text after ']'");
  auto inner = trim(rest.substr(1, close - 1));
  if (inner.empty()) fail("empty value list");

  std::vector<std::string_view> items;
  std::size_t start = 0;
  for (std::size_t p = 0; p <= inner.size(); ++p) {
    if (p == inner.size() || inner[p] == ',') {
      auto item = trim(inner.substr(start, p - start));
      if (item.empty()) fail("empty item in value list");
      items.push_back(item);
      start = p + 1;
    }
  }

  if (items.front().find(':') != std::string_view::npos) {
    ClockItems v;
    for (auto it : items) v.push_back(parse_clock_item(it));
    c.value = std::move(v);
  } else if (starts_numeric(items.front())) {
    NumericItems v;
    for (auto it : items) v.push_back(parse_numeric_item(it));
    c.value = std::move(v);
  } else {
    IdentItems v;
    for (auto it : items) {
      if (!valid_ident(it)) fail("bad value '" + std::string(it) + "'");
      v.emplace_back(it);
    }
    c.value = std::move(v);
  }
  return c;
}

ParseResult parse_policy_set(const PolicySource& source) {
  // blank out comments so offsets stay aligned with the original text
  std::string text = source.text;
  for (std::size_t k = 0; k < text.size(); ++k) {
    if (text[k] != '#') continue;
    while (k < text.size() && text[k] != '\n') text[k++] = ' ';
  }
  const LineIndex lines(text);
  ParseResult out;
  auto diag = [&](std::size_t offset, std::string msg) {
    auto [l, c] = lines.at(std::min(offset, text.empty() ? 0 : text.size() - 1));
    out.diagnostics.push_back({l, c, std::move(msg), ParseDiagnostic::Severity::Error});
  };

  std::optional<UserId> owner;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (is_space(text[pos])) {
      ++pos;
      continue;
    }
    if (text[pos] == '@') {
      auto end = pos + 1;
      while (end < text.size() && is_ident_char(text[end])) ++end;
      auto name = std::string_view(text).substr(pos + 1, end - pos - 1);
      if (!valid_ident(name)) {
        diag(pos, "malformed '@' header");
        while (end < text.size() && text[end] != '\n') ++end;
      } else {
        owner = std::string(name);
      }
      pos = end;
      continue;
    }

    // collect one clause up to ';' at bracket depth zero
    const std::size_t start = pos;
    int depth = 0;
    bool terminated = false;
    std::size_t k = pos;
    for (; k < text.size(); ++k) {
      const char c = text[k];
      if (c == '[') ++depth;
      if (c == ']') depth = std::max(0, depth - 1);
      if (c == ';' && depth == 0) {
        terminated = true;
        break;
      }
      if (c == '@' && depth == 0) break;
      if (c == '\n' && k > start && clause_starts_at(text, k + 1)) break;
    }
    if (!terminated) {
      diag(start, "unterminated clause (missing ';')");
      pos = k;
      continue;
    }
    pos = k + 1;
    if (!owner) {
      diag(start, "clause before any '@user' header");
      continue;
    }
    try {
      out.clauses.push_back(parse_clause_body({std::string_view(text).substr(start, k - start), start}, *owner));
    } catch (const ClauseError& e) {
      diag(e.offset, e.message);
    }
  }
  return out;
}

std::string_view to_string(ClauseAction a) {
  switch (a) {
    case ClauseAction::Demand: return "demand";
    case ClauseAction::Restrict: return "restrict";
    case ClauseAction::Location: return "location";
  }
  return "?";
}

std::string render_condition(const ConditionAst& c) {
  std::ostringstream os;
  os << c.attribute << (c.op == ConditionOp::In ? " in [" : " notin [");
  append_items(os, c);
  os << ']';
  return os.str();
}

std::string render_clause(const ClauseAst& clause) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + v[k];
    return s;
  };
  std::string out(to_string(clause.action));
  out += " :: ";
  out += clause.targets.empty() ? "~" : join(clause.targets);
  out += " : " + join(clause.devices) + " : ";
  if (clause.conditions.empty()) {
    out += "~";
  } else {
    for (std::size_t k = 0; k < clause.conditions.size(); ++k)
      out += (k ? ", " : "") + render_condition(clause.conditions[k]);
  }
  out += " ;";
  return out;
}

std::string render_policy_set(const std::vector<ClauseAst>& clauses) {
  std::string out;
  const std::string* current = nullptr;
  for (const auto& c : clauses) {
    if (!current || *current != c.owner) {
      out += "@" + c.owner + "\n";
      current = &c.owner;
    }
    out += render_clause(c) + "\n";
  }
  return out;
}

}  // namespace homeguard
