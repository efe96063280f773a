#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "homeguard/codec.hpp"

namespace homeguard {

/// One line of events.log. Input events (derived == false) are replayable;
/// derived ones are an audit trail and are skipped on replay.
struct StoredEvent {
  std::uint64_t seq = 0;
  std::string type;
  Instant at = 0;
  bool derived = false;
  json payload = json::object();
  json result = nullptr;  // outcome of an input event, informational

  friend bool operator==(const StoredEvent&, const StoredEvent&) = default;
};

void to_json(json& j, const StoredEvent& e);
void from_json(const json& j, StoredEvent& e);

/// Input event types accepted by apply_event.
const std::vector<std::string>& input_event_types();

/// Parses a whole log. Throws Error("corrupt_log") naming the line and byte
/// offset of the first bad record, or of a gap in sequence numbers.
std::vector<StoredEvent> parse_log(std::string_view text);

std::string snapshot_document(const EngineState& s);
/// Throws Error("corrupt_snapshot") with the byte position; never returns partial state.
EngineState parse_snapshot(std::string_view text);

class EventStore {
 public:
  /// Opens (creating if needed) `dir`/events.log and validates what is already there.
  explicit EventStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path log_path() const { return dir_ / "events.log"; }
  std::filesystem::path snapshot_path() const { return dir_ / "state.snapshot"; }

  /// Appends and flushes one record; returns its sequence number (first is 1).
  std::uint64_t append(StoredEvent e);
  std::uint64_t last_seq() const { return seq_; }

  std::vector<StoredEvent> events() const;

  void save_snapshot(const EngineState& s) const;
  std::optional<EngineState> load_snapshot() const;

 private:
  std::filesystem::path dir_;
  std::uint64_t seq_ = 0;
  std::ofstream out_;
};

std::string read_file(const std::filesystem::path& p);

/// Executes one input event against the engine after moving its clock to `e.at`.
/// Returns the result document; throws Error on rejection.
json apply_event(Engine& engine, const StoredEvent& e);

/// Rebuilds an engine from a log by re-executing its input events in order.
/// Rejected events are re-rejected, with the same side effects as live.
Engine replay(const std::vector<StoredEvent>& log, EngineConfig config = {});

}  // namespace homeguard
