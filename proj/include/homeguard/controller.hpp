#pragma once

#include <memory>

#include "homeguard/store.hpp"

namespace homeguard {

/// The engine plus its log. Every mutation goes through execute(), which runs
/// the input event, then appends it and the derived audit records to the store.
class Controller {
 public:
  explicit Controller(EngineConfig config = {}, std::unique_ptr<EventStore> store = nullptr);

  /// Rebuilds from the store's log, if there is one.
  static Controller open(EngineConfig config, std::unique_ptr<EventStore> store);

  const Engine& engine() const { return engine_; }
  EventStore* store() const { return store_.get(); }

  /// Runs one input event at the current logical time. Rethrows rejections
  /// after logging them, since a rejected request may still notify people.
  json execute(const std::string& type, json payload);

  /// Logs a ClockAdvanced event when `t` is ahead of the engine clock.
  void advance_to(Instant t);

  void save_snapshot() const;

 private:
  Engine engine_;
  std::unique_ptr<EventStore> store_;
};

}  // namespace homeguard
