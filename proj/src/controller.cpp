#include "homeguard/controller.hpp"

namespace homeguard {

Controller::Controller(EngineConfig config, std::unique_ptr<EventStore> store)
    : engine_(config), store_(std::move(store)) {}

Controller Controller::open(EngineConfig config, std::unique_ptr<EventStore> store) {
  Controller c(config, std::move(store));
  if (c.store_) c.engine_ = replay(c.store_->events(), config);
  return c;
}

json Controller::execute(const std::string& type, json payload) {
  StoredEvent e;
  e.type = type;
  e.at = engine_.now();
  e.payload = std::move(payload);
  std::exception_ptr failure;
  try {
    e.result = apply_event(engine_, e);
  } catch (const SubmitError& err) {
    failure = std::current_exception();
    e.result = json{{"error", err.code()}, {"message", err.what()}, {"diagnostics", err.diagnostics}};
  } catch (const Error& err) {
    failure = std::current_exception();
    e.result = json{{"error", err.code()}, {"message", err.what()}};
  }
  auto derived = engine_.drain_derived();
  if (store_) {
    store_->append(e);
    for (const auto& d : derived) {
      StoredEvent r;
      r.type = d.type;
      r.at = engine_.now();
      r.derived = true;
      r.payload = json{{"summary", d.summary}, {"ids", d.ids}};
      store_->append(std::move(r));
    }
  }
  if (failure) std::rethrow_exception(failure);
  return e.result;
}

void Controller::advance_to(Instant t) {
  if (t > engine_.now()) execute("ClockAdvanced", json{{"to", t}});
}

void Controller::save_snapshot() const {
  if (store_) store_->save_snapshot(engine_.state());
}

}  // namespace homeguard
