// Session-oriented tutoring service: a human (or scripted client) plays the
// tutor, the learner agent replies and learns exactly as in the simulator.
//
// JSON shapes (all responses are objects):
//
//   POST /sessions            body {"condition":"L+UC+CD", "positive_threshold":0.9,
//                                   "base_threshold":0.5, "shared_registry":false,
//                                   "load_model":false, "objects":[3,17,...], "seed":1}
//                             -> state
//   GET  /sessions/{id}/state -> state
//   POST /sessions/{id}/utterance  body {"text":"it is red"}
//                             -> {"tutor":turn, "learner":[turn...], "cost_delta":x, "state":state}
//   POST /sessions/{id}/advance    -> state
//   POST /sessions/{id}/save  body {"path":"..."} (optional) -> {"path":"..."}
//   GET  /sessions/{id}/events     text/event-stream of {"seq","type","session",...}
//
//   state = {"id","condition","bands":{"base","positive"},"shared_registry",
//            "object":{"position","index","id","image"},"objects_completed",
//            "turn":"tutor"|"learner"|null,"ended","agreed","settled":{"colour","shape"},
//            "transcript":[turn...],"confidences":[{"attribute","category","prob","band","known"}],
//            "cumulative_cost","accepted_patterns":[...]}
//   turn  = {"speaker","move","text","words","cost"}
//   error = {"error":message, "kind":"not_found"|"bad_request"|"conflict"|"protocol"|"parse",
//            "accepted_patterns":[...]}
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwl/dataset.hpp"
#include "gwl/dialogue.hpp"
#include "gwl/learner.hpp"

namespace gwl::service {

enum class ErrorKind { NotFound, BadRequest, Conflict, Protocol, Parse };

std::string_view name(ErrorKind k);

class ServiceError : public std::runtime_error {
 public:
  ServiceError(ErrorKind kind, const std::string& what, std::vector<std::string> patterns = {})
      : std::runtime_error(what), kind_(kind), patterns_(std::move(patterns)) {}
  ErrorKind kind() const { return kind_; }
  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  ErrorKind kind_;
  std::vector<std::string> patterns_;
};

// Tutor utterance forms the parser accepts.
const std::vector<std::string>& accepted_patterns();

// Maps tutor text to a move given the dialogue context. Matching ignores
// case and punctuation; attribute words are picked out of the text.
dialogue::DialogueMove parse_tutor_utterance(std::string_view text, const dialogue::DialogueState& state);

enum class BusyPolicy { Reject, Queue };

struct ServiceConfig {
  SgdParams sgd{};
  dialogue::CostTable costs{};
  // Registry file used by "load_model" and the default target of "save".
  std::filesystem::path model_path = "model.json";
  BusyPolicy busy = BusyPolicy::Reject;
  std::uint64_t order_seed = 99;
};

struct SessionOptions {
  dialogue::PolicySettings settings{};
  bool shared_registry = false;
  bool load_model = false;
  // Dataset indices to present, in order; empty means a seeded shuffle.
  std::vector<std::size_t> objects;
  std::optional<std::uint64_t> seed;
};

SessionOptions parse_session_options(const nlohmann::json& body);

struct TurnView {
  dialogue::Utterance utterance;
  double cost = 0.0;
  // What the tutor typed; costs use the canonical template words.
  std::string raw;
};

nlohmann::json to_json(const TurnView& t);

struct PostResult {
  TurnView tutor;
  std::vector<TurnView> learner;
  double cost_delta = 0.0;
  nlohmann::json state;
};

struct Event {
  std::uint64_t seq = 0;
  std::string type;
  nlohmann::json data;
};

class TutorService {
 public:
  TutorService(const Dataset& data, ServiceConfig config = {});
  ~TutorService();

  std::string create_session(const SessionOptions& options);
  PostResult post_tutor_utterance(const std::string& id, std::string_view text);
  nlohmann::json get_state(const std::string& id) const;
  nlohmann::json advance_object(const std::string& id);
  std::filesystem::path save(const std::string& id, std::optional<std::filesystem::path> path = std::nullopt);
  std::vector<std::uint8_t> object_png(const std::string& id) const;

  // Copy of the session's registry (the shared one for shared sessions).
  ClassifierRegistry registry(const std::string& id) const;
  dialogue::DialogueState dialogue_state(const std::string& id) const;

  // Events with seq > after; blocks up to `wait` for new ones. Empty result
  // on timeout or shutdown.
  std::vector<Event> events_after(const std::string& id, std::uint64_t after,
                                  std::chrono::milliseconds wait) const;

  // Wakes blocked event readers; used when the HTTP server stops.
  void shutdown();

 private:
  struct Session;
  struct RegistryBox;

  std::shared_ptr<Session> find(const std::string& id) const;

  const Dataset& data_;
  ServiceConfig config_;
  std::shared_ptr<RegistryBox> shared_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::atomic<bool> shutdown_{false};
};

}  // namespace gwl::service
