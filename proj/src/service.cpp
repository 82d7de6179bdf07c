#include "gwl/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <numeric>
#include <random>

#include "gwl/image_io.hpp"
#include "gwl/ttr.hpp"

namespace gwl::service {

using dialogue::DialogueMove;
using dialogue::DialogueState;
using dialogue::Speaker;
using nlohmann::json;
namespace act = dialogue::act;

std::string_view name(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::BadRequest: return "bad_request";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Parse: return "parse";
  }
  return "?";
}

const std::vector<std::string>& accepted_patterns() {
  static const std::vector<std::string> patterns = {
      "what colour is this",
      "what shape is this",
      "so this is",
      "so this is a",
      "yes",
      "no",
      "no it is <colour/shape>",
      "it is <colour/shape>",
      "<colour> | a <shape> | a <colour> <shape>",
  };
  return patterns;
}

namespace {

bool is_one_of(const std::string& w, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return w == o; });
}

std::vector<Attribute> claims_pending(const DialogueState& state) {
  if (!state.pending || state.pending->speaker != Speaker::Learner) return {};
  const auto& a = state.pending->act;
  if (const auto* m = std::get_if<act::AskPolar>(&a)) return {m->attribute};
  if (const auto* m = std::get_if<act::Assert>(&a)) return m->attributes;
  if (const auto* m = std::get_if<act::ShortAnswer>(&a)) return {m->attribute};
  return {};
}

[[noreturn]] void parse_fail(const std::string& why) {
  throw ServiceError(ErrorKind::Parse, why, accepted_patterns());
}

}  // namespace

DialogueMove parse_tutor_utterance(std::string_view text, const DialogueState& state) {
  const auto words = dialogue::tokenize(text);
  if (words.empty()) parse_fail("empty utterance");
  std::vector<Attribute> attrs;
  std::optional<Category> asked;
  for (const auto& w : words) {
    if (auto a = parse_attribute(w)) {
      if (std::find(attrs.begin(), attrs.end(), *a) == attrs.end()) attrs.push_back(*a);
    } else if (auto c = parse_category(w)) {
      asked = c;
    } else if (w == "shape") {
      asked = Category::Shape;
    }
  }
  std::stable_sort(attrs.begin(), attrs.end(),
                   [](Attribute a, Attribute b) { return category_of(a) < category_of(b); });
  for (auto c : kAllCategories) {
    if (std::count_if(attrs.begin(), attrs.end(), [&](Attribute a) { return category_of(a) == c; }) > 1) {
      parse_fail("more than one " + std::string(name(c)) + " in \"" + std::string(text) + "\"");
    }
  }
  auto move = [](dialogue::Act a) { return DialogueMove{Speaker::Tutor, std::move(a)}; };
  const std::string& first = words.front();

  if (first == "what") {
    if (!asked) parse_fail("question does not say colour or shape");
    return move(act::AskWh{*asked});
  }
  if (words.size() >= 3 && first == "so" && words[1] == "this" && words[2] == "is" && attrs.empty()) {
    if (words.size() == 3) return move(act::Continuation{Category::Colour});
    if (words.size() == 4 && is_one_of(words[3], {"a", "an"})) return move(act::Continuation{Category::Shape});
    parse_fail("unfinished sentence must end at \"so this is\" or \"so this is a\"");
  }
  const bool negative = is_one_of(first, {"no", "nope", "wrong"});
  const bool positive = is_one_of(first, {"yes", "yeah", "yep", "right", "correct"});
  if (attrs.empty()) {
    if (positive && words.size() <= 3) return move(act::Confirm{});
    if (negative && words.size() <= 3) return move(act::Reject{});
    parse_fail("no colour or shape word in \"" + std::string(text) + "\"");
  }
  if (negative) return move(act::Correct{attrs});
  const auto claims = claims_pending(state);
  if (!claims.empty()) {
    const bool all_claimed = std::all_of(attrs.begin(), attrs.end(), [&](Attribute a) {
      return std::find(claims.begin(), claims.end(), a) != claims.end();
    });
    if (all_claimed) return move(act::Confirm{});
    std::vector<Attribute> fixes;
    for (auto a : attrs) {
      if (std::find(claims.begin(), claims.end(), a) == claims.end()) fixes.push_back(a);
    }
    return move(act::Correct{fixes});
  }
  return move(act::Inform{attrs});
}

SessionOptions parse_session_options(const json& body) {
  SessionOptions o;
  if (body.is_null()) return o;
  if (!body.is_object()) throw ServiceError(ErrorKind::BadRequest, "request body must be a JSON object");
  try {
    if (body.contains("condition")) {
      const auto name = body.at("condition").get<std::string>();
      auto s = dialogue::parse_condition(name);
      if (!s) throw ServiceError(ErrorKind::BadRequest, "unknown condition \"" + name + "\" (e.g. L+UC+CD)");
      o.settings = *s;
    }
    const double base = body.value("base_threshold", o.settings.bands.base);
    const double pos = body.value("positive_threshold", o.settings.bands.positive);
    o.settings.bands = ConfidenceBands(base, pos);
    o.settings.implicit_negatives = body.value("implicit_negatives", true);
    o.shared_registry = body.value("shared_registry", false);
    o.load_model = body.value("load_model", false);
    if (body.contains("objects")) o.objects = body.at("objects").get<std::vector<std::size_t>>();
    if (body.contains("seed")) o.seed = body.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ServiceError(ErrorKind::BadRequest, std::string("bad session options: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ServiceError(ErrorKind::BadRequest, e.what());
  }
  return o;
}

json to_json(const TurnView& t) {
  return {{"speaker", dialogue::name(t.utterance.move.speaker)},
          {"move", dialogue::to_string(t.utterance.move.act)},
          {"text", t.raw.empty() ? t.utterance.text() : t.raw},
          {"words", t.utterance.text()},
          {"cost", t.cost}};
}

struct TutorService::RegistryBox {
  mutable std::mutex m;
  ClassifierRegistry reg;
};

struct TutorService::Session {
  std::string id;
  SessionOptions options;
  std::shared_ptr<RegistryBox> registry;
  std::vector<std::size_t> objects;
  std::size_t position = 0;
  std::size_t completed = 0;
  DialogueState state;
  dialogue::CostLedger ledger;
  std::vector<TurnView> turns;  // current dialogue
  bool trained = false;

  std::mutex request;       // serializes mutating requests
  mutable std::mutex view;  // guards the fields above for readers

  mutable std::mutex event_mutex;
  mutable std::condition_variable event_cv;
  std::vector<Event> events;

  std::size_t object_index() const { return objects.at(position); }
};

namespace {

std::string settlement_name(dialogue::Settlement s) {
  switch (s) {
    case dialogue::Settlement::Open: return "open";
    case dialogue::Settlement::Agreed: return "agreed";
    case dialogue::Settlement::SelfSettled: return "self_settled";
  }
  return "?";
}

}  // namespace

TutorService::TutorService(const Dataset& data, ServiceConfig config)
    : data_(data), config_(std::move(config)), shared_(std::make_shared<RegistryBox>()) {
  if (data_.size() == 0) throw std::invalid_argument("tutor service needs a non-empty dataset");
}

TutorService::~TutorService() { shutdown(); }

void TutorService::shutdown() {
  shutdown_ = true;
  std::lock_guard lock(sessions_mutex_);
  for (auto& [id, s] : sessions_) {
    std::lock_guard ev(s->event_mutex);
    s->event_cv.notify_all();
  }
}

std::shared_ptr<TutorService::Session> TutorService::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(ErrorKind::NotFound, "no session " + id);
  return it->second;
}

namespace {

void emit(auto& s, std::string type, json data) {
  std::lock_guard lock(s.event_mutex);
  Event e;
  e.seq = s.events.size() + 1;
  e.type = std::move(type);
  data["seq"] = e.seq;
  data["type"] = e.type;
  data["session"] = s.id;
  e.data = std::move(data);
  s.events.push_back(std::move(e));
  s.event_cv.notify_all();
}

json snapshot(const auto& s, const Dataset& data) {
  const auto& st = s.state;
  json out;
  out["id"] = s.id;
  out["condition"] = dialogue::condition_name(s.options.settings);
  out["bands"] = {{"base", s.options.settings.bands.base}, {"positive", s.options.settings.bands.positive}};
  out["shared_registry"] = s.options.shared_registry;
  const std::size_t idx = s.object_index();
  out["object"] = {{"position", s.position},
                   {"index", idx},
                   {"id", object_id(idx)},
                   {"image", "/sessions/" + s.id + "/object.png"}};
  out["objects_completed"] = s.completed;
  out["objects_remaining"] = s.objects.size() - s.position - 1;
  const auto who = dialogue::next_speaker(st, s.options.settings);
  out["turn"] = who ? json(dialogue::name(*who)) : json(nullptr);
  out["ended"] = st.ended;
  out["agreed"] = ttr::to_string(st.agreed);
  out["settled"] = {{"colour", settlement_name(st.settled[0])}, {"shape", settlement_name(st.settled[1])}};
  json transcript = json::array();
  for (const auto& t : s.turns) transcript.push_back(to_json(t));
  out["transcript"] = transcript;
  json conf = json::array();
  {
    std::lock_guard lock(s.registry->m);
    const auto& x = data.features[idx];
    for (auto a : kAllAttributes) {
      const double p = s.registry->reg.prob(a, x);
      conf.push_back({{"attribute", name(a)},
                      {"category", name(category_of(a))},
                      {"prob", p},
                      {"band", name(band_of(p, s.options.settings.bands))},
                      {"known", s.registry->reg.contains(a)}});
    }
  }
  out["confidences"] = conf;
  out["cumulative_cost"] = s.ledger.cumulative;
  out["accepted_patterns"] = accepted_patterns();
  return out;
}

// Applies one utterance; the state is only replaced when interpretation succeeds.
TurnView apply(auto& s, const DialogueMove& move, std::string raw) {
  dialogue::Utterance utt;
  try {
    utt = dialogue::realize(move, s.state, s.options.settings);
  } catch (const dialogue::RealizationError& e) {
    throw ServiceError(ErrorKind::Protocol, e.what());
  }
  DialogueState next = s.state;
  try {
    dialogue::interpret(utt, next);
  } catch (const dialogue::ProtocolError& e) {
    throw ServiceError(ErrorKind::Protocol, e.what());
  }
  TurnView t{utt, 0.0, std::move(raw)};
  std::lock_guard lock(s.view);
  t.cost = s.ledger.charge(utt);
  s.state = std::move(next);
  s.turns.push_back(t);
  return t;
}

// Learner moves until it is the tutor's turn; trains once the dialogue ends.
std::vector<TurnView> learner_replies(auto& s, const Dataset& data, const SgdParams& sgd) {
  std::vector<TurnView> out;
  const auto& x = data.features[s.object_index()];
  while (dialogue::next_speaker(s.state, s.options.settings) == Speaker::Learner) {
    if (s.state.transcript.size() >= static_cast<std::size_t>(dialogue::kTurnCap)) {
      throw dialogue::PolicyError("dialogue exceeded the turn cap");
    }
    CategoryVerdicts v;
    {
      std::lock_guard lock(s.registry->m);
      v = s.registry->reg.classify_bands(x, s.options.settings.bands, s.state.rejected);
    }
    const auto move = dialogue::learner_act(s.state, v, s.options.settings);
    out.push_back(apply(s, move, ""));
    emit(s, "turn", to_json(out.back()));
  }
  if (s.state.ended && !s.trained) {
    const auto judgements = dialogue::ground_judgements(s.state, x, s.options.settings.implicit_negatives);
    {
      std::lock_guard lock(s.registry->m);
      for (const auto& j : judgements) s.registry->reg.train(j, sgd);
    }
    std::lock_guard lock(s.view);
    s.trained = true;
    ++s.completed;
    json labels = json::array();
    for (const auto& j : judgements) labels.push_back({{"attribute", name(j.attribute)}, {"positive", j.positive}});
    emit(s, "dialogue_end", {{"object", object_id(s.object_index())}, {"judgements", labels}});
  }
  return out;
}

}  // namespace

std::string TutorService::create_session(const SessionOptions& options) {
  auto s = std::make_shared<Session>();
  s->options = options;
  if (options.objects.empty()) {
    s->objects.resize(data_.size());
    std::iota(s->objects.begin(), s->objects.end(), 0);
    std::mt19937_64 rng(options.seed.value_or(config_.order_seed));
    std::shuffle(s->objects.begin(), s->objects.end(), rng);
  } else {
    for (auto i : options.objects) {
      if (i >= data_.size()) {
        throw ServiceError(ErrorKind::BadRequest, "object index " + std::to_string(i) + " out of range");
      }
    }
    s->objects = options.objects;
  }
  if (options.shared_registry) {
    s->registry = shared_;
  } else {
    s->registry = std::make_shared<RegistryBox>();
  }
  if (options.load_model) {
    try {
      auto loaded = ClassifierRegistry::load(config_.model_path).first;
      std::lock_guard lock(s->registry->m);
      s->registry->reg = std::move(loaded);
    } catch (const std::exception& e) {
      throw ServiceError(ErrorKind::BadRequest, std::string("cannot load model: ") + e.what());
    }
  }
  s->ledger.table = config_.costs;
  {
    std::lock_guard lock(sessions_mutex_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_[s->id] = s;
  }
  std::lock_guard req(s->request);
  s->state.object_id = object_id(s->object_index());
  emit(*s, "session", {{"condition", dialogue::condition_name(s->options.settings)},
                       {"object", s->state.object_id}});
  learner_replies(*s, data_, config_.sgd);
  return s->id;
}

PostResult TutorService::post_tutor_utterance(const std::string& id, std::string_view text) {
  auto s = find(id);
  std::unique_lock req(s->request, std::defer_lock);
  if (config_.busy == BusyPolicy::Queue) {
    req.lock();
  } else if (!req.try_lock()) {
    throw ServiceError(ErrorKind::Conflict, "session " + id + " is busy with another request");
  }
  if (s->state.ended) throw ServiceError(ErrorKind::Protocol, "the dialogue has ended; advance to the next object");
  if (dialogue::next_speaker(s->state, s->options.settings) != Speaker::Tutor) {
    throw ServiceError(ErrorKind::Protocol, "it is not the tutor's turn");
  }
  const auto move = parse_tutor_utterance(text, s->state);
  PostResult out;
  const double before = s->ledger.cumulative;
  out.tutor = apply(*s, move, std::string(text));
  emit(*s, "turn", to_json(out.tutor));
  out.learner = learner_replies(*s, data_, config_.sgd);
  out.cost_delta = s->ledger.cumulative - before;
  std::lock_guard lock(s->view);
  out.state = snapshot(*s, data_);
  return out;
}

json TutorService::get_state(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->view);
  return snapshot(*s, data_);
}

json TutorService::advance_object(const std::string& id) {
  auto s = find(id);
  std::unique_lock req(s->request, std::defer_lock);
  if (config_.busy == BusyPolicy::Queue) {
    req.lock();
  } else if (!req.try_lock()) {
    throw ServiceError(ErrorKind::Conflict, "session " + id + " is busy with another request");
  }
  if (!s->state.ended) throw ServiceError(ErrorKind::Conflict, "cannot advance in the middle of a dialogue");
  if (s->position + 1 >= s->objects.size()) throw ServiceError(ErrorKind::Conflict, "no objects left");
  {
    std::lock_guard lock(s->view);
    ++s->position;
    s->state = DialogueState{};
    s->state.object_id = object_id(s->object_index());
    s->turns.clear();
    s->trained = false;
  }
  emit(*s, "advance", {{"object", s->state.object_id}, {"position", s->position}});
  learner_replies(*s, data_, config_.sgd);
  std::lock_guard lock(s->view);
  return snapshot(*s, data_);
}

std::filesystem::path TutorService::save(const std::string& id, std::optional<std::filesystem::path> path) {
  auto s = find(id);
  const auto target = path.value_or(config_.model_path);
  try {
    std::lock_guard lock(s->registry->m);
    s->registry->reg.save(target, s->options.settings.bands);
  } catch (const std::exception& e) {
    throw ServiceError(ErrorKind::BadRequest, std::string("cannot save model: ") + e.what());
  }
  emit(*s, "saved", {{"path", target.string()}});
  return target;
}

std::vector<std::uint8_t> TutorService::object_png(const std::string& id) const {
  auto s = find(id);
  std::size_t idx;
  {
    std::lock_guard lock(s->view);
    idx = s->object_index();
  }
  if (idx >= data_.images.size()) throw ServiceError(ErrorKind::NotFound, "no image for " + object_id(idx));
  return vision::encode_png(data_.images[idx]);
}

ClassifierRegistry TutorService::registry(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->registry->m);
  return s->registry->reg;
}

DialogueState TutorService::dialogue_state(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->view);
  return s->state;
}

std::vector<Event> TutorService::events_after(const std::string& id, std::uint64_t after,
                                              std::chrono::milliseconds wait) const {
  auto s = find(id);
  std::unique_lock lock(s->event_mutex);
  s->event_cv.wait_for(lock, wait, [&] { return shutdown_ || s->events.size() > after; });
  if (s->events.size() <= after) return {};
  return {s->events.begin() + static_cast<std::ptrdiff_t>(after), s->events.end()};
}

}  // namespace gwl::service
