#include "gwl/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace gwl::dialogue {

std::string condition_name(const PolicySettings& s) {
  std::string out = s.initiative == Initiative::Learner ? "L" : "T";
  out += s.uncertainty ? "+UC" : "-UC";
  out += s.context_dependency ? "+CD" : "-CD";
  return out;
}

std::optional<PolicySettings> parse_condition(std::string_view n) {
  if (n.size() != 7 || (n[0] != 'L' && n[0] != 'T') || n.substr(2, 2) != "UC" || n.substr(5, 2) != "CD") {
    return std::nullopt;
  }
  auto sign = [](char c) -> std::optional<bool> {
    if (c == '+') return true;
    if (c == '-') return false;
    return std::nullopt;
  };
  const auto uc = sign(n[1]);
  const auto cd = sign(n[4]);
  if (!uc || !cd) return std::nullopt;
  PolicySettings s;
  s.initiative = n[0] == 'L' ? Initiative::Learner : Initiative::Tutor;
  s.uncertainty = *uc;
  s.context_dependency = *cd;
  return s;
}

std::vector<PolicySettings> factorial_conditions() {
  std::vector<PolicySettings> out;
  for (auto init : {Initiative::Learner, Initiative::Tutor}) {
    for (bool uc : {true, false}) {
      for (bool cd : {true, false}) {
        PolicySettings s;
        s.initiative = init;
        s.uncertainty = uc;
        s.context_dependency = cd;
        out.push_back(s);
      }
    }
  }
  return out;
}

std::string_view name(Speaker s) { return s == Speaker::Learner ? "learner" : "tutor"; }

namespace {

std::string join_attributes(const std::vector<Attribute>& attrs) {
  std::string out;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (i) out += ',';
    out += name(attrs[i]);
  }
  return out;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string to_string(const Act& a) {
  return std::visit(
      overloaded{
          [](const act::AskWh& m) { return "AskWh(" + std::string(name(m.category)) + ")"; },
          [](const act::AskPolar& m) { return "AskPolar(" + std::string(name(m.attribute)) + ")"; },
          [](const act::Inform& m) { return "Inform(" + join_attributes(m.attributes) + ")"; },
          [](const act::Assert& m) {
            return "Assert(" + join_attributes(m.attributes) + (m.hedged ? ";hedged)" : ")");
          },
          [](const act::Confirm&) { return std::string("Confirm"); },
          [](const act::Reject&) { return std::string("Reject"); },
          [](const act::Correct& m) { return "Correct(" + join_attributes(m.attributes) + ")"; },
          [](const act::ShortAnswer& m) { return "ShortAnswer(" + std::string(name(m.attribute)) + ")"; },
          [](const act::Continuation& m) { return "Continuation(" + std::string(name(m.category)) + ")"; },
          [](const act::DontKnow& m) { return "DontKnow(" + std::string(name(m.category)) + ")"; },
          [](const act::RequestNext&) { return std::string("RequestNext"); },
      },
      a);
}

Act parse_act(std::string_view text) {
  auto fail = [&]() -> Act { throw std::invalid_argument("unparseable move '" + std::string(text) + "'"); };
  const auto open = text.find('(');
  const std::string_view head = text.substr(0, open);
  std::string_view body;
  if (open != std::string_view::npos) {
    if (text.back() != ')') return fail();
    body = text.substr(open + 1, text.size() - open - 2);
  }
  bool hedged = false;
  if (const auto semi = body.find(';'); semi != std::string_view::npos) {
    if (body.substr(semi + 1) != "hedged") return fail();
    hedged = true;
    body = body.substr(0, semi);
  }
  auto attrs = [&]() {
    std::vector<Attribute> out;
    std::size_t start = 0;
    while (start <= body.size()) {
      const auto comma = body.find(',', start);
      const auto piece = body.substr(start, comma == std::string_view::npos ? body.npos : comma - start);
      const auto a = parse_attribute(piece);
      if (!a) throw std::invalid_argument("unknown attribute '" + std::string(piece) + "'");
      out.push_back(*a);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  };
  auto attr = [&]() {
    const auto a = parse_attribute(body);
    if (!a) throw std::invalid_argument("unknown attribute '" + std::string(body) + "'");
    return *a;
  };
  auto cat = [&]() {
    const auto c = parse_category(body);
    if (!c) throw std::invalid_argument("unknown category '" + std::string(body) + "'");
    return *c;
  };
  if (head == "AskWh") return act::AskWh{cat()};
  if (head == "AskPolar") return act::AskPolar{attr()};
  if (head == "Inform") return act::Inform{attrs()};
  if (head == "Assert") return act::Assert{attrs(), hedged};
  if (head == "Confirm" && body.empty()) return act::Confirm{};
  if (head == "Reject" && body.empty()) return act::Reject{};
  if (head == "Correct") return act::Correct{attrs()};
  if (head == "ShortAnswer") return act::ShortAnswer{attr()};
  if (head == "Continuation") return act::Continuation{cat()};
  if (head == "DontKnow") return act::DontKnow{cat()};
  if (head == "RequestNext" && body.empty()) return act::RequestNext{};
  return fail();
}

std::string Utterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double utterance_cost(const Utterance& u, const CostTable& t) {
  const double words = static_cast<double>(u.words.size());
  if (u.move.speaker == Speaker::Learner) return t.parse_per_word * words;
  const double act_cost = std::visit(
      overloaded{
          [&](const act::Inform& m) { return t.inform * static_cast<double>(m.attributes.size()); },
          [&](const act::Confirm&) { return t.acknowledge; },
          [&](const act::Reject&) { return t.acknowledge; },
          [&](const act::Correct& m) { return t.correct * static_cast<double>(m.attributes.size()); },
          [](const auto&) { return 0.0; },
      },
      u.move.act);
  return act_cost + t.produce_per_word * words;
}

double CostLedger::charge(const Utterance& u) {
  const double delta = utterance_cost(u, table);
  cumulative += delta;
  return delta;
}

std::string category_label(Category c) { return c == Category::Colour ? "c" : "s"; }

ttr::RecordType atomic_type(Attribute a) {
  return ttr::RecordType({{kObjectLabel, ttr::BaseType{"Ind"}},
                          {category_label(category_of(a)),
                           ttr::PredicateType{std::string(name(a)), {kObjectLabel}}}});
}

ttr::Ontology attribute_ontology() {
  ttr::Ontology o;
  for (auto a : kAllAttributes) o[std::string(name(a))] = std::string(name(category_of(a)));
  return o;
}

std::vector<Attribute> attributes_of(const ttr::RecordType& rt) {
  std::vector<Attribute> out;
  for (const auto& f : rt.fields()) {
    if (const auto* p = std::get_if<ttr::PredicateType>(&f.type)) {
      if (auto a = parse_attribute(p->pred)) out.push_back(*a);
    }
  }
  return out;
}

namespace {

bool is_tutor_question(const std::optional<DialogueMove>& m) {
  return m && m->speaker == Speaker::Tutor &&
         (std::holds_alternative<act::AskWh>(m->act) || std::holds_alternative<act::Continuation>(m->act));
}

Category question_category(const DialogueMove& m) {
  if (const auto* w = std::get_if<act::AskWh>(&m.act)) return w->category;
  return std::get<act::Continuation>(m.act).category;
}

Attribute truth_for(const vision::ObjectSpec& truth, Category c) {
  return c == Category::Colour ? truth.color : truth.shape;
}

std::optional<Category> first_open(const DialogueState& state) {
  for (auto c : kAllCategories) {
    if (state.is_open(c)) return c;
  }
  return std::nullopt;
}

}  // namespace

std::optional<Speaker> next_speaker(const DialogueState& state, const PolicySettings& s) {
  if (state.ended) return std::nullopt;
  if (state.pending) return state.pending->speaker == Speaker::Tutor ? Speaker::Learner : Speaker::Tutor;
  return s.initiative == Initiative::Learner ? Speaker::Learner : Speaker::Tutor;
}

DialogueMove learner_act(const DialogueState& state, const CategoryVerdicts& verdicts,
                         const PolicySettings& s) {
  if (next_speaker(state, s) != Speaker::Learner) {
    throw ProtocolError("learner_act called when it is not the learner's turn");
  }
  auto move = [](Act a) { return DialogueMove{Speaker::Learner, std::move(a)}; };

  if (is_tutor_question(state.pending)) {
    const Category cat = question_category(*state.pending);
    const Verdict& v = verdicts[index_of(cat)];
    if (!v.best) return move(act::DontKnow{cat});
    if (s.uncertainty) {
      if (v.band == Band::Unknown) return move(act::DontKnow{cat});
      if (v.band == Band::Unsure) return move(act::Assert{{*v.best}, true});
    }
    if (s.context_dependency) return move(act::ShortAnswer{*v.best});
    return move(act::Assert{{*v.best}, false});
  }

  if (s.uncertainty) {
    for (auto cat : kAllCategories) {
      if (!state.is_open(cat)) continue;
      const Verdict& v = verdicts[index_of(cat)];
      if (v.band == Band::Confident) continue;
      if (v.band == Band::Unknown) return move(act::AskWh{cat});
      return move(act::AskPolar{*v.best});
    }
    return move(act::RequestNext{});
  }

  std::vector<Attribute> claims;
  for (auto cat : kAllCategories) {
    if (!state.is_open(cat)) continue;
    const Verdict& v = verdicts[index_of(cat)];
    if (!v.best) {
      if (claims.empty()) return move(act::AskWh{cat});
      break;
    }
    claims.push_back(*v.best);
    // Without context-dependency each claim is its own turn.
    if (!s.context_dependency) break;
  }
  if (claims.empty()) throw ProtocolError("learner has nothing left to discuss");
  return move(act::Assert{std::move(claims), false});
}

DialogueMove tutor_act(const DialogueState& state, const vision::ObjectSpec& truth, const PolicySettings& s) {
  if (next_speaker(state, s) != Speaker::Tutor) {
    throw ProtocolError("tutor_act called when it is not the tutor's turn");
  }
  auto move = [](Act a) { return DialogueMove{Speaker::Tutor, std::move(a)}; };
  if (!state.pending) {
    const auto cat = first_open(state);
    if (!cat) throw ProtocolError("tutor has nothing left to ask");
    if (s.context_dependency && state.tutor_questions % 2 == 1) return move(act::Continuation{*cat});
    return move(act::AskWh{*cat});
  }
  const auto& pending = state.pending->act;
  if (const auto* m = std::get_if<act::AskWh>(&pending)) return move(act::Inform{{truth_for(truth, m->category)}});
  if (const auto* m = std::get_if<act::DontKnow>(&pending)) {
    return move(act::Inform{{truth_for(truth, m->category)}});
  }
  std::vector<Attribute> claims;
  if (const auto* m = std::get_if<act::AskPolar>(&pending)) claims = {m->attribute};
  if (const auto* m = std::get_if<act::Assert>(&pending)) claims = m->attributes;
  if (const auto* m = std::get_if<act::ShortAnswer>(&pending)) claims = {m->attribute};
  if (claims.empty()) throw ProtocolError("tutor cannot respond to " + to_string(pending));
  std::vector<Attribute> corrections;
  for (auto a : claims) {
    const Attribute t = truth_for(truth, category_of(a));
    if (a != t) corrections.push_back(t);
  }
  if (corrections.empty()) return move(act::Confirm{});
  return move(act::Correct{std::move(corrections)});
}

namespace {

// "red", "a square", "a red square"
std::vector<std::string> describe(std::vector<Attribute> attrs) {
  std::stable_sort(attrs.begin(), attrs.end(),
                   [](Attribute a, Attribute b) { return category_of(a) < category_of(b); });
  std::vector<std::string> out;
  const bool has_shape = std::any_of(attrs.begin(), attrs.end(),
                                     [](Attribute a) { return category_of(a) == Category::Shape; });
  if (has_shape) out.emplace_back("a");
  for (auto a : attrs) out.emplace_back(name(a));
  return out;
}

std::vector<std::string> words_of(std::initializer_list<const char*> prefix, std::vector<std::string> rest = {}) {
  std::vector<std::string> out(prefix.begin(), prefix.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

void check_description(const std::vector<Attribute>& attrs) {
  if (attrs.empty()) throw RealizationError("move carries no attributes");
  bool seen[2] = {false, false};
  for (auto a : attrs) {
    auto& flag = seen[index_of(category_of(a))];
    if (flag) throw RealizationError("two attributes of one category in a single description");
    flag = true;
  }
}

}  // namespace

Utterance realize(const DialogueMove& move, const DialogueState& state, const PolicySettings& s) {
  const bool cd = s.context_dependency;
  auto illegal = [&]() -> std::vector<std::string> {
    throw RealizationError(std::string(name(move.speaker)) + " cannot utter " + to_string(move.act) +
                           " under " + condition_name(s));
  };
  std::vector<std::string> words;
  if (move.speaker == Speaker::Learner) {
    words = std::visit(
        overloaded{
            [](const act::AskWh& m) {
              return words_of({"what", m.category == Category::Colour ? "colour" : "shape", "is", "this"});
            },
            [](const act::AskPolar& m) { return words_of({"is", "this"}, describe({m.attribute})); },
            [&](const act::Assert& m) {
              check_description(m.attributes);
              if (m.attributes.size() > 1 && !cd) {
                throw RealizationError("compound assertions need context-dependency");
              }
              if (m.hedged) return words_of({"errm", "maybe"}, describe(m.attributes));
              if (is_tutor_question(state.pending)) return words_of({"it", "is"}, describe(m.attributes));
              return words_of({"this", "is"}, describe(m.attributes));
            },
            [&](const act::ShortAnswer& m) {
              if (!cd) return illegal();
              return describe({m.attribute});
            },
            [](const act::DontKnow&) { return words_of({"i", "dont", "know"}); },
            [](const act::RequestNext&) { return words_of({"next", "please"}); },
            [&](const auto&) { return illegal(); },
        },
        move.act);
  } else {
    words = std::visit(
        overloaded{
            [](const act::AskWh& m) {
              return words_of({"what", m.category == Category::Colour ? "colour" : "shape", "is", "this"});
            },
            [&](const act::Continuation& m) {
              if (!cd) return illegal();
              if (m.category == Category::Colour) return words_of({"so", "this", "is"});
              return words_of({"so", "this", "is", "a"});
            },
            [&](const act::Inform& m) {
              check_description(m.attributes);
              if (cd) return describe(m.attributes);
              return words_of({"it", "is"}, describe(m.attributes));
            },
            [](const act::Confirm&) { return words_of({"yes"}); },
            [](const act::Reject&) { return words_of({"no"}); },
            [](const act::Correct& m) {
              check_description(m.attributes);
              return words_of({"no", "it", "is"}, describe(m.attributes));
            },
            [&](const auto&) { return illegal(); },
        },
        move.act);
  }
  return Utterance{move, std::move(words)};
}

namespace {

void agree(DialogueState& state, Attribute a) {
  try {
    state.agreed = ttr::meet(state.agreed, atomic_type(a));
  } catch (const ttr::MeetConflict& e) {
    throw DialogueError(std::string("conflicting agreed content: ") + e.what());
  }
  state.settled[index_of(category_of(a))] = Settlement::Agreed;
}

void reject(DialogueState& state, Attribute a) {
  if (std::find(state.rejected.begin(), state.rejected.end(), a) == state.rejected.end()) {
    state.rejected.push_back(a);
  }
}

std::vector<Attribute> claims_of(const std::optional<DialogueMove>& pending) {
  if (!pending || pending->speaker != Speaker::Learner) return {};
  if (const auto* m = std::get_if<act::AskPolar>(&pending->act)) return {m->attribute};
  if (const auto* m = std::get_if<act::Assert>(&pending->act)) return m->attributes;
  if (const auto* m = std::get_if<act::ShortAnswer>(&pending->act)) return {m->attribute};
  return {};
}

}  // namespace

void interpret(const Utterance& utt, DialogueState& state) {
  if (state.ended) throw ProtocolError("utterance after the dialogue ended");
  const DialogueMove& m = utt.move;
  const bool from_learner = m.speaker == Speaker::Learner;
  if (state.pending && (state.pending->speaker == Speaker::Learner) == from_learner) {
    throw ProtocolError(std::string(name(m.speaker)) + " spoke out of turn");
  }
  state.transcript.push_back(utt);

  if (from_learner) {
    if (std::holds_alternative<act::RequestNext>(m.act)) {
      for (auto& s : state.settled) {
        if (s == Settlement::Open) s = Settlement::SelfSettled;
      }
      state.pending.reset();
      state.ended = true;
      return;
    }
    state.pending = m;
    return;
  }

  std::visit(
      overloaded{
          [&](const act::AskWh&) {
            ++state.tutor_questions;
            state.pending = m;
          },
          [&](const act::Continuation&) {
            ++state.tutor_questions;
            state.pending = m;
          },
          [&](const act::Inform& i) {
            for (auto a : i.attributes) agree(state, a);
            state.pending.reset();
          },
          [&](const act::Confirm&) {
            const auto claims = claims_of(state.pending);
            if (claims.empty()) throw ProtocolError("confirmation with nothing to confirm");
            for (auto a : claims) agree(state, a);
            state.pending.reset();
          },
          [&](const act::Reject&) {
            const auto claims = claims_of(state.pending);
            if (claims.empty()) throw ProtocolError("rejection with nothing to reject");
            for (auto a : claims) reject(state, a);
            state.pending.reset();
          },
          [&](const act::Correct& c) {
            for (auto a : claims_of(state.pending)) {
              const bool corrected = std::any_of(c.attributes.begin(), c.attributes.end(), [&](Attribute t) {
                return category_of(t) == category_of(a) && t != a;
              });
              // Claims in categories the tutor left alone count as accepted.
              if (corrected) {
                reject(state, a);
              } else if (std::find(c.attributes.begin(), c.attributes.end(), a) == c.attributes.end()) {
                agree(state, a);
              }
            }
            for (auto a : c.attributes) agree(state, a);
            state.pending.reset();
          },
          [&](const auto&) { throw ProtocolError("tutor cannot utter " + to_string(m.act)); },
      },
      m.act);

  if (!state.pending && !state.is_open(Category::Colour) && !state.is_open(Category::Shape)) {
    state.ended = true;
  }
}

std::vector<JudgementLabel> judgement_labels(const DialogueState& state, bool implicit_negatives) {
  std::vector<JudgementLabel> out;
  std::vector<Attribute> positives;
  for (const auto& atom : ttr::decompose(state.agreed)) {
    for (auto a : attributes_of(atom)) {
      positives.push_back(a);
      out.push_back({a, true});
    }
  }
  auto is_positive = [&](Attribute a) {
    return std::find(positives.begin(), positives.end(), a) != positives.end();
  };
  for (auto a : kAllAttributes) {
    if (is_positive(a)) continue;
    bool negative = std::find(state.rejected.begin(), state.rejected.end(), a) != state.rejected.end();
    if (implicit_negatives) {
      negative |= std::any_of(positives.begin(), positives.end(),
                              [&](Attribute p) { return category_of(p) == category_of(a); });
    }
    if (negative) out.push_back({a, false});
  }
  return out;
}

std::vector<TrainingJudgement> ground_judgements(const DialogueState& state, const FeatureVector& features,
                                                 bool implicit_negatives) {
  if (!state.ended) throw ProtocolError("judgements requested before the dialogue ended");
  std::vector<TrainingJudgement> out;
  for (const auto& l : judgement_labels(state, implicit_negatives)) {
    out.push_back({features, l.attribute, l.positive});
  }
  return out;
}

DialogueResult run_dialogue(const std::string& object_id, const FeatureVector& features,
                            const vision::ObjectSpec& truth, const ClassifierRegistry& registry,
                            const PolicySettings& s, CostLedger& ledger) {
  DialogueResult result;
  DialogueState& state = result.state;
  state.object_id = object_id;
  for (int turn = 0; turn < kTurnCap; ++turn) {
    const auto speaker = next_speaker(state, s);
    if (!speaker) break;
    const DialogueMove move =
        *speaker == Speaker::Learner
            ? learner_act(state, registry.classify_bands(features, s.bands, state.rejected), s)
            : tutor_act(state, truth, s);
    const Utterance utt = realize(move, state, s);
    const double delta = ledger.charge(utt);
    result.cost_delta += delta;
    result.turn_costs.push_back(delta);
    interpret(utt, state);
  }
  if (!state.ended) throw PolicyError("dialogue about " + object_id + " exceeded the turn cap");
  result.judgements = ground_judgements(state, features, s.implicit_negatives);
  return result;
}

}  // namespace gwl::dialogue
