#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gwl/dialogue.hpp"

using namespace gwl;
using namespace gwl::dialogue;

namespace {

PolicySettings cond(const char* name) { return *parse_condition(name); }

Verdict verdict(Category c, std::optional<Attribute> best, double p) {
  return {c, best, p, band_of(p, ConfidenceBands{})};
}

CategoryVerdicts verdicts(std::optional<Attribute> colour, double pc, std::optional<Attribute> shape, double ps) {
  return {verdict(Category::Colour, colour, pc), verdict(Category::Shape, shape, ps)};
}

// Drives realize + interpret for a scripted move list, charging a ledger.
DialogueState play(const std::vector<DialogueMove>& moves, const PolicySettings& s, CostLedger& ledger) {
  DialogueState st;
  for (const auto& m : moves) {
    const auto u = realize(m, st, s);
    ledger.charge(u);
    interpret(u, st);
  }
  return st;
}

DialogueMove L(Act a) { return {Speaker::Learner, std::move(a)}; }
DialogueMove T(Act a) { return {Speaker::Tutor, std::move(a)}; }

std::string text(const DialogueMove& m, const DialogueState& st, const PolicySettings& s) {
  return realize(m, st, s).text();
}

// Registry whose probabilities are fixed per attribute via the bias.
ClassifierRegistry fixed(std::initializer_list<std::pair<Attribute, double>> probs) {
  ClassifierRegistry reg;
  for (auto [a, p] : probs) reg.ensure(a).bias = std::log(p / (1 - p));
  return reg;
}

const FeatureVector kZero{std::vector<double>(vision::kFeatureDim, 0.0)};

}  // namespace

TEST_CASE("condition names") {
  const auto all = factorial_conditions();
  REQUIRE(all.size() == 8);
  CHECK(condition_name(all.front()) == "L+UC+CD");
  CHECK(condition_name(all.back()) == "T-UC-CD");
  for (const auto& s : all) CHECK(condition_name(*parse_condition(condition_name(s))) == condition_name(s));
  CHECK_FALSE(parse_condition("L+UC").has_value());
  CHECK_FALSE(parse_condition("X+UC+CD").has_value());
}

TEST_CASE("act text form round-trips") {
  for (const Act& a : std::vector<Act>{act::AskWh{Category::Shape}, act::AskPolar{Attribute::Red},
                                       act::Inform{{Attribute::Blue, Attribute::Circle}},
                                       act::Assert{{Attribute::Square}, true}, act::Confirm{}, act::Reject{},
                                       act::Correct{{Attribute::Green}}, act::ShortAnswer{Attribute::Triangle},
                                       act::Continuation{Category::Colour}, act::DontKnow{Category::Colour},
                                       act::RequestNext{}}) {
    CHECK(parse_act(to_string(a)) == a);
  }
}

TEST_CASE("tokenize") {
  CHECK(tokenize("No, it's a RED square!") == std::vector<std::string>{"no", "its", "a", "red", "square"});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("learner policy") {
  DialogueState st;
  const auto luc = cond("L+UC+CD");
  CHECK(learner_act(st, verdicts(std::nullopt, 0, std::nullopt, 0), luc) == L(act::AskWh{Category::Colour}));
  CHECK(learner_act(st, verdicts(Attribute::Red, 0.3, Attribute::Square, 0.7), luc) ==
        L(act::AskWh{Category::Colour}));
  CHECK(learner_act(st, verdicts(Attribute::Red, 0.95, Attribute::Square, 0.7), luc) ==
        L(act::AskPolar{Attribute::Square}));
  CHECK(learner_act(st, verdicts(Attribute::Red, 0.95, Attribute::Square, 0.93), luc) == L(act::RequestNext{}));
  CHECK(learner_act(st, verdicts(Attribute::Red, 0.55, Attribute::Circle, 0.51), cond("L-UC+CD")) ==
        L(act::Assert{{Attribute::Red, Attribute::Circle}, false}));
  CHECK(learner_act(st, verdicts(Attribute::Red, 0.55, Attribute::Circle, 0.51), cond("L-UC-CD")) ==
        L(act::Assert{{Attribute::Red}, false}));
  CHECK(learner_act(st, verdicts(std::nullopt, 0, Attribute::Circle, 0.51), cond("L-UC-CD")) ==
        L(act::AskWh{Category::Colour}));
  CHECK_THROWS_AS(learner_act(st, verdicts(std::nullopt, 0, std::nullopt, 0), cond("T+UC+CD")), ProtocolError);
}

TEST_CASE("learner answers tutor questions") {
  const auto tuc = cond("T+UC+CD");
  DialogueState st;
  interpret(realize(T(act::AskWh{Category::Shape}), st, tuc), st);
  CHECK(learner_act(st, verdicts(std::nullopt, 0, std::nullopt, 0), tuc) == L(act::DontKnow{Category::Shape}));
  CHECK(learner_act(st, verdicts(std::nullopt, 0, Attribute::Circle, 0.6), tuc) ==
        L(act::Assert{{Attribute::Circle}, true}));
  CHECK(learner_act(st, verdicts(std::nullopt, 0, Attribute::Circle, 0.95), tuc) ==
        L(act::ShortAnswer{Attribute::Circle}));
  CHECK(learner_act(st, verdicts(std::nullopt, 0, Attribute::Circle, 0.2), cond("T-UC-CD")) ==
        L(act::Assert{{Attribute::Circle}, false}));
}

TEST_CASE("tutor policy") {
  const auto s = cond("L+UC+CD");
  const vision::ObjectSpec truth{Attribute::Red, Attribute::Square, 0, {}};
  DialogueState st;
  st.pending = L(act::AskWh{Category::Colour});
  CHECK(tutor_act(st, truth, s) == T(act::Inform{{Attribute::Red}}));
  st.pending = L(act::Assert{{Attribute::Green}, false});
  CHECK(tutor_act(st, truth, s) == T(act::Correct{{Attribute::Red}}));
  st.pending = L(act::AskPolar{Attribute::Red});
  CHECK(tutor_act(st, truth, s) == T(act::Confirm{}));
  st.pending = L(act::Assert{{Attribute::Red, Attribute::Circle}, false});
  CHECK(tutor_act(st, truth, s) == T(act::Correct{{Attribute::Square}}));

  const auto t = cond("T+UC+CD");
  DialogueState fresh;
  CHECK(tutor_act(fresh, truth, t) == T(act::AskWh{Category::Colour}));
  fresh.tutor_questions = 1;
  fresh.settled[0] = Settlement::Agreed;
  CHECK(tutor_act(fresh, truth, t) == T(act::Continuation{Category::Shape}));
  CHECK(tutor_act(fresh, truth, cond("T+UC-CD")) == T(act::AskWh{Category::Shape}));
}

TEST_CASE("realization templates") {
  const auto cd = cond("L+UC+CD");
  const auto nocd = cond("L+UC-CD");
  DialogueState st;
  CHECK(text(L(act::AskWh{Category::Colour}), st, cd) == "what colour is this");
  CHECK(text(L(act::AskPolar{Attribute::Square}), st, cd) == "is this a square");
  CHECK(text(L(act::Assert{{Attribute::Square}, true}), st, cd) == "errm maybe a square");
  CHECK(text(L(act::Assert{{Attribute::Square, Attribute::Red}, false}), st, cd) == "this is a red square");
  CHECK_THROWS_AS(realize(L(act::Assert{{Attribute::Square, Attribute::Red}, false}), st, nocd), RealizationError);
  CHECK_THROWS_AS(realize(L(act::ShortAnswer{Attribute::Red}), st, nocd), RealizationError);
  CHECK_THROWS_AS(realize(L(act::Assert{{Attribute::Red, Attribute::Blue}, false}), st, cd), RealizationError);
  CHECK(text(L(act::RequestNext{}), st, cd) == "next please");
  CHECK(text(T(act::Inform{{Attribute::Red}}), st, cd) == "red");
  CHECK(text(T(act::Inform{{Attribute::Red}}), st, nocd) == "it is red");
  CHECK(text(T(act::Correct{{Attribute::Blue}}), st, cd) == "no it is blue");
  CHECK(text(T(act::Continuation{Category::Shape}), st, cd) == "so this is a");
  CHECK(text(T(act::Confirm{}), st, cd) == "yes");
}

TEST_CASE("interpretation and settlement") {
  const auto s = cond("L+UC+CD");
  CostLedger ledger;
  auto st = play({L(act::AskWh{Category::Colour}), T(act::Inform{{Attribute::Red}})}, s, ledger);
  CHECK(st.agreed == atomic_type(Attribute::Red));
  CHECK(st.settled[0] == Settlement::Agreed);
  CHECK(st.is_open(Category::Shape));
  CHECK_FALSE(st.ended);

  st = play({L(act::AskPolar{Attribute::Square}), T(act::Confirm{})}, s, ledger);
  CHECK(st.settled[1] == Settlement::Agreed);

  st = play({L(act::AskPolar{Attribute::Green}), T(act::Correct{{Attribute::Blue}})}, s, ledger);
  CHECK(st.agreed == atomic_type(Attribute::Blue));
  CHECK(st.rejected == std::vector<Attribute>{Attribute::Green});

  st = play({L(act::RequestNext{})}, s, ledger);
  CHECK(st.ended);
  CHECK(st.settled[0] == Settlement::SelfSettled);

  DialogueState bad;
  CHECK_THROWS_AS(interpret(realize(T(act::Confirm{}), bad, s), bad), ProtocolError);
  DialogueState twice;
  interpret(realize(L(act::AskWh{Category::Colour}), twice, s), twice);
  CHECK_THROWS_AS(interpret(realize(L(act::AskWh{Category::Shape}), twice, s), twice), ProtocolError);
}

TEST_CASE("judgements") {
  const auto s = cond("L+UC+CD");
  CostLedger ledger;
  auto st = play({L(act::AskWh{Category::Colour}), T(act::Inform{{Attribute::Red}}), L(act::AskWh{Category::Shape}),
                  T(act::Inform{{Attribute::Square}})},
                 s, ledger);
  REQUIRE(st.ended);
  const auto labels = judgement_labels(st, true);
  CHECK(std::count_if(labels.begin(), labels.end(), [](auto l) { return l.positive; }) == 2);
  CHECK(std::count_if(labels.begin(), labels.end(), [](auto l) {
          return !l.positive && category_of(l.attribute) == Category::Colour;
        }) == 5);
  CHECK(std::count_if(labels.begin(), labels.end(), [](auto l) {
          return !l.positive && category_of(l.attribute) == Category::Shape;
        }) == 2);

  auto empty = play({L(act::RequestNext{})}, s, ledger);
  CHECK(ground_judgements(empty, kZero).empty());

  auto corrected = play({L(act::AskPolar{Attribute::Green}), T(act::Correct{{Attribute::Blue}}),
                         L(act::RequestNext{})},
                        s, ledger);
  const auto cl = judgement_labels(corrected, false);
  CHECK(cl == std::vector<JudgementLabel>{{Attribute::Blue, true}, {Attribute::Green, false}});

  DialogueState open;
  CHECK_THROWS_AS(ground_judgements(open, kZero), ProtocolError);
}

TEST_CASE("cost table arithmetic") {
  const auto s = cond("L+UC+CD");
  DialogueState st;
  CostLedger ledger;
  CHECK(ledger.charge(realize(T(act::Correct{{Attribute::Blue}}), st, s)) == 5.0);
  CHECK(ledger.charge(realize(T(act::Confirm{}), st, s)) == 1.25);
  CHECK(ledger.charge(realize(L(act::AskWh{Category::Colour}), st, s)) == 2.0);
  CHECK(ledger.charge(realize(T(act::Inform{{Attribute::Red}}), st, s)) == 2.0);
  CHECK(ledger.charge(realize(T(act::Reject{}), st, s)) == 1.25);
  CHECK(ledger.cumulative == 11.5);
}

TEST_CASE("run_dialogue walk-throughs") {
  const vision::ObjectSpec truth{Attribute::Orange, Attribute::Triangle, 0, {}};

  SUBCASE("confident learner requests the next object at no cost") {
    CostLedger ledger;
    const auto reg = fixed({{Attribute::Orange, 0.97}, {Attribute::Triangle, 0.96}});
    const auto r = run_dialogue("o", kZero, truth, reg, cond("L+UC+CD"), ledger);
    REQUIRE(r.state.transcript.size() == 1);
    CHECK(r.state.transcript[0].move == L(act::RequestNext{}));
    CHECK(r.cost_delta == 1.0);  // parsing "next please"
    CHECK(r.judgements.empty());
  }

  SUBCASE("ignorant learner asks twice") {
    CostLedger ledger;
    const auto r = run_dialogue("o", kZero, truth, ClassifierRegistry{}, cond("L+UC+CD"), ledger);
    std::vector<DialogueMove> moves;
    for (const auto& u : r.state.transcript) moves.push_back(u.move);
    CHECK(moves == std::vector<DialogueMove>{L(act::AskWh{Category::Colour}), T(act::Inform{{Attribute::Orange}}),
                                             L(act::AskWh{Category::Shape}), T(act::Inform{{Attribute::Triangle}})});
    CHECK(r.cost_delta == 2.0 + 2.0 + 2.0 + 3.0);
    CHECK(r.cost_delta == ledger.cumulative);
    double sum = 0;
    for (double c : r.turn_costs) sum += c;
    CHECK(sum == r.cost_delta);
  }

  SUBCASE("tutor initiative settles both categories") {
    for (const char* c : {"T-UC+CD", "T-UC-CD", "T+UC+CD", "T+UC-CD"}) {
      CostLedger ledger;
      const auto reg = fixed({{Attribute::Blue, 0.6}, {Attribute::Circle, 0.7}});
      const auto r = run_dialogue("o", kZero, truth, reg, cond(c), ledger);
      CHECK(r.state.ended);
      CHECK(r.state.settled[0] == Settlement::Agreed);
      CHECK(r.state.settled[1] == Settlement::Agreed);
      CHECK(attributes_of(r.state.agreed) == std::vector<Attribute>{Attribute::Orange, Attribute::Triangle});
    }
  }

  SUBCASE("every condition ends within the turn cap") {
    for (const auto& s : factorial_conditions()) {
      for (const auto& reg : {ClassifierRegistry{}, fixed({{Attribute::Red, 0.6}, {Attribute::Square, 0.95}})}) {
        CostLedger ledger;
        CHECK_NOTHROW(run_dialogue("o", kZero, truth, reg, s, ledger));
      }
    }
  }
}
