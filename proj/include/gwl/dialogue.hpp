// Typed dialogue moves, the learner policy over the Initiative x Uncertainty x
// Context-Dependency factors, the simulated tutor, grounding of agreed
// content into training judgements, and the tutor cost ledger.
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gwl/attributes.hpp"
#include "gwl/learner.hpp"
#include "gwl/ttr.hpp"
#include "gwl/vision.hpp"

namespace gwl::dialogue {

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A move/settings combination the template grammar cannot realize.
class RealizationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Conflicting content reached the agreed record type.
class DialogueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The turn cap was hit; the policies are deterministic, so this is a bug.
class PolicyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Initiative { Learner, Tutor };

struct PolicySettings {
  Initiative initiative = Initiative::Learner;
  bool uncertainty = true;
  bool context_dependency = true;
  ConfidenceBands bands{};
  // Same-category negatives for every agreed attribute.
  bool implicit_negatives = true;
};

// "L+UC+CD" style label.
std::string condition_name(const PolicySettings& s);
std::optional<PolicySettings> parse_condition(std::string_view name);
std::vector<PolicySettings> factorial_conditions();

enum class Speaker { Learner, Tutor };
std::string_view name(Speaker s);

namespace act {
struct AskWh { Category category; bool operator==(const AskWh&) const = default; };
struct AskPolar { Attribute attribute; bool operator==(const AskPolar&) const = default; };
struct Inform { std::vector<Attribute> attributes; bool operator==(const Inform&) const = default; };
struct Assert {
  std::vector<Attribute> attributes;
  bool hedged = false;
  bool operator==(const Assert&) const = default;
};
struct Confirm { bool operator==(const Confirm&) const = default; };
struct Reject { bool operator==(const Reject&) const = default; };
// Rejection plus the true attribute(s), realized as one turn.
struct Correct { std::vector<Attribute> attributes; bool operator==(const Correct&) const = default; };
struct ShortAnswer { Attribute attribute; bool operator==(const ShortAnswer&) const = default; };
// Incomplete tutor turn ("so this is a ...") for the learner to complete.
struct Continuation { Category category; bool operator==(const Continuation&) const = default; };
struct DontKnow { Category category; bool operator==(const DontKnow&) const = default; };
struct RequestNext { bool operator==(const RequestNext&) const = default; };
}  // namespace act

using Act = std::variant<act::AskWh, act::AskPolar, act::Inform, act::Assert, act::Confirm, act::Reject,
                         act::Correct, act::ShortAnswer, act::Continuation, act::DontKnow,
                         act::RequestNext>;

struct DialogueMove {
  Speaker speaker = Speaker::Learner;
  Act act;
  bool operator==(const DialogueMove&) const = default;
};

std::string to_string(const Act& a);
Act parse_act(std::string_view text);

struct Utterance {
  DialogueMove move;
  std::vector<std::string> words;

  std::string text() const;
};

// Lowercase, strip punctuation (apostrophes included), split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

enum class Settlement { Open, Agreed, SelfSettled };

struct DialogueState {
  std::string object_id;
  ttr::RecordType agreed;
  std::optional<DialogueMove> pending;
  std::array<Settlement, 2> settled{Settlement::Open, Settlement::Open};
  std::vector<Attribute> rejected;
  std::vector<Utterance> transcript;
  int tutor_questions = 0;
  bool ended = false;

  bool is_open(Category c) const { return settled[index_of(c)] == Settlement::Open; }
};

struct CostTable {
  double inform = 1.0;
  double acknowledge = 0.25;
  double correct = 1.0;
  double parse_per_word = 0.5;
  double produce_per_word = 1.0;
};

// Tutor effort for one utterance: act cost plus production cost for tutor
// turns, parse cost for learner turns.
double utterance_cost(const Utterance& u, const CostTable& table);

struct CostLedger {
  CostTable table{};
  double cumulative = 0.0;

  double charge(const Utterance& u);
};

// Record-type labels used for the object and its two attribute categories.
inline constexpr const char* kObjectLabel = "x";
std::string category_label(Category c);

ttr::RecordType atomic_type(Attribute a);
ttr::Ontology attribute_ontology();
// Attributes whose predicates appear in a record type, in field order.
std::vector<Attribute> attributes_of(const ttr::RecordType& rt);

// Whose turn it is; empty once the dialogue has ended.
std::optional<Speaker> next_speaker(const DialogueState& state, const PolicySettings& s);

DialogueMove learner_act(const DialogueState& state, const CategoryVerdicts& verdicts,
                         const PolicySettings& s);

DialogueMove tutor_act(const DialogueState& state, const vision::ObjectSpec& truth,
                       const PolicySettings& s);

Utterance realize(const DialogueMove& move, const DialogueState& state, const PolicySettings& s);

void interpret(const Utterance& utt, DialogueState& state);

struct JudgementLabel {
  Attribute attribute;
  bool positive;
  bool operator==(const JudgementLabel&) const = default;
};

std::vector<JudgementLabel> judgement_labels(const DialogueState& state, bool implicit_negatives);

std::vector<TrainingJudgement> ground_judgements(const DialogueState& state, const FeatureVector& features,
                                                 bool implicit_negatives = true);

struct DialogueResult {
  DialogueState state;
  std::vector<TrainingJudgement> judgements;
  double cost_delta = 0.0;
  // Ledger delta observed for each utterance, in transcript order.
  std::vector<double> turn_costs;
};

inline constexpr int kTurnCap = 20;

DialogueResult run_dialogue(const std::string& object_id, const FeatureVector& features,
                            const vision::ObjectSpec& truth, const ClassifierRegistry& registry,
                            const PolicySettings& s, CostLedger& ledger);

}  // namespace gwl::dialogue
