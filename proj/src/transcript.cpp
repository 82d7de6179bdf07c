#include "gwl/transcript.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace gwl {

using dialogue::CostTable;
using dialogue::PolicySettings;
using nlohmann::json;

namespace {

json cost_table_json(const CostTable& t) {
  return {{"inform", t.inform},
          {"acknowledge", t.acknowledge},
          {"correct", t.correct},
          {"parse_per_word", t.parse_per_word},
          {"produce_per_word", t.produce_per_word}};
}

CostTable cost_table_from(const json& j) {
  CostTable t;
  t.inform = j.at("inform").get<double>();
  t.acknowledge = j.at("acknowledge").get<double>();
  t.correct = j.at("correct").get<double>();
  t.parse_per_word = j.at("parse_per_word").get<double>();
  t.produce_per_word = j.at("produce_per_word").get<double>();
  return t;
}

}  // namespace

TranscriptWriter::TranscriptWriter(std::ostream& out, const PolicySettings& s, const CostTable& table)
    : out_(out) {
  json header = {{"type", "header"},
                 {"condition", dialogue::condition_name(s)},
                 {"initiative", s.initiative == dialogue::Initiative::Learner ? "learner" : "tutor"},
                 {"uncertainty", s.uncertainty},
                 {"context_dependency", s.context_dependency},
                 {"implicit_negatives", s.implicit_negatives},
                 {"cost_table", cost_table_json(table)}};
  out_ << header.dump() << '\n';
}

void TranscriptWriter::write(const dialogue::DialogueResult& r, double cum_cost_before) {
  double cum = cum_cost_before;
  dialogue::DialogueState replay;
  for (std::size_t t = 0; t < r.state.transcript.size(); ++t) {
    const auto& u = r.state.transcript[t];
    cum += r.turn_costs.at(t);
    dialogue::interpret(u, replay);
    json row = {{"type", "turn"},
                {"dialogue", dialogue_},
                {"object", r.state.object_id},
                {"turn", t},
                {"speaker", dialogue::name(u.move.speaker)},
                {"move", dialogue::to_string(u.move.act)},
                {"words", u.text()},
                {"agreed", ttr::to_string(replay.agreed)},
                {"cum_cost", cum}};
    out_ << row.dump() << '\n';
  }
  json judgements = json::array();
  for (const auto& j : r.judgements) {
    judgements.push_back({{"attribute", name(j.attribute)}, {"positive", j.positive}});
  }
  json end = {{"type", "end"},
              {"dialogue", dialogue_},
              {"object", r.state.object_id},
              {"cum_cost", cum},
              {"judgements", judgements}};
  out_ << end.dump() << '\n';
  ++dialogue_;
}

ReplayReport replay_transcript(std::istream& in) {
  ReplayReport report;
  PolicySettings settings;
  CostTable table;
  bool have_header = false;
  dialogue::DialogueState state;
  double cum = 0.0;
  std::string line;
  int line_no = 0;
  auto mismatch = [&](const std::string& what) {
    report.mismatches.push_back("line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      settings.initiative = j.at("initiative").get<std::string>() == "learner" ? dialogue::Initiative::Learner
                                                                               : dialogue::Initiative::Tutor;
      settings.uncertainty = j.at("uncertainty").get<bool>();
      settings.context_dependency = j.at("context_dependency").get<bool>();
      settings.implicit_negatives = j.at("implicit_negatives").get<bool>();
      table = cost_table_from(j.at("cost_table"));
      have_header = true;
      continue;
    }
    if (!have_header) throw std::runtime_error("transcript has no header line");
    if (type == "turn") {
      if (j.at("turn").get<int>() == 0) {
        state = dialogue::DialogueState{};
        state.object_id = j.at("object").get<std::string>();
      }
      const auto speaker =
          j.at("speaker").get<std::string>() == "learner" ? dialogue::Speaker::Learner : dialogue::Speaker::Tutor;
      const dialogue::DialogueMove move{speaker, dialogue::parse_act(j.at("move").get<std::string>())};
      const auto utt = dialogue::realize(move, state, settings);
      if (utt.text() != j.at("words").get<std::string>()) {
        mismatch("words '" + utt.text() + "' != logged '" + j.at("words").get<std::string>() + "'");
      }
      cum += dialogue::utterance_cost(utt, table);
      report.logged_cost = j.at("cum_cost").get<double>();
      report.replayed_cost = cum;
      if (cum != report.logged_cost) {
        mismatch("cumulative cost " + std::to_string(cum) + " != logged " + std::to_string(report.logged_cost));
      }
      dialogue::interpret(utt, state);
      if (ttr::to_string(state.agreed) != j.at("agreed").get<std::string>()) {
        mismatch("agreed content diverged");
      }
      ++report.turns;
    } else if (type == "end") {
      if (!state.ended) mismatch("dialogue did not end where the log ends it");
      std::vector<dialogue::JudgementLabel> logged;
      for (const auto& jj : j.at("judgements")) {
        const auto a = parse_attribute(jj.at("attribute").get<std::string>());
        if (!a) throw std::runtime_error("bad attribute in transcript");
        logged.push_back({*a, jj.at("positive").get<bool>()});
      }
      if (dialogue::judgement_labels(state, settings.implicit_negatives) != logged) {
        mismatch("judgements diverged for " + state.object_id);
      }
      report.logged_cost = j.at("cum_cost").get<double>();
      if (cum != report.logged_cost) mismatch("end-of-dialogue cost diverged");
      ++report.dialogues;
      state = dialogue::DialogueState{};
    }
  }
  return report;
}

ReplayReport replay_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read transcript " + path.string());
  return replay_transcript(in);
}

}  // namespace gwl
