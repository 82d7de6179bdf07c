// Transcript log (JSON lines) and replay.
//
//   {"type":"header","condition":"L+UC+CD","initiative":"learner","uncertainty":true,
//    "context_dependency":true,"implicit_negatives":true,"cost_table":{...}}
//   {"type":"turn","dialogue":0,"object":"obj0007","turn":0,"speaker":"learner",
//    "move":"AskWh(colour)","words":"what colour is this","agreed":"[]","cum_cost":2}
//   {"type":"end","dialogue":0,"object":"obj0007","cum_cost":9.5,
//    "judgements":[{"attribute":"red","positive":true}, ...]}
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gwl/dialogue.hpp"

namespace gwl {

class TranscriptWriter {
 public:
  TranscriptWriter(std::ostream& out, const dialogue::PolicySettings& settings,
                   const dialogue::CostTable& table = {});

  // cum_cost_before: ledger total before this dialogue started.
  void write(const dialogue::DialogueResult& result, double cum_cost_before);

 private:
  std::ostream& out_;
  int dialogue_ = 0;
};

struct ReplayReport {
  int dialogues = 0;
  int turns = 0;
  double logged_cost = 0.0;
  double replayed_cost = 0.0;
  std::vector<std::string> mismatches;

  bool ok() const { return mismatches.empty(); }
};

// Re-realizes every logged move, recharges it and re-derives the judgements;
// any divergence from the log is reported.
ReplayReport replay_transcript(std::istream& in);
ReplayReport replay_transcript(const std::filesystem::path& path);

}  // namespace gwl
