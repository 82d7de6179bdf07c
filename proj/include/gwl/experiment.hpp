// Evaluation protocol: random 500/100 folds, learning steps of 10 dialogues,
// accuracy and cumulative-cost curves, and the overall performance ratio.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwl/dataset.hpp"
#include "gwl/dialogue.hpp"
#include "gwl/learner.hpp"

namespace gwl {
class TranscriptWriter;
}

namespace gwl::experiment {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  int folds = 20;
  int train = 500;
  int test = 100;
  int step = 10;
  std::uint64_t master_seed = 2016;
  SgdParams sgd{};
  dialogue::CostTable costs{};
  int jobs = 1;
};

void validate(const ExperimentConfig& config, std::size_t dataset_size);

// Binary decision accuracy over every (test instance, attribute) pair:
// the decision is prob >= 0.5, compared with ground-truth membership.
// Missing classifiers predict 0.5 and so decide "positive".
inline constexpr const char* kAccuracyDefinition =
    "mean over test instances and all 9 attributes of [prob >= 0.5] == [attribute is true]; "
    "step 0 is the untrained registry";

double accuracy(const ClassifierRegistry& reg, std::span<const vision::FeatureVector> features,
                std::span<const vision::ObjectSpec> truth);

struct CurvePoint {
  int step = 0;
  int instances = 0;
  double accuracy = 0.0;
  double cum_cost = 0.0;
  double positive_threshold = 0.0;
};

struct PerformanceCurve {
  // Accuracy of the untrained registry; the baseline for the accuracy gain.
  double initial_accuracy = 0.0;
  // One point per learning step.
  std::vector<CurvePoint> points;

  double final_accuracy() const;
  double delta_accuracy() const { return final_accuracy() - initial_accuracy; }
  double total_cost() const;
  // Accuracy at the last point whose cumulative cost is <= `cost`.
  double accuracy_at_cost(double cost) const;
};

// R_perf = accuracy gain / total tutor cost. Throws on zero cost.
double overall_performance(const PerformanceCurve& curve);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

FoldSplit make_split(std::size_t dataset_size, int train, int test, std::uint64_t seed);

// Evaluation folds and adaptive-training episodes use disjoint seed streams.
std::uint64_t fold_seed(std::uint64_t master, int fold);
std::uint64_t episode_seed(std::uint64_t master, int episode);

struct StepOutcome {
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double cost_delta = 0.0;
  int instances_seen = 0;
};

// One fold, advanced a learning step at a time so the positive threshold can
// be changed between steps.
class FoldRunner {
 public:
  FoldRunner(const Dataset& data, const ExperimentConfig& config, dialogue::PolicySettings settings,
             std::uint64_t seed);

  bool done() const { return seen_ >= static_cast<int>(split_.train.size()); }
  int instances_seen() const { return seen_; }
  double positive_threshold() const { return settings_.bands.positive; }
  void set_positive_threshold(double t);

  StepOutcome run_step();

  const PerformanceCurve& curve() const { return curve_; }
  const ClassifierRegistry& registry() const { return registry_; }
  const FoldSplit& split() const { return split_; }
  double ledger_total() const { return ledger_.cumulative; }
  // Sum of per-dialogue cost deltas; equals ledger_total() by construction.
  double dialogue_cost_sum() const { return dialogue_cost_sum_; }
  std::size_t dialogues_run() const { return dialogues_; }
  std::size_t tutor_silent_dialogues() const { return silent_; }

  void attach_transcript(TranscriptWriter* writer) { transcript_ = writer; }

 private:
  double evaluate() const;

  const Dataset& data_;
  ExperimentConfig config_;
  dialogue::PolicySettings settings_;
  FoldSplit split_;
  std::vector<vision::FeatureVector> test_features_;
  std::vector<vision::ObjectSpec> test_truth_;
  ClassifierRegistry registry_;
  dialogue::CostLedger ledger_;
  PerformanceCurve curve_;
  int seen_ = 0;
  int step_index_ = 0;
  double dialogue_cost_sum_ = 0.0;
  std::size_t dialogues_ = 0;
  std::size_t silent_ = 0;
  TranscriptWriter* transcript_ = nullptr;
};

PerformanceCurve run_fold(const Dataset& data, const ExperimentConfig& config,
                          const dialogue::PolicySettings& settings, std::uint64_t seed,
                          TranscriptWriter* transcript = nullptr);

struct ConditionResult {
  std::string name;
  dialogue::PolicySettings settings;
  std::vector<PerformanceCurve> folds;
};

std::vector<ConditionResult> run_conditions(const Dataset& data, const ExperimentConfig& config,
                                            const std::vector<dialogue::PolicySettings>& conditions);

struct SummaryRow {
  std::string condition;
  double mean_final_acc = 0, sd_final_acc = 0;
  double mean_cost = 0, sd_cost = 0;
  double mean_rperf = 0, sd_rperf = 0;
};

SummaryRow summarize(const ConditionResult& r);

// Mean curve across folds (same step grid in every fold).
PerformanceCurve mean_curve(const ConditionResult& r);

void write_curves_csv(const std::filesystem::path& path, const std::vector<ConditionResult>& results);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

// Per-fold R_perf values of the 8 factorial cells, in the order expected by
// stats::factorial_effects.
std::vector<std::vector<double>> factorial_cells(const std::vector<ConditionResult>& results);

}  // namespace gwl::experiment
