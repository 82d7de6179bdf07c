// Tabular SARSA over (instances bucket, positive threshold) that moves the
// positive confidence threshold by one grid step per learning step.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gwl/experiment.hpp"

namespace gwl::adaptive {

inline constexpr int kBuckets = 10;
inline constexpr int kBucketWidth = 50;
inline constexpr int kLevels = 9;
inline constexpr double kMinThreshold = 0.55;
inline constexpr double kThresholdStep = 0.05;
inline constexpr double kRewardEpsilon = 0.01;

enum class Action { Increase, Decrease, Keep };
inline constexpr std::array<Action, 3> kActions{Action::Increase, Action::Decrease, Action::Keep};

std::string_view name(Action a);

double threshold_of(int level);
// Nearest grid level; throws std::invalid_argument off the grid range.
int level_of(double threshold);
int bucket_for(int instances_seen);

struct ThresholdState {
  int bucket = 0;
  int level = 7;  // 0.90

  double threshold() const { return threshold_of(level); }
  bool operator==(const ThresholdState&) const = default;
};

ThresholdState apply_action(ThresholdState s, Action a);

double step_reward(double acc_before, double acc_after, double cost_delta);

class QTable {
 public:
  QTable();

  double get(const ThresholdState& s, Action a) const;
  void set(const ThresholdState& s, Action a, double v);
  // Ties prefer Keep, then Decrease, then Increase.
  Action greedy(const ThresholdState& s) const;

  bool operator==(const QTable&) const = default;

  void save(const std::filesystem::path& path) const;
  static QTable load(const std::filesystem::path& path);

 private:
  std::vector<double> values_;
};

struct SarsaParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon_start = 0.3;
  double epsilon_end = 0.05;
  int episodes = 100;
  std::uint64_t seed = 4242;
  double initial_threshold = 0.9;
};

// Linear anneal from start to end over the episodes.
double epsilon_at(const SarsaParams& p, int episode);

// Q(s,a) += alpha (r + gamma Q(s',a') - Q(s,a)); returns the new value.
double sarsa_update(QTable& q, const ThresholdState& s, Action a, double r, const ThresholdState& s2, Action a2,
                    double alpha, double gamma);

// One episode of the environment the agent acts in.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual bool done() const = 0;
  virtual int instances_seen() const = 0;
  virtual void set_threshold(double t) = 0;
  // Runs one learning step and returns its reward.
  virtual double step() = 0;
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>(int episode)>;

// A FoldRunner under the positive threshold chosen by the agent.
class FoldEnvironment : public Environment {
 public:
  FoldEnvironment(const Dataset& data, const experiment::ExperimentConfig& config,
                  const dialogue::PolicySettings& settings, std::uint64_t seed);

  bool done() const override { return runner_.done(); }
  int instances_seen() const override { return runner_.instances_seen(); }
  void set_threshold(double t) override { runner_.set_positive_threshold(t); }
  double step() override;

  const experiment::FoldRunner& runner() const { return runner_; }

 private:
  experiment::FoldRunner runner_;
};

struct TraceRow {
  int episode = 0;
  int step = 0;
  ThresholdState state;
  Action action = Action::Keep;
  double reward = 0.0;
  double threshold = 0.0;  // threshold in force during the step
};

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

struct TrainingResult {
  QTable q;
  std::vector<TraceRow> trace;
};

TrainingResult sarsa_train(const EnvironmentFactory& make_env, const SarsaParams& params);

// Environment factory over training episodes (seed stream disjoint from the
// evaluation folds).
EnvironmentFactory fold_environments(const Dataset& data, const experiment::ExperimentConfig& config,
                                     const dialogue::PolicySettings& settings);

// The L,+UC,+CD settings the adaptive condition starts from.
dialogue::PolicySettings adaptive_base_settings();
inline constexpr const char* kAdaptiveName = "L+UC(Adaptive)+CD";

// Evaluation folds run with the frozen greedy policy.
experiment::ConditionResult run_adaptive_condition(const Dataset& data, const experiment::ExperimentConfig& config,
                                                   const QTable& q, double initial_threshold = 0.9,
                                                   const dialogue::PolicySettings& settings = adaptive_base_settings());

}  // namespace gwl::adaptive
