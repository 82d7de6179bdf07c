#include "gwl/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "gwl/parallel.hpp"
#include "gwl/stats.hpp"
#include "gwl/transcript.hpp"

namespace gwl::experiment {

void validate(const ExperimentConfig& c, std::size_t dataset_size) {
  if (c.folds < 1) throw ConfigError("folds must be positive");
  if (c.train < 1 || c.test < 1) throw ConfigError("train and test sizes must be positive");
  if (static_cast<std::size_t>(c.train + c.test) > dataset_size) {
    throw ConfigError("train + test (" + std::to_string(c.train + c.test) + ") exceeds the dataset size (" +
                      std::to_string(dataset_size) + ")");
  }
  if (c.step < 1 || c.train % c.step != 0) throw ConfigError("step must divide the training set size");
  if (c.sgd.eta0 <= 0.0 || c.sgd.l2 < 0.0) throw ConfigError("bad SGD parameters");
}

double accuracy(const ClassifierRegistry& reg, std::span<const vision::FeatureVector> features,
                std::span<const vision::ObjectSpec> truth) {
  if (features.empty()) throw std::invalid_argument("empty test set");
  if (features.size() != truth.size()) throw std::invalid_argument("features and labels differ in length");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (auto a : kAllAttributes) {
      const bool decided = reg.prob(a, features[i]) >= 0.5;
      const bool actual = a == truth[i].color || a == truth[i].shape;
      correct += decided == actual;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(features.size() * kAllAttributes.size());
}

double PerformanceCurve::final_accuracy() const {
  return points.empty() ? initial_accuracy : points.back().accuracy;
}

double PerformanceCurve::total_cost() const { return points.empty() ? 0.0 : points.back().cum_cost; }

double PerformanceCurve::accuracy_at_cost(double cost) const {
  double acc = initial_accuracy;
  for (const auto& p : points) {
    if (p.cum_cost > cost) break;
    acc = p.accuracy;
  }
  return acc;
}

double overall_performance(const PerformanceCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("curve has no learning steps");
  const double cost = curve.total_cost();
  if (cost <= 0.0) throw std::domain_error("overall performance is undefined at zero tutor cost");
  return curve.delta_accuracy() / cost;
}

FoldSplit make_split(std::size_t n, int train, int test, std::uint64_t seed) {
  if (static_cast<std::size_t>(train + test) > n) throw ConfigError("split larger than dataset");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  FoldSplit s;
  s.train.assign(idx.begin(), idx.begin() + train);
  s.test.assign(idx.begin() + train, idx.begin() + train + test);
  return s;
}

std::uint64_t fold_seed(std::uint64_t master, int fold) { return derive_seed(master, 11, fold); }
std::uint64_t episode_seed(std::uint64_t master, int episode) { return derive_seed(master, 12, episode); }

FoldRunner::FoldRunner(const Dataset& data, const ExperimentConfig& config, dialogue::PolicySettings settings,
                       std::uint64_t seed)
    : data_(data), config_(config), settings_(settings) {
  validate(config_, data_.size());
  split_ = make_split(data_.size(), config_.train, config_.test, seed);
  for (auto i : split_.test) {
    test_features_.push_back(data_.features[i]);
    test_truth_.push_back(data_.specs[i]);
  }
  ledger_.table = config_.costs;
  curve_.initial_accuracy = evaluate();
}

void FoldRunner::set_positive_threshold(double t) {
  settings_.bands = ConfidenceBands(settings_.bands.base, t);
}

double FoldRunner::evaluate() const { return accuracy(registry_, test_features_, test_truth_); }

StepOutcome FoldRunner::run_step() {
  if (done()) throw std::logic_error("fold already finished");
  StepOutcome out;
  out.accuracy_before = curve_.final_accuracy();
  const double cost_before = ledger_.cumulative;
  const int end = std::min(seen_ + config_.step, static_cast<int>(split_.train.size()));
  for (; seen_ < end; ++seen_) {
    const std::size_t idx = split_.train[seen_];
    const double ledger_before = ledger_.cumulative;
    auto result = dialogue::run_dialogue(object_id(idx), data_.features[idx], data_.specs[idx], registry_,
                                         settings_, ledger_);
    for (const auto& j : result.judgements) registry_.train(j, config_.sgd);
    dialogue_cost_sum_ += result.cost_delta;
    ++dialogues_;
    const bool tutor_spoke = std::any_of(result.state.transcript.begin(), result.state.transcript.end(),
                                         [](const auto& u) { return u.move.speaker == dialogue::Speaker::Tutor; });
    if (!tutor_spoke) ++silent_;
    if (transcript_) transcript_->write(result, ledger_before);
  }
  ++step_index_;
  CurvePoint p;
  p.step = step_index_;
  p.instances = seen_;
  p.accuracy = evaluate();
  p.cum_cost = ledger_.cumulative;
  p.positive_threshold = settings_.bands.positive;
  curve_.points.push_back(p);
  out.accuracy_after = p.accuracy;
  out.cost_delta = ledger_.cumulative - cost_before;
  out.instances_seen = seen_;
  return out;
}

PerformanceCurve run_fold(const Dataset& data, const ExperimentConfig& config,
                          const dialogue::PolicySettings& settings, std::uint64_t seed, TranscriptWriter* transcript) {
  FoldRunner runner(data, config, settings, seed);
  runner.attach_transcript(transcript);
  while (!runner.done()) runner.run_step();
  return runner.curve();
}

std::vector<ConditionResult> run_conditions(const Dataset& data, const ExperimentConfig& config,
                                            const std::vector<dialogue::PolicySettings>& conditions) {
  validate(config, data.size());
  std::vector<ConditionResult> out(conditions.size());
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    out[c].name = dialogue::condition_name(conditions[c]);
    out[c].settings = conditions[c];
    out[c].folds.resize(config.folds);
  }
  const std::size_t folds = static_cast<std::size_t>(config.folds);
  parallel_for(conditions.size() * folds, config.jobs, [&](std::size_t k) {
    const std::size_t c = k / folds;
    const int f = static_cast<int>(k % folds);
    out[c].folds[f] = run_fold(data, config, conditions[c], fold_seed(config.master_seed, f));
  });
  return out;
}

SummaryRow summarize(const ConditionResult& r) {
  std::vector<double> acc, cost, rperf;
  for (const auto& c : r.folds) {
    acc.push_back(c.final_accuracy());
    cost.push_back(c.total_cost());
    rperf.push_back(overall_performance(c));
  }
  return {r.name,          stats::mean(acc),   stats::stddev(acc),   stats::mean(cost),
          stats::stddev(cost), stats::mean(rperf), stats::stddev(rperf)};
}

PerformanceCurve mean_curve(const ConditionResult& r) {
  PerformanceCurve m;
  if (r.folds.empty()) return m;
  const double n = static_cast<double>(r.folds.size());
  m.points = r.folds.front().points;
  for (auto& p : m.points) p.accuracy = p.cum_cost = p.positive_threshold = 0.0;
  for (const auto& c : r.folds) {
    if (c.points.size() != m.points.size()) throw std::invalid_argument("folds have different step grids");
    m.initial_accuracy += c.initial_accuracy / n;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      m.points[i].accuracy += c.points[i].accuracy / n;
      m.points[i].cum_cost += c.points[i].cum_cost / n;
      m.points[i].positive_threshold += c.points[i].positive_threshold / n;
    }
  }
  return m;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_curves_csv(const std::filesystem::path& path, const std::vector<ConditionResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# accuracy: " << kAccuracyDefinition << "\n";
  out << "condition,fold,step,instances,accuracy,cum_cost,positive_threshold\n";
  for (const auto& r : results) {
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
      const auto& c = r.folds[f];
      out << r.name << ',' << f << ",0,0," << fmt(c.initial_accuracy) << ",0,"
          << fmt(r.settings.bands.positive) << '\n';
      for (const auto& p : c.points) {
        out << r.name << ',' << f << ',' << p.step << ',' << p.instances << ',' << fmt(p.accuracy) << ','
            << fmt(p.cum_cost) << ',' << fmt(p.positive_threshold) << '\n';
      }
    }
  }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# accuracy: " << kAccuracyDefinition << "; rperf = (final - step-0 accuracy) / total tutor cost\n";
  out << "condition,mean_final_acc,sd_final_acc,mean_cost,sd_cost,mean_rperf,sd_rperf\n";
  for (const auto& r : rows) {
    out << r.condition << ',' << fmt(r.mean_final_acc) << ',' << fmt(r.sd_final_acc) << ',' << fmt(r.mean_cost)
        << ',' << fmt(r.sd_cost) << ',' << fmt(r.mean_rperf) << ',' << fmt(r.sd_rperf) << '\n';
  }
}

std::vector<std::vector<double>> factorial_cells(const std::vector<ConditionResult>& results) {
  std::vector<std::vector<double>> cells(8);
  std::vector<bool> filled(8, false);
  for (const auto& r : results) {
    if (r.name.find("Adaptive") != std::string::npos) continue;
    unsigned cell = 0;
    if (r.settings.initiative == dialogue::Initiative::Learner) cell |= stats::kInitiativeBit;
    if (r.settings.uncertainty) cell |= stats::kUncertaintyBit;
    if (r.settings.context_dependency) cell |= stats::kContextBit;
    if (filled[cell]) continue;
    filled[cell] = true;
    for (const auto& c : r.folds) cells[cell].push_back(overall_performance(c));
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
    throw std::invalid_argument("results do not cover all 8 factorial conditions");
  }
  return cells;
}

}  // namespace gwl::experiment
