#include "gwl/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include <json.hpp>

#include "gwl/parallel.hpp"

namespace gwl::adaptive {

std::string_view name(Action a) {
  switch (a) {
    case Action::Increase: return "increase";
    case Action::Decrease: return "decrease";
    case Action::Keep: return "keep";
  }
  return "?";
}

double threshold_of(int level) {
  if (level < 0 || level >= kLevels) throw std::out_of_range("threshold level out of range");
  // Rounded so grid values print and compare cleanly.
  return std::round((kMinThreshold + kThresholdStep * level) * 100.0) / 100.0;
}

int level_of(double threshold) {
  const double l = (threshold - kMinThreshold) / kThresholdStep;
  const int level = static_cast<int>(std::lround(l));
  if (level < 0 || level >= kLevels || std::abs(l - level) > 1e-6) {
    throw std::invalid_argument("threshold " + std::to_string(threshold) + " is not on the 0.55..0.95 grid");
  }
  return level;
}

int bucket_for(int instances_seen) {
  return std::clamp(instances_seen / kBucketWidth, 0, kBuckets - 1);
}

ThresholdState apply_action(ThresholdState s, Action a) {
  if (a == Action::Increase) s.level = std::min(s.level + 1, kLevels - 1);
  if (a == Action::Decrease) s.level = std::max(s.level - 1, 0);
  return s;
}

double step_reward(double acc_before, double acc_after, double cost_delta) {
  return (acc_after - acc_before) / std::max(cost_delta, kRewardEpsilon);
}

namespace {

std::size_t slot(const ThresholdState& s, Action a) {
  if (s.bucket < 0 || s.bucket >= kBuckets || s.level < 0 || s.level >= kLevels) {
    throw std::out_of_range("threshold state out of range");
  }
  return (static_cast<std::size_t>(s.bucket) * kLevels + s.level) * kActions.size() + static_cast<std::size_t>(a);
}

}  // namespace

QTable::QTable() : values_(static_cast<std::size_t>(kBuckets) * kLevels * kActions.size(), 0.0) {}

double QTable::get(const ThresholdState& s, Action a) const { return values_[slot(s, a)]; }

void QTable::set(const ThresholdState& s, Action a, double v) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite Q value");
  values_[slot(s, a)] = v;
}

Action QTable::greedy(const ThresholdState& s) const {
  Action best = Action::Keep;
  for (Action a : {Action::Decrease, Action::Increase}) {
    if (get(s, a) > get(s, best)) best = a;
  }
  return best;
}

void QTable::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "gwl-qtable";
  j["version"] = 1;
  j["buckets"] = kBuckets;
  j["levels"] = kLevels;
  j["actions"] = {"increase", "decrease", "keep"};
  j["values"] = values_;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

QTable QTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "gwl-qtable" || j.value("version", 0) != 1) {
    throw std::runtime_error(path.string() + " is not a version 1 Q-table");
  }
  if (j.at("buckets").get<int>() != kBuckets || j.at("levels").get<int>() != kLevels) {
    throw std::runtime_error("Q-table shape mismatch");
  }
  QTable q;
  auto v = j.at("values").get<std::vector<double>>();
  if (v.size() != q.values_.size()) throw std::runtime_error("Q-table size mismatch");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::runtime_error("non-finite Q value in " + path.string());
  }
  q.values_ = std::move(v);
  return q;
}

double epsilon_at(const SarsaParams& p, int episode) {
  if (p.episodes <= 1) return p.epsilon_end;
  const double f = std::clamp(static_cast<double>(episode) / (p.episodes - 1), 0.0, 1.0);
  return p.epsilon_start + (p.epsilon_end - p.epsilon_start) * f;
}

double sarsa_update(QTable& q, const ThresholdState& s, Action a, double r, const ThresholdState& s2, Action a2,
                    double alpha, double gamma) {
  const double v = q.get(s, a) + alpha * (r + gamma * q.get(s2, a2) - q.get(s, a));
  q.set(s, a, v);
  return v;
}

FoldEnvironment::FoldEnvironment(const Dataset& data, const experiment::ExperimentConfig& config,
                                 const dialogue::PolicySettings& settings, std::uint64_t seed)
    : runner_(data, config, settings, seed) {}

double FoldEnvironment::step() {
  const auto out = runner_.run_step();
  return step_reward(out.accuracy_before, out.accuracy_after, out.cost_delta);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "episode,step,bucket,state_threshold,action,reward,threshold\n";
  for (const auto& r : rows) {
    out << r.episode << ',' << r.step << ',' << r.state.bucket << ',' << r.state.threshold() << ','
        << name(r.action) << ',' << r.reward << ',' << r.threshold << '\n';
  }
}

TrainingResult sarsa_train(const EnvironmentFactory& make_env, const SarsaParams& p) {
  if (p.alpha <= 0.0 || p.alpha > 1.0 || p.gamma < 0.0 || p.gamma >= 1.0) {
    throw std::invalid_argument("SARSA needs 0 < alpha <= 1 and 0 <= gamma < 1");
  }
  if (p.episodes < 1) throw std::invalid_argument("episodes must be positive");
  const int start_level = level_of(p.initial_threshold);
  TrainingResult out;
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kActions.size()) - 1);
  for (int ep = 0; ep < p.episodes; ++ep) {
    const double eps = epsilon_at(p, ep);
    auto choose = [&](const ThresholdState& s) {
      // Both draws are always taken so the stream does not depend on Q.
      const double u = unit(rng);
      const Action random = kActions[pick(rng)];
      return u < eps ? random : out.q.greedy(s);
    };
    auto env = make_env(ep);
    ThresholdState s{bucket_for(env->instances_seen()), start_level};
    Action a = choose(s);
    for (int step = 0; !env->done(); ++step) {
      const ThresholdState applied = apply_action(s, a);
      env->set_threshold(applied.threshold());
      const double r = env->step();
      out.trace.push_back({ep, step, s, a, r, applied.threshold()});
      if (env->done()) {
        out.q.set(s, a, out.q.get(s, a) + p.alpha * (r - out.q.get(s, a)));
        break;
      }
      const ThresholdState s2{bucket_for(env->instances_seen()), applied.level};
      const Action a2 = choose(s2);
      sarsa_update(out.q, s, a, r, s2, a2, p.alpha, p.gamma);
      s = s2;
      a = a2;
    }
  }
  return out;
}

EnvironmentFactory fold_environments(const Dataset& data, const experiment::ExperimentConfig& config,
                                     const dialogue::PolicySettings& settings) {
  return [&data, config, settings](int episode) -> std::unique_ptr<Environment> {
    return std::make_unique<FoldEnvironment>(data, config, settings,
                                             experiment::episode_seed(config.master_seed, episode));
  };
}

dialogue::PolicySettings adaptive_base_settings() {
  dialogue::PolicySettings s;
  s.initiative = dialogue::Initiative::Learner;
  s.uncertainty = true;
  s.context_dependency = true;
  return s;
}

experiment::ConditionResult run_adaptive_condition(const Dataset& data, const experiment::ExperimentConfig& config,
                                                   const QTable& q, double initial_threshold,
                                                   const dialogue::PolicySettings& settings) {
  experiment::validate(config, data.size());
  const int start_level = level_of(initial_threshold);
  experiment::ConditionResult out;
  out.name = kAdaptiveName;
  out.settings = settings;
  out.settings.bands = ConfidenceBands(settings.bands.base, threshold_of(start_level));
  out.folds.resize(config.folds);
  parallel_for(static_cast<std::size_t>(config.folds), config.jobs, [&](std::size_t f) {
    experiment::FoldRunner runner(data, config, out.settings,
                                  experiment::fold_seed(config.master_seed, static_cast<int>(f)));
    ThresholdState s{0, start_level};
    while (!runner.done()) {
      s.bucket = bucket_for(runner.instances_seen());
      s = apply_action(s, q.greedy(s));
      runner.set_positive_threshold(s.threshold());
      runner.run_step();
    }
    out.folds[f] = runner.curve();
  });
  return out;
}

}  // namespace gwl::adaptive
