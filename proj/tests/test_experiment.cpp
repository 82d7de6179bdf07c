#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gwl/experiment.hpp"
#include "gwl/transcript.hpp"
#include "support.hpp"

using namespace gwl;
using namespace gwl::experiment;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.folds = 3;
  c.train = 60;
  c.test = 30;
  c.step = 10;
  return c;
}

const Dataset& toy() {
  static const Dataset d = testing_support::toy_dataset(120);
  return d;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_config();
  CHECK_NOTHROW(validate(c, 120));
  c.step = 7;
  CHECK_THROWS_AS(validate(c, 120), ConfigError);
  c = small_config();
  c.train = 100;
  CHECK_THROWS_AS(validate(c, 120), ConfigError);
}

TEST_CASE("accuracy metric") {
  const auto& d = toy();
  std::span<const vision::FeatureVector> f(d.features.data(), 18);
  std::span<const vision::ObjectSpec> t(d.specs.data(), 18);
  CHECK(accuracy(ClassifierRegistry{}, f, t) == doctest::Approx(2.0 / 9.0));

  // Oracle registry: large bias toward the truth of one fixed object does
  // not generalize, so build one from the features' structure instead.
  ClassifierRegistry oracle;
  for (auto a : kAllAttributes) {
    auto& c = oracle.ensure(a);
    c.bias = -20.0;
    const std::size_t idx = category_of(a) == Category::Colour ? index_of(a) * 17
                                                               : vision::kHsvBins + index_of(a) * 101;
    c.weights[idx] = 40.0;
  }
  CHECK(accuracy(oracle, f, t) == 1.0);
}

TEST_CASE("fold splits are disjoint and exhaustive") {
  const auto s = make_split(120, 60, 30, 9);
  std::set<std::size_t> train(s.train.begin(), s.train.end()), test(s.test.begin(), s.test.end());
  CHECK(train.size() == 60);
  CHECK(test.size() == 30);
  for (auto i : test) CHECK(train.count(i) == 0);
  const auto full = make_split(120, 100, 20, 9);
  std::set<std::size_t> all(full.train.begin(), full.train.end());
  all.insert(full.test.begin(), full.test.end());
  CHECK(all.size() == 120);
  CHECK(make_split(120, 60, 30, 9).train == s.train);
  CHECK(fold_seed(1, 0) != episode_seed(1, 0));
}

TEST_CASE("performance ratio") {
  PerformanceCurve c;
  c.initial_accuracy = 0.2;
  c.points = {{1, 10, 0.5, 400, 0.9}, {2, 20, 0.7, 1000, 0.9}};
  CHECK(overall_performance(c) == doctest::Approx(5.0e-4));
  CHECK(c.accuracy_at_cost(500) == 0.5);
  CHECK(c.accuracy_at_cost(1000) == 0.7);
  CHECK(c.accuracy_at_cost(100) == 0.2);
  PerformanceCurve flat;
  flat.initial_accuracy = 0.5;
  flat.points = {{1, 10, 0.5, 30, 0.9}};
  CHECK(overall_performance(flat) == 0.0);
  PerformanceCurve free;
  free.points = {{1, 10, 0.5, 0, 0.9}};
  CHECK_THROWS_AS(overall_performance(free), std::domain_error);
}

TEST_CASE("fold runs are deterministic and self-consistent") {
  const auto cfg = small_config();
  const auto s = *dialogue::parse_condition("T+UC+CD");
  const auto a = run_fold(toy(), cfg, s, 5);
  const auto b = run_fold(toy(), cfg, s, 5);
  REQUIRE(a.points.size() == 6);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].accuracy == b.points[i].accuracy);
    CHECK(a.points[i].cum_cost == b.points[i].cum_cost);
    CHECK(a.points[i].instances == static_cast<int>(10 * (i + 1)));
  }
  // Tutor initiative: every dialogue costs something.
  for (std::size_t i = 1; i < a.points.size(); ++i) CHECK(a.points[i].cum_cost > a.points[i - 1].cum_cost);
  CHECK(a.final_accuracy() > a.initial_accuracy);

  FoldRunner runner(toy(), cfg, s, 5);
  while (!runner.done()) runner.run_step();
  CHECK(runner.ledger_total() == runner.dialogue_cost_sum());
  CHECK(runner.dialogues_run() == 60);
}

TEST_CASE("condition runs do not depend on the job count") {
  auto cfg = small_config();
  const auto conds = dialogue::factorial_conditions();
  cfg.jobs = 1;
  const auto one = run_conditions(toy(), cfg, conds);
  cfg.jobs = 4;
  const auto four = run_conditions(toy(), cfg, conds);
  REQUIRE(one.size() == 8);
  for (std::size_t c = 0; c < 8; ++c) {
    for (std::size_t f = 0; f < one[c].folds.size(); ++f) {
      CHECK(one[c].folds[f].points.back().accuracy == four[c].folds[f].points.back().accuracy);
      CHECK(one[c].folds[f].total_cost() == four[c].folds[f].total_cost());
    }
  }
  const auto cells = factorial_cells(one);
  CHECK(cells.size() == 8);
  for (const auto& c : cells) CHECK(c.size() == 3);
  CHECK_THROWS_AS(factorial_cells({one[0]}), std::invalid_argument);

  const auto row = summarize(one[0]);
  CHECK(row.condition == "L+UC+CD");
  CHECK(mean_curve(one[0]).points.size() == 6);
}

TEST_CASE("csv output") {
  const auto cfg = small_config();
  const auto res = run_conditions(toy(), cfg, {*dialogue::parse_condition("L+UC+CD")});
  const auto dir = std::filesystem::temp_directory_path() / "gwl_test_csv";
  std::filesystem::create_directories(dir);
  write_curves_csv(dir / "curves.csv", res);
  write_summary_csv(dir / "summary.csv", {summarize(res[0])});
  std::ifstream in(dir / "curves.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# accuracy:", 0) == 0);
  std::getline(in, line);
  CHECK(line == "condition,fold,step,instances,accuracy,cum_cost,positive_threshold");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3 * 7);
  std::ifstream sin(dir / "summary.csv");
  std::getline(sin, line);
  CHECK(line.rfind("# accuracy:", 0) == 0);
  std::getline(sin, line);
  CHECK(line == "condition,mean_final_acc,sd_final_acc,mean_cost,sd_cost,mean_rperf,sd_rperf");
  std::filesystem::remove_all(dir);
}

TEST_CASE("transcript replay matches live accounting") {
  const auto cfg = small_config();
  for (const auto& s : dialogue::factorial_conditions()) {
    std::stringstream log;
    TranscriptWriter writer(log, s, cfg.costs);
    FoldRunner runner(toy(), cfg, s, 3);
    runner.attach_transcript(&writer);
    while (!runner.done()) runner.run_step();
    const auto report = replay_transcript(log);
    CHECK(report.ok());
    CHECK(report.dialogues == 60);
    CHECK(report.logged_cost == runner.ledger_total());
    CHECK(report.replayed_cost == runner.ledger_total());
  }

  std::stringstream tampered;
  {
    std::stringstream log;
    const auto s = *dialogue::parse_condition("T+UC+CD");
    TranscriptWriter writer(log, s, cfg.costs);
    run_fold(toy(), cfg, s, 3, &writer);
    std::string text = log.str();
    const auto pos = text.find("\"cum_cost\":");
    text.insert(pos + 11, "1");
    tampered.str(text);
  }
  CHECK_FALSE(replay_transcript(tampered).ok());
}
