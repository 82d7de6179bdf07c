// gwl: dataset generation, dictionary build, factorial and adaptive
// experiments, plots, the tutoring server and transcript replay.
//
// Every option can also come from a config file (--config run.ini), one
// "key = value" per line; subcommand options go under a [subcommand]
// section. Flags on the command line win over the file.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <pthread.h>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "gwl/adaptive.hpp"
#include "gwl/dataset.hpp"
#include "gwl/experiment.hpp"
#include "gwl/http_server.hpp"
#include "gwl/image_io.hpp"
#include "gwl/plots.hpp"
#include "gwl/service.hpp"
#include "gwl/stats.hpp"
#include "gwl/transcript.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gwl;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  std::string dir;
  std::string dict;
  std::uint64_t seed = DatasetConfig{}.seed;
  int count = DatasetConfig{}.count;
};

struct CostOptions {
  dialogue::CostTable table{};
};

struct Common {
  int jobs = 1;
  DataOptions data;
  SgdParams sgd{};
  CostOptions costs;
  double base_threshold = 0.5;
  double positive_threshold = 0.9;
};

void add_data_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--data", c.data.dir, "dataset directory from gen-data (default: synthesize in memory)");
  cmd->add_option("--dict", c.data.dict, "visual dictionary JSON (default: <data>/dictionary.json or build)");
  cmd->add_option("--data-seed", c.data.seed, "seed of the in-memory dataset");
  cmd->add_option("--count", c.data.count, "objects in the in-memory dataset");
}

void add_learning_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--eta0", c.sgd.eta0, "SGD initial step size");
  cmd->add_option("--l2", c.sgd.l2, "L2 regularization strength");
  cmd->add_option("--base-threshold", c.base_threshold);
  cmd->add_option("--positive-threshold", c.positive_threshold);
  cmd->add_option("--cost-inform", c.costs.table.inform);
  cmd->add_option("--cost-acknowledge", c.costs.table.acknowledge);
  cmd->add_option("--cost-correct", c.costs.table.correct);
  cmd->add_option("--cost-parse-word", c.costs.table.parse_per_word);
  cmd->add_option("--cost-produce-word", c.costs.table.produce_per_word);
}

json cost_json(const dialogue::CostTable& t) {
  return {{"inform", t.inform},
          {"acknowledge", t.acknowledge},
          {"correct", t.correct},
          {"parse_per_word", t.parse_per_word},
          {"produce_per_word", t.produce_per_word}};
}

json metric_definitions() {
  return {{"accuracy", experiment::kAccuracyDefinition},
          {"cum_cost", "sum of tutor costs: act cost + 1.0/word produced by the tutor, 0.5/word parsed from the learner"},
          {"r_perf", "(final accuracy - step-0 accuracy) / total tutor cost, per fold"}};
}

// Run manifest: effective options (flags merged with the config file), seeds
// and metric definitions. No timestamps, so equal runs give equal manifests.
void write_manifest(const fs::path& dir, const CLI::App& cmd, json extra) {
  fs::create_directories(dir);
  json m;
  m["command"] = cmd.get_name();
  m["options"] = json::object();
  for (const auto* opt : cmd.get_options()) {
    if (opt->get_name() == "--help" || opt->get_lnames().empty()) continue;
    const auto& key = opt->get_lnames().front();
    const auto results = opt->results();
    if (!results.empty()) {
      m["options"][key] = results.size() == 1 ? json(results.front()) : json(results);
    } else if (!opt->get_default_str().empty()) {
      m["options"][key] = opt->get_default_str();
    }
  }
  m["metrics"] = metric_definitions();
  m.update(extra);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

Dataset load_or_build(const Common& c) {
  if (c.data.dir.empty()) {
    DatasetConfig dc;
    dc.seed = c.data.seed;
    dc.count = c.data.count;
    dc.jobs = c.jobs;
    std::cerr << "synthesizing " << dc.count << " objects (seed " << dc.seed << ")\n";
    return build_dataset(dc);
  }
  const fs::path dir = c.data.dir;
  fs::path dict_path = c.data.dict.empty() ? dir / "dictionary.json" : fs::path(c.data.dict);
  vision::VisualDictionary dict;
  if (fs::exists(dict_path)) {
    dict = vision::VisualDictionary::load(dict_path);
  } else if (c.data.dict.empty()) {
    std::cerr << "no dictionary in " << dir << ", building the default one\n";
    DatasetConfig dc;
    dc.jobs = c.jobs;
    dict = build_seed_dictionary(dc);
  } else {
    throw ValidationError("dictionary " + dict_path.string() + " does not exist");
  }
  return load_dataset(dir, std::move(dict), c.jobs);
}

dialogue::PolicySettings with_bands(dialogue::PolicySettings s, const Common& c) {
  s.bands = ConfidenceBands(c.base_threshold, c.positive_threshold);
  return s;
}

bool is_all(const std::vector<std::string>& names) { return names.size() == 1 && names[0] == "all"; }

std::vector<dialogue::PolicySettings> parse_conditions(const std::vector<std::string>& names, const Common& c) {
  std::vector<dialogue::PolicySettings> out;
  if (is_all(names)) {
    for (const auto& s : dialogue::factorial_conditions()) out.push_back(with_bands(s, c));
    return out;
  }
  for (const auto& item : names) {
    auto s = dialogue::parse_condition(item);
    if (!s) throw ValidationError("unknown condition '" + item + "' (expected e.g. L+UC+CD)");
    out.push_back(with_bands(*s, c));
  }
  if (out.empty()) throw ValidationError("no conditions given");
  return out;
}

experiment::ExperimentConfig experiment_config(int folds, int train, int test, int step, std::uint64_t seed,
                                               const Common& c) {
  experiment::ExperimentConfig ec;
  ec.folds = folds;
  ec.train = train;
  ec.test = test;
  ec.step = step;
  ec.master_seed = seed;
  ec.sgd = c.sgd;
  ec.costs = c.costs.table;
  ec.jobs = c.jobs;
  return ec;
}

json effects_json(const std::vector<stats::EffectTest>& effects) {
  json out = json::array();
  for (const auto& e : effects) {
    out.push_back({{"effect", e.effect}, {"F", e.f}, {"p", e.p}, {"degenerate", e.degenerate}});
  }
  return out;
}

void print_summary(const std::vector<experiment::SummaryRow>& rows) {
  std::printf("%-20s %9s %9s %10s %12s\n", "condition", "final_acc", "sd", "cost", "r_perf");
  for (const auto& r : rows) {
    std::printf("%-20s %9.4f %9.4f %10.2f %12.4e\n", r.condition.c_str(), r.mean_final_acc, r.sd_final_acc,
                r.mean_cost, r.mean_rperf);
  }
}

std::pair<double, double> parse_schedule(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ValidationError("epsilon schedule must be START:END");
  try {
    const double a = std::stod(s.substr(0, colon)), b = std::stod(s.substr(colon + 1));
    if (a < 0 || a > 1 || b < 0 || b > 1) throw ValidationError("epsilon values must lie in [0, 1]");
    return {a, b};
  } catch (const std::logic_error&) {
    throw ValidationError("bad epsilon schedule '" + s + "'");
  }
}

struct SarsaOptions {
  adaptive::SarsaParams params{};
  std::string schedule = "0.3:0.05";
  std::string qtable;
};

void add_sarsa_options(CLI::App* cmd, SarsaOptions& o) {
  cmd->add_option("--episodes", o.params.episodes, "SARSA training episodes")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", o.params.alpha)->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--gamma", o.params.gamma)->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--epsilon-schedule", o.schedule, "linear exploration anneal START:END");
  cmd->add_option("--sarsa-seed", o.params.seed);
  cmd->add_option("--initial-threshold", o.params.initial_threshold);
  cmd->add_option("--qtable", o.qtable, "use a trained Q-table instead of training");
}

adaptive::QTable train_or_load(const SarsaOptions& o, const Dataset& data, const experiment::ExperimentConfig& ec,
                               const fs::path& out_dir) {
  if (!o.qtable.empty()) return adaptive::QTable::load(o.qtable);
  auto params = o.params;
  std::tie(params.epsilon_start, params.epsilon_end) = parse_schedule(o.schedule);
  std::cerr << "training SARSA for " << params.episodes << " episodes\n";
  auto trained = adaptive::sarsa_train(adaptive::fold_environments(data, ec, adaptive::adaptive_base_settings()),
                                       params);
  trained.q.save(out_dir / "qtable.json");
  std::ofstream trace(out_dir / "sarsa_trace.csv");
  adaptive::write_trace_csv(trace, trained.trace);
  return trained.q;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grounded word learning through dialogue"};
  app.set_config("--config", "", "key = value config file; flags override it");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;
  app.add_option("--jobs,-j", common.jobs, "worker threads")->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render the synthetic object dataset");
  std::string gen_out = "data";
  std::uint64_t gen_seed = DatasetConfig{}.seed;
  int gen_count = DatasetConfig{}.count;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--count", gen_count)->check(CLI::PositiveNumber);

  // build-dict
  auto* dict_cmd = app.add_subcommand("build-dict", "k-means visual dictionary over seed images");
  std::string seed_images;
  std::string dict_out = "dictionary.json";
  vision::KMeansOptions km;
  km.seed = DatasetConfig{}.dictionary_seed;
  dict_cmd->add_option("--seed-images", seed_images,
                       "dataset directory of seed images (default: reserved seed-set renders)");
  dict_cmd->add_option("--k", km.k)->check(CLI::PositiveNumber);
  dict_cmd->add_option("--seed", km.seed);
  dict_cmd->add_option("--iterations", km.max_iterations)->check(CLI::PositiveNumber);
  dict_cmd->add_option("--out", dict_out);

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "factorial learning-curve experiment");
  std::vector<std::string> conditions{"all"};
  std::string exp_out = "runs/experiment";
  int folds = 20, train = 500, test = 100, step = 10;
  std::uint64_t master_seed = experiment::ExperimentConfig{}.master_seed;
  int permutations = 10000;
  std::uint64_t perm_seed = 1;
  bool with_adaptive = false;
  int transcript_fold = -1;
  SarsaOptions exp_sarsa;
  exp_cmd->add_option("--conditions", conditions, "all, or a comma list such as L+UC+CD,T-UC-CD")->delimiter(',');
  exp_cmd->add_option("--folds", folds)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--train", train)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--test", test)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--step", step)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--seed", master_seed, "master seed of the fold splits");
  exp_cmd->add_option("--out-dir", exp_out);
  exp_cmd->add_option("--permutations", permutations)->check(CLI::PositiveNumber);
  exp_cmd->add_option("--permutation-seed", perm_seed);
  exp_cmd->add_flag("--adaptive", with_adaptive, "also train and evaluate the adaptive-threshold condition");
  exp_cmd->add_option("--transcript-fold", transcript_fold, "log this fold's dialogues for every condition");
  add_data_options(exp_cmd, common);
  add_learning_options(exp_cmd, common);
  add_sarsa_options(exp_cmd, exp_sarsa);

  // adaptive
  auto* ada_cmd = app.add_subcommand("adaptive", "train the SARSA threshold policy and compare with the constant one");
  std::string ada_out = "runs/adaptive";
  SarsaOptions ada_sarsa;
  ada_cmd->add_option("--folds", folds)->check(CLI::PositiveNumber);
  ada_cmd->add_option("--train", train)->check(CLI::PositiveNumber);
  ada_cmd->add_option("--test", test)->check(CLI::PositiveNumber);
  ada_cmd->add_option("--step", step)->check(CLI::PositiveNumber);
  ada_cmd->add_option("--seed", master_seed);
  ada_cmd->add_option("--out-dir", ada_out);
  add_sarsa_options(ada_cmd, ada_sarsa);
  add_data_options(ada_cmd, common);
  add_learning_options(ada_cmd, common);

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "SVG plots from a curves CSV");
  std::string curves_csv, out_svg = "curves.svg";
  plot_cmd->add_option("--curves-csv", curves_csv)->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out-svg", out_svg);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP tutoring service");
  std::string host = "127.0.0.1", model = "model.json", busy = "reject";
  int port = 8080;
  std::uint64_t order_seed = service::ServiceConfig{}.order_seed;
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--model", model, "classifier registry file for load/save");
  serve_cmd->add_option("--busy", busy, "reject or queue overlapping requests")
      ->check(CLI::IsMember({"reject", "queue"}));
  serve_cmd->add_option("--order-seed", order_seed, "seed of the default object order");
  add_data_options(serve_cmd, common);
  add_learning_options(serve_cmd, common);

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "re-derive costs and judgements from a transcript log");
  std::string transcript_path;
  replay_cmd->add_option("--transcript", transcript_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      DatasetConfig dc;
      dc.seed = gen_seed;
      dc.count = gen_count;
      dc.jobs = common.jobs;
      const auto specs = make_specs(dc.count, dc.seed, dc.jitter);
      const auto images = render_all(specs, dc.jobs);
      save_dataset_images(gen_out, specs, images);
      write_manifest(gen_out, *gen, {{"seeds", {{"dataset", gen_seed}}}, {"objects", specs.size()}});
      std::printf("wrote %zu objects to %s\n", specs.size(), gen_out.c_str());
    } else if (*dict_cmd) {
      vision::VisualDictionary dict;
      if (seed_images.empty()) {
        DatasetConfig dc;
        dc.dictionary_seed = km.seed;
        dc.kmeans_iterations = km.max_iterations;
        dc.jobs = common.jobs;
        const auto images = render_all(seed_set_specs(dc), dc.jobs);
        dict = vision::build_dictionary(images, km);
      } else {
        std::vector<vision::ObjectImage> images;
        for (const auto& m : load_manifest(seed_images)) {
          auto img = vision::read_png(fs::path(seed_images) / (m.id + ".png"));
          img.bbox = m.bbox;
          images.push_back(std::move(img));
        }
        dict = vision::build_dictionary(images, km);
      }
      const fs::path out = dict_out;
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      dict.save(out);
      write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."), *dict_cmd,
                     {{"seeds", {{"kmeans", km.seed}}}, {"centers", dict.size()}});
      std::printf("dictionary with %d centers written to %s\n", dict.size(), dict_out.c_str());
    } else if (*exp_cmd) {
      const auto conds = parse_conditions(conditions, common);
      const auto ec = experiment_config(folds, train, test, step, master_seed, common);
      const auto data = load_or_build(common);
      experiment::validate(ec, data.size());
      const fs::path out = exp_out;
      fs::create_directories(out);

      auto results = experiment::run_conditions(data, ec, conds);
      json extra{{"seeds", {{"master", master_seed}, {"dataset", common.data.seed}, {"permutation", perm_seed}}},
                 {"costs", cost_json(ec.costs)}};
      if (with_adaptive) {
        const auto q = train_or_load(exp_sarsa, data, ec, out);
        results.push_back(adaptive::run_adaptive_condition(data, ec, q, exp_sarsa.params.initial_threshold));
        extra["seeds"]["sarsa"] = exp_sarsa.params.seed;
      }
      if (transcript_fold >= 0) {
        if (transcript_fold >= folds) throw ValidationError("--transcript-fold beyond --folds");
        fs::create_directories(out / "transcripts");
        for (const auto& s : conds) {
          std::ofstream log(out / "transcripts" /
                            (dialogue::condition_name(s) + "_fold" + std::to_string(transcript_fold) + ".jsonl"));
          TranscriptWriter writer(log, s, ec.costs);
          experiment::run_fold(data, ec, s, experiment::fold_seed(master_seed, transcript_fold), &writer);
        }
      }

      std::vector<experiment::SummaryRow> rows;
      for (const auto& r : results) rows.push_back(experiment::summarize(r));
      experiment::write_curves_csv(out / "curves.csv", results);
      experiment::write_summary_csv(out / "summary.csv", rows);
      plots::write_svg(out / "curves.svg", plots::standard_panels(plots::mean_curves(plots::read_curves_csv(out / "curves.csv"))));
      print_summary(rows);

      if (is_all(conditions)) {
        const auto effects = stats::main_effects(experiment::factorial_cells(results), permutations, perm_seed);
        std::ofstream(out / "effects.json") << json{{"response", "per-fold r_perf"},
                                                     {"permutations", permutations},
                                                     {"effects", effects_json(effects)}}
                                                   .dump(2)
                                            << '\n';
        for (const auto& e : effects) std::printf("%-28s F=%10.3f p=%.4f\n", e.effect.c_str(), e.f, e.p);
      }
      write_manifest(out, *exp_cmd, extra);
    } else if (*ada_cmd) {
      const auto ec = experiment_config(folds, train, test, step, master_seed, common);
      const auto data = load_or_build(common);
      experiment::validate(ec, data.size());
      const fs::path out = ada_out;
      fs::create_directories(out);
      const auto q = train_or_load(ada_sarsa, data, ec, out);
      auto base = with_bands(adaptive::adaptive_base_settings(), common);
      std::vector<experiment::ConditionResult> results =
          experiment::run_conditions(data, ec, {base});
      results.push_back(adaptive::run_adaptive_condition(data, ec, q, ada_sarsa.params.initial_threshold, base));
      std::vector<experiment::SummaryRow> rows;
      for (const auto& r : results) rows.push_back(experiment::summarize(r));
      experiment::write_curves_csv(out / "curves.csv", results);
      experiment::write_summary_csv(out / "summary.csv", rows);
      plots::write_svg(out / "curves.svg", plots::standard_panels(plots::mean_curves(plots::read_curves_csv(out / "curves.csv"))));
      print_summary(rows);
      write_manifest(out, *ada_cmd,
                     {{"seeds", {{"master", master_seed}, {"dataset", common.data.seed}, {"sarsa", ada_sarsa.params.seed}}},
                      {"costs", cost_json(ec.costs)}});
    } else if (*plot_cmd) {
      const auto rows = plots::read_curves_csv(curves_csv);
      plots::write_svg(out_svg, plots::standard_panels(plots::mean_curves(rows)));
      std::printf("wrote %s\n", out_svg.c_str());
    } else if (*serve_cmd) {
      const auto data = load_or_build(common);
      service::ServiceConfig sc;
      sc.sgd = common.sgd;
      sc.costs = common.costs.table;
      sc.model_path = model;
      sc.busy = busy == "queue" ? service::BusyPolicy::Queue : service::BusyPolicy::Reject;
      sc.order_seed = order_seed;
      service::TutorService svc(data, sc);
      service::HttpServer server(svc);
      const int bound = server.bind(host, port);
      std::printf("listening on http://%s:%d\n", host.c_str(), bound);
      std::fflush(stdout);
      // Signals are blocked in every thread; one waiter turns them into stop().
      sigset_t sigs;
      sigemptyset(&sigs);
      sigaddset(&sigs, SIGINT);
      sigaddset(&sigs, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
      std::thread waiter([&] {
        int sig = 0;
        sigwait(&sigs, &sig);
        server.stop();
      });
      server.serve();
      // Served out without a signal: release the waiter (stop() is idempotent).
      pthread_kill(waiter.native_handle(), SIGTERM);
      waiter.join();
    } else if (*replay_cmd) {
      const auto report = replay_transcript(fs::path(transcript_path));
      std::printf("dialogues %d, turns %d, logged cost %.6f, replayed cost %.6f\n", report.dialogues, report.turns,
                  report.logged_cost, report.replayed_cost);
      for (const auto& m : report.mismatches) std::printf("mismatch: %s\n", m.c_str());
      if (!report.ok()) return kExitRuntime;
      std::printf("parity OK\n");
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const experiment::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
