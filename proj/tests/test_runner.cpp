#include "doctest.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "decsim/config.hpp"
#include "decsim/errors.hpp"
#include "decsim/rng.hpp"
#include "decsim/runner.hpp"

using namespace decsim;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(
[topology]
nodes = 12
m = 2
seed = 5

[data]
source = synthetic
dim = 16
train_per_class = 200
test_per_class = 20
separation = 3.0

[scenario]
case = case1
threshold = 0.3

[model]
hidden = 8

[training]
rounds = 6
learning_rate = 0.05
)";

ExperimentConfig tiny() {
  std::istringstream in(kTiny);
  return parse_config(in);
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string csv_of(const RunRecord& rec) {
  std::ostringstream out;
  write_run_csv_header(out);
  write_run_csv(out, {rec.run_id, rec.seed, std::string(to_string(rec.config.data_case)),
                      rec.config.threshold},
                rec.frame);
  return out.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("decsim-runner-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

bool node_alive_at(const RunRecord& rec, NodeId v, int round) {
  const auto& d = rec.plan.disrupted;
  if (std::find(d.begin(), d.end(), v) == d.end()) return true;
  return !rec.plan.triggered_round || round <= *rec.plan.triggered_round;
}

}  // namespace

TEST_CASE("config rejects unknown sections, keys and bad values") {
  CHECK_NOTHROW(tiny());
  CHECK_THROWS_AS(parse("[topology]\nnodez = 12\n"), ConfigError);
  CHECK_THROWS_AS(parse("[topolgy]\nnodes = 12\n"), ConfigError);
  CHECK_THROWS_AS(parse("[topology]\nnodes = twelve\n"), ConfigError);
  CHECK_THROWS_AS(parse("[scenario]\ncase = case4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[scenario]\nthreshold = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[training]\nmomentum = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/decsim.ini"), ConfigError);
}

TEST_CASE("config hash ignores key order, comments and output settings") {
  const auto a = parse("[topology]\nnodes = 12\nm = 2\n[training]\nrounds = 6\n");
  const auto b = parse("# same thing\n[training]\nrounds=6\n\n[topology]\nm = 2 ; two\nnodes = 12\n"
                       "[run]\noutput = elsewhere\nthreads = 4\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  const auto c = parse("[topology]\nnodes = 13\nm = 2\n[training]\nrounds = 6\n");
  CHECK(a.hash() != c.hash());
  CHECK(a.canonical() == b.canonical());
}

TEST_CASE("threshold text and run ids") {
  auto cfg = tiny();
  CHECK(cfg.run_id() == "case1_thr-0.3");
  cfg = parse("[scenario]\nthreshold = none\n");
  CHECK_FALSE(cfg.threshold.has_value());
  CHECK(cfg.run_id() == "case1_thr-none");
  cfg = parse("[scenario]\ncase = case3\nl2_per_class = 30\nthreshold = 0\n");
  CHECK(cfg.run_id() == "case3_l2-30_thr-0");
}

TEST_CASE("shipped presets parse") {
  const fs::path dir = fs::path(DECSIM_SOURCE_DIR) / "configs";
  for (const auto* name : {"desk.ini", "full.ini"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_config(dir / name));
  }
  const auto desk = load_config(dir / "desk.ini");
  CHECK(desk.topology.n == 30);
  CHECK(desk.seeds.size() == 3);
}

TEST_CASE("sweep expansion") {
  auto cfg = tiny();
  cfg.sweep.cases = {DataCase::case1, DataCase::case2};
  cfg.sweep.thresholds = {std::nullopt, 0.0, 0.7};
  auto cfgs = expand_sweep(cfg);
  CHECK(cfgs.size() == 6);

  cfg.sweep.cases.push_back(DataCase::case3);
  cfg.sweep.l2_per_class = {10, 30};
  cfg.sweep.case3_thresholds = {0.0, 0.9};
  cfgs = expand_sweep(cfg);
  REQUIRE(cfgs.size() == 6 + 4);
  std::set<std::string> ids;
  for (const auto& c : cfgs) {
    ids.insert(c.run_id());
    CHECK(c.sweep.cases.empty());
  }
  CHECK(ids.size() == cfgs.size());
  CHECK(ids.count("case3_l2-30_thr-0.9") == 1);

  auto single = tiny();
  CHECK(expand_sweep(single).size() == 1);
}

TEST_CASE("runs are deterministic and independent of the thread count") {
  auto cfg = tiny();
  const auto a = run_experiment(cfg, 3);
  const auto b = run_experiment(cfg, 3);
  cfg.threads = 4;
  const auto c = run_experiment(cfg, 3);
  CHECK(csv_of(a) == csv_of(b));
  CHECK(csv_of(a) == csv_of(c));
  const auto d = run_experiment(tiny(), 4);
  CHECK(csv_of(a) != csv_of(d));
}

TEST_CASE("an isolated survivor is plain local SGD") {
  // Disruption at round 0: a survivor whose neighbours were all removed never
  // aggregates with anyone.
  auto cfg = tiny();
  cfg.threshold = 0.0;
  cfg.topology = {30, 2, 9};
  const auto data = load_data(cfg.data);
  const auto rec = run_experiment(cfg, 7, data);
  REQUIRE(rec.plan.triggered_round == 0);
  const auto lone = rec.frame.cluster_members(1);
  REQUIRE_FALSE(lone.empty());

  const ModelSpec spec{data.train.dim(), cfg.hidden_sizes, data.train.num_classes()};
  for (NodeId v : lone) {
    auto model = init_model(spec, derive_seed(7, "init"));
    for (int t = 1; t <= cfg.rounds; ++t) {
      model = local_train(model, data.train, rec.assignment.indices[v], cfg.train,
                          derive_seed(7, "shuffle", static_cast<std::uint64_t>(v),
                                      static_cast<std::uint64_t>(t)))
                  .state;
      std::fill(model.momentum.begin(), model.momentum.end(), 0.0);
      CHECK(rec.frame.at(v, t) == evaluate(model, data.test));
    }
  }

  // Removed nodes never train, aggregate or get evaluated.
  for (const auto& e : rec.events) {
    if (e.round == 0 || e.node < 0) continue;
    CHECK(std::find(rec.plan.disrupted.begin(), rec.plan.disrupted.end(), e.node) ==
          rec.plan.disrupted.end());
  }
}

TEST_CASE("round log is causal") {
  auto cfg = tiny();
  cfg.threshold = 0.3;
  cfg.rounds = 8;
  const auto rec = run_experiment(cfg, 2);
  REQUIRE(rec.plan.triggered_round.has_value());
  REQUIRE(*rec.plan.triggered_round > 0);
  const auto g = generate_ba(cfg.topology);

  std::map<int, std::vector<const RoundEvent*>> by_round;
  for (const auto& e : rec.events) by_round[e.round].push_back(&e);
  CHECK(by_round.rbegin()->first == cfg.rounds);

  for (const auto& [t, events] : by_round) {
    std::set<NodeId> trained, aggregated;
    bool evaluated = false;
    for (const auto* e : events) {
      if (e->node >= 0) CHECK(node_alive_at(rec, e->node, t));
      switch (e->kind) {
        case RoundEvent::Kind::train:
        case RoundEvent::Kind::skip:
          CHECK_FALSE(evaluated);
          CHECK(aggregated.empty());
          CHECK(trained.insert(e->node).second);
          break;
        case RoundEvent::Kind::aggregate: {
          CHECK_FALSE(evaluated);
          CHECK(aggregated.insert(e->node).second);
          std::vector<NodeId> expected{e->node};
          for (NodeId u : g.neighbours(e->node)) {
            if (node_alive_at(rec, u, t)) expected.push_back(u);
          }
          std::sort(expected.begin(), expected.end());
          CHECK(e->inputs == expected);
          for (NodeId u : e->inputs) CHECK(trained.count(u) == 1);
          break;
        }
        case RoundEvent::Kind::evaluate:
          evaluated = true;
          break;
        case RoundEvent::Kind::trigger:
          CHECK(t == *rec.plan.triggered_round);
          CHECK(evaluated);
          break;
        case RoundEvent::Kind::disrupt:
          CHECK(t == *rec.plan.triggered_round);
          break;
      }
    }
    if (t > 0) CHECK(trained == aggregated);
  }
}

TEST_CASE("a run matches the baseline until its disruption fires") {
  auto cfg = tiny();
  cfg.rounds = 8;
  cfg.threshold = 0.3;
  const auto late = run_experiment(cfg, 2);
  cfg.threshold.reset();
  const auto base = run_experiment(cfg, 2);
  REQUIRE(late.plan.triggered_round.has_value());
  CHECK_FALSE(base.plan.triggered());
  CHECK(base.frame.survivor == late.frame.survivor);
  CHECK(base.frame.cluster_size == late.frame.cluster_size);

  const int fired = *late.plan.triggered_round;
  for (std::size_t r = 0; r < base.frame.rounds.size(); ++r) {
    const int round = base.frame.rounds[r];
    if (round <= fired) {
      CHECK(base.frame.accuracy[r] == late.frame.accuracy[r]);
    } else {
      for (NodeId v : late.plan.disrupted) CHECK(std::isnan(late.frame.accuracy[r][v]));
    }
  }
  CHECK_FALSE(base.frame.disruption_round.has_value());
  CHECK(late.frame.disruption_round == fired);
}

TEST_CASE("evaluation stride keeps round 0 and the last round") {
  auto cfg = tiny();
  cfg.rounds = 7;
  cfg.eval_stride = 3;
  cfg.threshold.reset();
  const auto rec = run_experiment(cfg, 1);
  CHECK(rec.frame.rounds == std::vector<int>{0, 3, 6, 7});
}

TEST_CASE("a failing data source fails only its own runs") {
  auto cfg = tiny();
  cfg.sweep.cases = {DataCase::case1, DataCase::case2};
  cfg.sweep.thresholds = {std::nullopt, 0.0, 0.3};
  auto cfgs = expand_sweep(cfg);
  REQUIRE(cfgs.size() == 6);
  cfgs[5].data.kind = DataSource::Kind::idx;
  cfgs[5].data.train_images = "/nonexistent/train-images";
  cfgs[5].data.train_labels = "/nonexistent/train-labels";
  cfgs[5].data.test_images = "/nonexistent/test-images";
  cfgs[5].data.test_labels = "/nonexistent/test-labels";

  const auto result = run_sweep(cfgs, 2);
  CHECK(result.records.size() == 5);
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].run_id == cfgs[5].run_id());
  for (std::size_t k = 0; k < 5; ++k) CHECK(result.records[k].run_id == cfgs[k].run_id());

  // Too little data for the partition is a per-run failure as well.
  auto starved = tiny();
  starved.data.synthetic.per_class = 20;
  std::vector<ExperimentConfig> one{starved};
  const auto r = run_sweep(one);
  CHECK(r.records.empty());
  CHECK(r.failures.size() == 1);
}

TEST_CASE("sweep output files") {
  TempDir tmp;
  auto cfg = tiny();
  cfg.seeds = {1, 2};
  cfg.sweep.thresholds = {std::nullopt, 0.3};
  const auto cfgs = expand_sweep(cfg);
  const auto result = run_sweep(cfgs);
  write_sweep_outputs(tmp.path, result, cfg, 1.5);

  CHECK(first_line(tmp.path / "runs" / "case1_thr-0.3_s2.csv") ==
        "run_id,seed,case,threshold,round,node_id,cluster_size,accuracy,component_id");
  CHECK(fs::exists(tmp.path / "runs" / "case1_thr-none_s1_disruption.json"));
  CHECK(first_line(tmp.path / "aggregate.csv") ==
        "run_id,round_after_disruption,metric_name,value,ci95,count");
  CHECK(fs::exists(tmp.path / "graph.txt"));

  const auto m = nlohmann::json::parse(read_file(tmp.path / "manifest.json"));
  CHECK(m["config_hash"] == cfg.hash());
  CHECK(m["runs"].size() == 4);
  CHECK(m["failures"].empty());
  CHECK(m["wall_seconds"] == 1.5);
  CHECK_FALSE(m["version"].get<std::string>().empty());
  CHECK(m["config"]["topology.nodes"] == "12");

  const auto d = nlohmann::json::parse(read_file(tmp.path / "runs" / "case1_thr-0.3_s1_disruption.json"));
  CHECK(d["threshold"] == 0.3);
  CHECK(d["triggered_round"].is_number());
}

TEST_CASE("percolation report") {
  auto cfg = tiny();
  cfg.topology = {100, 2, 3};
  cfg.percolation_step = 0.05;
  const auto r = percolation_report(cfg);
  for (const auto& [kind, curve] : r.curves) {
    CHECK(curve.front().phi == 1.0);
    CHECK(curve.size() == 21);
  }
  for (const auto& [kind, p] : r.at_fraction) {
    std::size_t total = 0;
    for (auto s : p.component_sizes) total += s;
    CHECK(total == 90);
  }

  TempDir tmp;
  write_percolation_report(tmp.path, r, cfg);
  CHECK(first_line(tmp.path / "percolation_phi.csv") ==
        "removed_fraction,phi_degree,phi_betweenness,phi_structural_hole");
  CHECK(first_line(tmp.path / "component_histogram.csv") ==
        "centrality,removed_fraction,component_size,count");
  CHECK(first_line(tmp.path / "centrality_nodes.csv") ==
        "node_id,degree,betweenness,structural_hole");

  std::ifstream hist(tmp.path / "component_histogram.csv");
  std::string line;
  std::getline(hist, line);
  std::map<std::string, std::size_t> nodes;
  while (std::getline(hist, line)) {
    std::istringstream row(line);
    std::string kind, frac, size, count;
    std::getline(row, kind, ',');
    std::getline(row, frac, ',');
    std::getline(row, size, ',');
    std::getline(row, count, ',');
    nodes[kind] += std::stoul(size) * std::stoul(count);
  }
  CHECK(nodes.size() == 3);
  for (const auto& [kind, total] : nodes) CHECK(total == 90);
}

TEST_CASE("output directory precedence") {
  auto cfg = tiny();
  cfg.output_dir = "from-config";
  ::unsetenv("DECSIM_OUTPUT_DIR");
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("from-config"));
  ::setenv("DECSIM_OUTPUT_DIR", "from-env", 1);
  CHECK(resolve_output_dir(cfg, std::nullopt) == fs::path("from-env"));
  CHECK(resolve_output_dir(cfg, fs::path("from-flag")) == fs::path("from-flag"));
  ::unsetenv("DECSIM_OUTPUT_DIR");
}

TEST_CASE("command line exit codes") {
  TempDir tmp;
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(tmp.path / name) << text;
    return (tmp.path / name).string();
  };
  const auto good = write("good.ini", kTiny);
  auto edited = [](std::string text, const std::string& from, const std::string& to) {
    return text.replace(text.find(from), from.size(), to);
  };
  const auto typo = write("typo.ini", edited(kTiny, "hidden = 8", "hiden = 8"));
  const auto idx = write("idx.ini", edited(kTiny, "source = synthetic",
                                           "source = idx\ntrain_images = missing-a\n"
                                           "train_labels = missing-b\ntest_images = missing-c\n"
                                           "test_labels = missing-d"));
  const std::string cli = DECSIM_CLI_PATH;
  const std::string quiet = " > /dev/null 2>&1";
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + quiet).c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const auto out = (tmp.path / "out").string();

  CHECK(run("--version") == 0);
  CHECK(run("simulate --config " + good + " --out " + out) == 0);
  CHECK(fs::exists(tmp.path / "out" / "manifest.json"));
  CHECK(run("baseline --config " + good + " --seed 4 --out " + out) == 0);
  CHECK(fs::exists(tmp.path / "out" / "runs" / "case1_thr-none_s4.csv"));
  CHECK(run("percolation --config " + good + " --out " + out) == 0);
  CHECK(fs::exists(tmp.path / "out" / "percolation_phi.csv"));
  CHECK(run("simulate --config " + typo) == 1);
  CHECK(run("simulate --config " + (tmp.path / "absent.ini").string()) == 1);
  CHECK(run("simulate") == 1);
  CHECK(run("frobnicate --config " + good) == 1);
  CHECK(run("simulate --config " + idx + " --out " + out) == 2);
}
