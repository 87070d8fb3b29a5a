#include "decsim/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "decsim/errors.hpp"
#include "decsim/learner.hpp"
#include "decsim/rng.hpp"
#include "decsim/text.hpp"

#ifndef DECSIM_VERSION
#define DECSIM_VERSION "0.1.0"
#endif

namespace decsim {

std::string_view version_string() { return DECSIM_VERSION; }

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

DataBundle load_data(const DataSource& source) {
  DataBundle b;
  if (source.kind == DataSource::Kind::synthetic) {
    b.train = synthetic_dataset(source.synthetic, 0);
    SyntheticSpec test_spec = source.synthetic;
    test_spec.per_class = source.synthetic_test_per_class;
    b.test = synthetic_dataset(test_spec, 1);
  } else {
    b.train = load_idx_dataset(source.train_images, source.train_labels);
    b.test = load_idx_dataset(source.test_images, source.test_labels);
  }
  if (source.train_fraction < 1.0) {
    b.train = subsample_per_class(b.train, source.train_fraction, source.synthetic.seed);
  }
  return b;
}

namespace {

NodeAssignment distribute(const ExperimentConfig& cfg, const DataBundle& data,
                          const DisruptionPlan& plan, std::uint64_t seed) {
  const auto n = cfg.topology.n;
  const auto survivors = plan.survivors(n);
  const auto partition_seed = derive_seed(seed, "partition");
  switch (cfg.data_case) {
    case DataCase::case1:
      return partition_case1(data.train, n, survivors, partition_seed, cfg.case1_per_class);
    case DataCase::case2:
      return partition_case2(data.train, n, partition_seed, cfg.case2_per_class);
    case DataCase::case3:
      return partition_case3(data.train,
                             cfg.label_split.value_or(LabelSplit::halves(data.train.num_classes())),
                             plan.disrupted, survivors, cfg.case3_survivor_l2_per_class,
                             partition_seed);
  }
  throw ParameterError("unknown data case");
}

double survivors_mean(const MetricsFrame& frame, std::size_t row) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < frame.node_count; ++v) {
    if (frame.survivor[v]) {
      sum += frame.accuracy[row][v];
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg_in, std::uint64_t seed,
                         const DataBundle& data) {
  const auto started = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  cfg.seeds = {seed};
  cfg.sweep = {};
  cfg.validate();

  RunRecord rec;
  rec.run_id = cfg.run_id();
  rec.seed = seed;
  rec.config_hash = cfg.hash();

  const auto n = cfg.topology.n;
  const Graph graph = generate_ba(cfg.topology);
  rec.plan = select_disrupted(graph, cfg.centrality, cfg.disrupted_fraction, cfg.threshold);
  rec.network = disrupted_network(graph, rec.plan);
  rec.assignment = distribute(cfg, data, rec.plan, seed);

  const ModelSpec spec{data.train.dim(), cfg.hidden_sizes, data.train.num_classes()};
  std::vector<ModelState> models(n, init_model(spec, derive_seed(seed, "init")));
  std::vector<bool> alive(n, true);

  auto& frame = rec.frame;
  frame.node_count = n;
  frame.survivor = rec.network.alive;
  frame.cluster_size = rec.network.component_size;
  frame.component_id = rec.network.component_id;

  auto log = [&rec](int round, RoundEvent::Kind kind, NodeId node,
                    std::vector<NodeId> inputs = {}) {
    rec.events.push_back({round, kind, node, std::move(inputs)});
  };

  auto record_row = [&](int round, std::vector<double> row) {
    frame.rounds.push_back(round);
    frame.accuracy.push_back(std::move(row));
    for (std::size_t v = 0; v < n; ++v) {
      if (alive[v]) log(round, RoundEvent::Kind::evaluate, static_cast<NodeId>(v));
    }
    if (rec.plan.triggered() || !rec.plan.threshold) return;
    if (check_trigger(rec.plan, survivors_mean(frame, frame.rounds.size() - 1), round)) {
      log(round, RoundEvent::Kind::trigger, -1);
      for (NodeId v : rec.plan.disrupted) {
        alive[v] = false;
        log(round, RoundEvent::Kind::disrupt, v);
      }
    }
  };

  // Round 0: every node holds the same initial model.
  {
    const double a0 = evaluate(models.front(), data.test);
    record_row(0, std::vector<double>(n, a0));
  }

  const auto nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ModelState> trained(n);
  std::vector<TrainStatus> status(n, TrainStatus::skipped);
  for (int t = 1; t <= cfg.rounds; ++t) {
    parallel_for(n, cfg.threads, [&](std::size_t v) {
      if (!alive[v]) return;
      auto res = local_train(models[v], data.train, rec.assignment.indices[v], cfg.train,
                             derive_seed(seed, "shuffle", v, static_cast<std::uint64_t>(t)));
      trained[v] = std::move(res.state);
      status[v] = res.status;
    });
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      log(t, status[v] == TrainStatus::trained ? RoundEvent::Kind::train : RoundEvent::Kind::skip,
          static_cast<NodeId>(v));
    }

    // Aggregation reads only `trained`, so every node sees the same snapshot.
    std::vector<std::vector<NodeId>> contributors(n);
    parallel_for(n, cfg.threads, [&](std::size_t v) {
      if (!alive[v]) return;
      std::vector<AggregationEntry> entries;
      const auto self = static_cast<NodeId>(v);
      entries.push_back({self, &trained[v], rec.assignment.size_of(self)});
      for (NodeId u : graph.neighbours(self)) {
        if (alive[u]) entries.push_back({u, &trained[u], rec.assignment.size_of(u)});
      }
      for (const auto& e : entries) contributors[v].push_back(e.node);
      std::sort(contributors[v].begin(), contributors[v].end());
      models[v] = decavg_aggregate(entries);
    });
    for (std::size_t v = 0; v < n; ++v) {
      if (alive[v]) {
        log(t, RoundEvent::Kind::aggregate, static_cast<NodeId>(v), std::move(contributors[v]));
      }
    }

    if (t % cfg.eval_stride == 0 || t == cfg.rounds) {
      std::vector<double> row(n, nan);
      parallel_for(n, cfg.threads, [&](std::size_t v) {
        if (alive[v]) row[v] = evaluate(models[v], data.test);
      });
      record_row(t, std::move(row));
    }
  }

  frame.disruption_round = rec.plan.triggered_round;
  rec.config = std::move(cfg);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

RunRecord run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  return run_experiment(cfg, seed, load_data(cfg.data));
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
  const auto cases =
      cfg.sweep.cases.empty() ? std::vector<DataCase>{cfg.data_case} : cfg.sweep.cases;
  const auto thresholds = cfg.sweep.thresholds.empty()
                              ? std::vector<std::optional<double>>{cfg.threshold}
                              : cfg.sweep.thresholds;
  const auto l2 = cfg.sweep.l2_per_class.empty()
                      ? std::vector<std::size_t>{cfg.case3_survivor_l2_per_class}
                      : cfg.sweep.l2_per_class;
  std::vector<ExperimentConfig> out;
  for (auto c : cases) {
    const bool c3 = c == DataCase::case3;
    const auto& thr_list =
        c3 && !cfg.sweep.case3_thresholds.empty() ? cfg.sweep.case3_thresholds : thresholds;
    const std::size_t l2_variants = c3 ? l2.size() : 1;
    for (std::size_t k = 0; k < l2_variants; ++k) {
      for (const auto& thr : thr_list) {
        ExperimentConfig one = cfg;
        one.sweep = {};
        one.data_case = c;
        one.threshold = thr;
        if (c == DataCase::case3) one.case3_survivor_l2_per_class = l2[k];
        out.push_back(std::move(one));
      }
    }
  }
  return out;
}

SweepResult run_sweep(std::span<const ExperimentConfig> cfgs, std::size_t threads) {
  struct Job {
    const ExperimentConfig* cfg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : cfgs) {
    for (auto s : c.seeds) jobs.push_back({&c, s});
  }

  // Each distinct data source is loaded once; a load failure fails only the
  // runs that need it.
  std::map<std::string, std::shared_ptr<const DataBundle>> bundles;
  std::map<std::string, std::string> load_errors;
  for (const auto& c : cfgs) {
    const auto key = c.data.key();
    if (bundles.contains(key) || load_errors.contains(key)) continue;
    try {
      bundles[key] = std::make_shared<const DataBundle>(load_data(c.data));
    } catch (const std::exception& e) {
      load_errors[key] = e.what();
    }
  }

  std::vector<std::optional<RunRecord>> records(jobs.size());
  std::vector<std::optional<RunFailure>> failures(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto key = job.cfg->data.key();
    try {
      if (auto err = load_errors.find(key); err != load_errors.end()) {
        throw DataError(err->second);
      }
      ExperimentConfig single = *job.cfg;
      single.threads = 1;
      records[i] = run_experiment(single, job.seed, *bundles.at(key));
    } catch (const std::exception& e) {
      failures[i] = RunFailure{job.cfg->run_id(), job.seed, e.what()};
    }
  });

  SweepResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (records[i]) result.records.push_back(std::move(*records[i]));
    if (failures[i]) result.failures.push_back(std::move(*failures[i]));
  }
  return result;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

nlohmann::ordered_json config_echo(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.canonical()) j[k] = v;
  return j;
}

}  // namespace

void write_sweep_outputs(const std::filesystem::path& dir, const SweepResult& result,
                         const ExperimentConfig& source_cfg, double wall_seconds) {
  std::filesystem::create_directories(dir / "runs");

  std::vector<std::string> group_order;
  std::map<std::string, std::vector<MetricsFrame>> groups;
  for (const auto& rec : result.records) {
    const auto stem = rec.run_id + "_s" + std::to_string(rec.seed);
    {
      auto out = open_out(dir / "runs" / (stem + ".csv"));
      write_run_csv_header(out);
      write_run_csv(out, RunLabel{rec.run_id, rec.seed, std::string(to_string(rec.config.data_case)),
                                  rec.config.threshold},
                    rec.frame);
    }
    {
      auto out = open_out(dir / "runs" / (stem + "_disruption.json"));
      write_disruption_json(out, rec.plan, rec.network);
    }
    if (!groups.contains(rec.run_id)) group_order.push_back(rec.run_id);
    groups[rec.run_id].push_back(rec.frame);
  }
  {
    auto out = open_out(dir / "aggregate.csv");
    write_aggregate_csv_header(out);
    for (const auto& id : group_order) write_aggregate_csv(out, id, groups[id]);
  }
  {
    auto out = open_out(dir / "graph.txt");
    write_edge_list(out, generate_ba(source_cfg.topology));
  }

  nlohmann::ordered_json m;
  m["version"] = std::string(version_string());
  m["config_hash"] = source_cfg.hash();
  m["config"] = config_echo(source_cfg);
  m["confidence_intervals"] = "normal approximation (1.96 * sd / sqrt(n)) across repetition seeds";
  m["wall_seconds"] = wall_seconds;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& rec : result.records) {
    nlohmann::ordered_json r;
    r["run_id"] = rec.run_id;
    r["seed"] = rec.seed;
    r["config_hash"] = rec.config_hash;
    r["triggered_round"] = rec.plan.triggered_round ? nlohmann::ordered_json(*rec.plan.triggered_round)
                                                    : nlohmann::ordered_json(nullptr);
    r["wall_seconds"] = rec.wall_seconds;
    runs.push_back(std::move(r));
  }
  m["runs"] = std::move(runs);
  auto fails = nlohmann::ordered_json::array();
  for (const auto& f : result.failures) {
    fails.push_back({{"run_id", f.run_id}, {"seed", f.seed}, {"error", f.message}});
  }
  m["failures"] = std::move(fails);
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

PercolationReport percolation_report(const ExperimentConfig& cfg) {
  PercolationReport r;
  r.graph = generate_ba(cfg.topology);
  const auto n = r.graph.node_count();
  const auto removed = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.disrupted_fraction * static_cast<double>(n))));
  for (auto kind : {CentralityKind::degree, CentralityKind::betweenness,
                    CentralityKind::structural_hole}) {
    r.centralities.emplace(kind, centrality(r.graph, kind));
    r.curves.emplace(kind, percolation_curve(r.graph, kind, cfg.percolation_step));
    const auto ranking = rank_nodes(r.centralities.at(kind));
    r.at_fraction.emplace(kind, percolation_point(r.graph, ranking, removed));
  }
  return r;
}

void write_percolation_report(const std::filesystem::path& dir, const PercolationReport& r,
                              const ExperimentConfig& cfg) {
  std::filesystem::create_directories(dir);
  constexpr std::array kinds{CentralityKind::degree, CentralityKind::betweenness,
                             CentralityKind::structural_hole};
  for (auto kind : kinds) {
    auto out = open_out(dir / ("percolation_" + std::string(to_string(kind)) + ".csv"));
    write_percolation_csv(out, r.curves.at(kind));
  }
  {
    auto out = open_out(dir / "percolation_phi.csv");
    out << "removed_fraction";
    for (auto kind : kinds) out << ",phi_" << to_string(kind);
    out << '\n';
    const auto& ref = r.curves.at(kinds[0]);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      out << format_real(ref[k].removed_fraction);
      for (auto kind : kinds) out << ',' << format_real(r.curves.at(kind)[k].phi);
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "component_histogram.csv");
    out << "centrality,removed_fraction,component_size,count\n";
    for (auto kind : kinds) {
      const auto& p = r.at_fraction.at(kind);
      std::map<std::size_t, std::size_t> hist;
      for (auto s : p.component_sizes) ++hist[s];
      for (auto [size, count] : hist) {
        out << to_string(kind) << ',' << format_real(p.removed_fraction) << ',' << size << ','
            << count << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "centrality_nodes.csv");
    out << "node_id,degree,betweenness,structural_hole\n";
    for (std::size_t v = 0; v < r.graph.node_count(); ++v) {
      out << v << ',' << r.graph.degree(static_cast<NodeId>(v)) << ','
          << format_real(r.centralities.at(CentralityKind::betweenness).score[v]) << ','
          << format_real(r.centralities.at(CentralityKind::structural_hole).score[v]) << '\n';
    }
  }
  {
    auto out = open_out(dir / "graph.txt");
    write_edge_list(out, r.graph);
  }
  nlohmann::ordered_json m;
  m["version"] = std::string(version_string());
  m["config_hash"] = cfg.hash();
  m["config"] = config_echo(cfg);
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DECSIM_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return cfg.output_dir;
}

}  // namespace decsim
