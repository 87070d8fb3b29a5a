// Acceptance run: property suite, percolation statistics on BA(100, 2) and
// the desk-scale learning scenarios. Prints one PASS/FAIL line per criterion
// and exits non-zero if any fails.
//
//   acceptance [--config FILE] [--seeds 1,2,3] [--only name,...]

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "decsim/config.hpp"
#include "decsim/learner.hpp"
#include "decsim/metrics.hpp"
#include "decsim/runner.hpp"
#include "decsim/topology.hpp"
#include "oracles.hpp"

using namespace decsim;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------- properties

std::string check_aggregation() {
  const ModelSpec spec{6, {5}, 3};
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> count(1, 8), size(0, 100);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = count(rng);
    std::vector<ModelState> models;
    for (std::size_t i = 0; i < k; ++i) models.push_back(init_model(spec, rng()));
    std::vector<AggregationEntry> in;
    for (std::size_t i = 0; i < k; ++i) in.push_back({static_cast<NodeId>(i), &models[i], size(rng)});
    const auto out = decavg_aggregate(in);
    for (std::size_t p = 0; p < out.params.size(); ++p) {
      double lo = models[0].params[p], hi = lo;
      for (const auto& m : models) {
        lo = std::min(lo, m.params[p]);
        hi = std::max(hi, m.params[p]);
      }
      if (out.params[p] < lo || out.params[p] > hi) return "aggregate outside the input hull";
    }
    std::shuffle(in.begin(), in.end(), rng);
    if (decavg_aggregate(in).params != out.params) return "aggregate depends on input order";
  }
  return {};
}

std::string check_betweenness() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> nodes(1, 8);
  std::uniform_real_distribution<double> density(0.1, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = oracle::random_graph(nodes(rng), density(rng), rng);
    const auto fast = centrality(g, CentralityKind::betweenness).score;
    const auto slow = oracle::brute_force_betweenness(g);
    for (std::size_t v = 0; v < fast.size(); ++v) {
      if (std::abs(fast[v] - slow[v]) > 1e-12) return "betweenness differs from brute force";
    }
  }
  return {};
}

Dataset random_inputs(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Dataset ds(dim, classes);
  std::vector<float> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = u(rng);
    ds.add(x, static_cast<ClassId>(i % classes));
  }
  return ds;
}

double worst_fd_error(const ModelState& s, const Dataset& ds, const std::vector<std::size_t>& probe) {
  std::vector<std::size_t> batch(ds.size());
  std::iota(batch.begin(), batch.end(), 0);
  const auto g = loss_and_gradient(s, ds, batch).gradient;
  double worst = 0.0;
  for (auto p : probe) {
    const double num = oracle::finite_difference(s, ds, batch, p, 1e-5);
    worst = std::max(worst, oracle::relative_error(g[p], num));
  }
  return worst;
}

double check_gradient() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  {
    const ModelSpec spec{5, {7, 4}, 3};
    auto s = init_model(spec, 1);
    std::vector<std::size_t> every(s.params.size());
    std::iota(every.begin(), every.end(), 0);
    worst = std::max(worst, worst_fd_error(s, random_inputs(4, 5, 3, 2), every));
  }
  {
    const ModelSpec spec{784, {512, 256, 128}, 10};
    auto s = init_model(spec, 3);
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    std::vector<std::size_t> probe;
    for (const auto& l : layer_layout(spec)) {
      for (std::size_t k = 0; k < l.out; ++k) s.params[l.bias_offset + k] = small(rng);
      std::uniform_int_distribution<std::size_t> w(0, l.in * l.out - 1), b(0, l.out - 1);
      for (int k = 0; k < 10; ++k) probe.push_back(l.weight_offset + w(rng));
      for (int k = 0; k < 3; ++k) probe.push_back(l.bias_offset + b(rng));
    }
    worst = std::max(worst, worst_fd_error(s, random_inputs(2, 784, 10, 4), probe));
  }
  return worst;
}

std::string check_phi_monotone() {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = generate_ba({100, 2, seed});
    for (auto kind : {CentralityKind::degree, CentralityKind::betweenness,
                      CentralityKind::structural_hole}) {
      const auto curve = percolation_curve(g, kind, 0.01);
      if (curve.front().phi != 1.0) return "phi(0) != 1";
      for (std::size_t k = 1; k < curve.size(); ++k) {
        if (curve[k].phi > curve[k - 1].phi) return "phi increases on seed " + std::to_string(seed);
      }
    }
  }
  return {};
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.topology = {12, 2, 5};
  cfg.rounds = 6;
  cfg.hidden_sizes = {8};
  cfg.threshold = 0.3;
  cfg.data.synthetic = {10, 16, 100, 3.0, 2};
  cfg.data.synthetic_test_per_class = 20;
  return cfg;
}

std::string run_csv(const RunRecord& rec) {
  std::ostringstream out;
  write_run_csv_header(out);
  write_run_csv(out, {rec.run_id, rec.seed, std::string(to_string(rec.config.data_case)),
                      rec.config.threshold},
                rec.frame);
  return out.str();
}

std::string check_determinism_and_partition() {
  auto cfg = tiny_config();
  const auto a = run_experiment(cfg, 4);
  const auto b = run_experiment(cfg, 4);
  cfg.threads = 3;
  const auto c = run_experiment(cfg, 4);
  if (run_csv(a) != run_csv(b)) return "repeat run CSV differs";
  if (run_csv(a) != run_csv(c)) return "threaded run CSV differs";

  for (int round : a.frame.rounds) {
    double weighted = 0.0;
    for (auto size : a.frame.cluster_sizes()) {
      weighted += cluster_mean_accuracy(a.frame, size, round) *
                  static_cast<double>(a.frame.cluster_members(size).size());
    }
    weighted /= static_cast<double>(a.frame.survivors().size());
    if (std::abs(weighted - mean_accuracy(a.frame, round)) > 1e-12) {
      return "partition identity broken at round " + std::to_string(round);
    }
  }
  return {};
}

void property_suite() {
  const auto t0 = Clock::now();
  std::vector<std::string> problems;
  auto note = [&](const std::string& what, const std::string& err) {
    if (!err.empty()) problems.push_back(what + ": " + err);
  };
  note("aggregation", check_aggregation());
  note("betweenness", check_betweenness());
  const double fd = check_gradient();
  if (!(fd < 1e-4)) problems.push_back("gradient: max relative error " + std::to_string(fd));
  note("percolation", check_phi_monotone());
  note("determinism", check_determinism_and_partition());
  const double secs = seconds_since(t0);
  if (secs >= 60.0) problems.push_back("took " + fmt(secs, 1) + " s");

  std::string detail = problems.empty() ? "all checks hold" : problems.front();
  detail += "; max gradient rel. error " + std::to_string(fd) + ", " + fmt(secs, 1) + " s";
  report("property suite", problems.empty(), detail);
}

// ---------------------------------------------------------------- percolation

void percolation_criterion() {
  const auto t0 = Clock::now();
  std::vector<double> phis;
  int with_isolated = 0;
  int same_top5 = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = generate_ba({100, 2, seed});
    std::map<CentralityKind, std::vector<NodeId>> ranks;
    for (auto kind : {CentralityKind::degree, CentralityKind::betweenness,
                      CentralityKind::structural_hole}) {
      ranks[kind] = rank_nodes(centrality(g, kind));
    }
    const auto p = percolation_point(g, ranks[CentralityKind::structural_hole], 10);
    phis.push_back(p.phi);
    if (p.num_isolated() >= 1) ++with_isolated;
    auto top5 = [&](CentralityKind k) {
      return std::set<NodeId>(ranks[k].begin(), ranks[k].begin() + 5);
    };
    if (top5(CentralityKind::degree) == top5(CentralityKind::betweenness) &&
        top5(CentralityKind::degree) == top5(CentralityKind::structural_hole)) {
      ++same_top5;
    }
  }
  std::sort(phis.begin(), phis.end());
  const double median = 0.5 * (phis[9] + phis[10]);
  const bool ok = median < 0.6 && with_isolated >= 15 && same_top5 >= 10;
  report("percolation", ok,
         "median phi " + fmt(median) + " (< 0.6), isolated nodes in " +
             std::to_string(with_isolated) + "/20 seeds (>= 15), equal top-5 sets in " +
             std::to_string(same_top5) + "/20 seeds (>= 10), " + fmt(seconds_since(t0), 1) +
             " s");
}

// ---------------------------------------------------------------- scenarios

struct Scenarios {
  const ExperimentConfig& base;
  std::vector<ExperimentConfig> cfgs;
  std::map<std::string, std::vector<const RunRecord*>> by_id;
  SweepResult result;

  ExperimentConfig make(DataCase c, std::optional<double> thr, std::size_t l2) const {
    ExperimentConfig one = base;
    one.sweep = {};
    one.data_case = c;
    one.threshold = thr;
    one.case3_survivor_l2_per_class = l2;
    return one;
  }

  void want(DataCase c, std::optional<double> thr, std::size_t l2 = 10) {
    auto one = make(c, thr, l2);
    for (const auto& x : cfgs) {
      if (x.run_id() == one.run_id()) return;
    }
    cfgs.push_back(std::move(one));
  }

  void run() {
    result = run_sweep(cfgs, base.threads);
    for (const auto& f : result.failures) {
      std::cerr << "run " << f.run_id << " seed " << f.seed << " failed: " << f.message << '\n';
    }
    for (const auto& r : result.records) by_id[r.run_id].push_back(&r);
  }

  // Every repetition of one scenario; empty if any of them failed.
  std::vector<const RunRecord*> get(DataCase c, std::optional<double> thr, std::size_t l2 = 10) const {
    const auto id = make(c, thr, l2).run_id();
    auto it = by_id.find(id);
    if (it == by_id.end() || it->second.size() != base.seeds.size()) return {};
    return it->second;
  }
};

int final_round(const RunRecord& r) { return r.frame.rounds.back(); }

// First evaluated round with mean accuracy >= level; rounds + 1 if never.
int rounds_to(const MetricsFrame& f, double level, int rounds) {
  for (int r : f.rounds) {
    if (mean_accuracy(f, r) >= level) return r;
  }
  return rounds + 1;
}

template <class Fn>
double seed_mean(const std::vector<const RunRecord*>& runs, Fn fn) {
  std::vector<double> xs;
  for (const auto* r : runs) xs.push_back(fn(*r));
  return mean_of(xs);
}

double isolated_final(const RunRecord& r) {
  return cluster_mean_accuracy(r.frame, 1, final_round(r));
}

double lcc_final(const RunRecord& r) {
  return cluster_mean_accuracy(r.frame, r.frame.largest_cluster_size(), final_round(r));
}

const std::vector<DataCase> kIidCases{DataCase::case1, DataCase::case2};

void speed_criterion(const Scenarios& s) {
  std::map<DataCase, double> rounds;
  std::string detail;
  for (auto c : kIidCases) {
    const auto runs = s.get(c, std::nullopt);
    if (runs.empty()) {
      report("learning speed", false, "baseline runs failed");
      return;
    }
    rounds[c] = seed_mean(runs, [&](const RunRecord& r) {
      return static_cast<double>(rounds_to(r.frame, 0.7, s.base.rounds));
    });
    detail += std::string(to_string(c)) + " reaches 0.7 after " + fmt(rounds[c], 1) + " rounds; ";
  }
  detail += "need case2 < case1";
  report("learning speed", rounds[DataCase::case2] < rounds[DataCase::case1], detail);
}

void persistence_criterion(const Scenarios& s) {
  bool ok = true;
  std::string detail;
  for (auto c : kIidCases) {
    const auto base = s.get(c, std::nullopt), zero = s.get(c, 0.0), late = s.get(c, 0.7);
    if (base.empty() || zero.empty() || late.empty()) {
      report("knowledge persistence", false, "runs failed");
      return;
    }
    const double b = seed_mean(base, isolated_final);
    const double z = seed_mean(zero, isolated_final);
    const double l = seed_mean(late, isolated_final);
    const double gap = (b - l) / b;
    ok = ok && l > z && gap > 0.0 && gap <= 0.35;
    detail += std::string(to_string(c)) + " isolated: thr0.7 " + fmt(l) + " vs thr0 " + fmt(z) +
              ", gap to baseline " + fmt(gap) + "; ";
  }
  detail += "need thr0.7 > thr0 and gap in (0, 0.35]";
  report("knowledge persistence", ok, detail);
}

void lcc_criterion(const Scenarios& s) {
  bool ok = true;
  double worst = 0.0;
  std::string detail;
  for (auto c : kIidCases) {
    const auto base = s.get(c, std::nullopt);
    if (base.empty()) {
      report("LCC robustness", false, "runs failed");
      return;
    }
    const double b = seed_mean(base, lcc_final);
    for (double thr : {0.0, 0.7}) {
      const auto runs = s.get(c, thr);
      if (runs.empty()) {
        report("LCC robustness", false, "runs failed");
        return;
      }
      const double rel = std::abs(seed_mean(runs, lcc_final) - b) / b;
      worst = std::max(worst, rel);
      ok = ok && rel <= 0.08;
      detail += std::string(to_string(c)) + " thr" + fmt(thr, 1) + " " + fmt(rel) + "; ";
    }
  }
  detail += "largest relative gap " + fmt(worst) + " (<= 0.08)";
  report("LCC robustness", ok, detail);
}

std::vector<double> positive_case3_thresholds(const ExperimentConfig& cfg) {
  const auto& list = cfg.sweep.case3_thresholds.empty() ? cfg.sweep.thresholds
                                                        : cfg.sweep.case3_thresholds;
  std::vector<double> out;
  for (const auto& t : list) {
    if (t && *t > 0.0) out.push_back(*t);
  }
  return out;
}

void case3_criterion(const Scenarios& s) {
  const auto positive = positive_case3_thresholds(s.base);
  if (positive.empty()) {
    report("case 3 ordering", false, "config has no positive case 3 threshold");
    return;
  }
  std::vector<double> thresholds{0.0};
  thresholds.insert(thresholds.end(), positive.begin(), positive.end());

  bool ok = true;
  std::string detail;
  std::map<std::pair<std::size_t, double>, double> survivors, isolated;
  for (std::size_t l2 : {10, 30}) {
    for (double thr : thresholds) {
      const auto runs = s.get(DataCase::case3, thr, l2);
      if (runs.empty()) {
        report("case 3 ordering", false, "runs failed");
        return;
      }
      survivors[{l2, thr}] =
          seed_mean(runs, [](const RunRecord& r) { return mean_accuracy(r.frame, final_round(r)); });
      isolated[{l2, thr}] = seed_mean(runs, isolated_final);
    }
  }
  for (double thr : thresholds) {
    const double lo = survivors[{10, thr}], hi = survivors[{30, thr}];
    ok = ok && hi >= lo;
    detail += "thr" + fmt(thr, 2) + " survivors " + fmt(lo) + " -> " + fmt(hi) + "; ";
  }
  for (std::size_t l2 : {10, 30}) {
    const double z = isolated[{l2, 0.0}];
    detail += "l2=" + std::to_string(l2) + " isolated thr0 " + fmt(z);
    for (double thr : positive) {
      ok = ok && z < isolated[{l2, thr}];
      detail += " < thr" + fmt(thr, 2) + " " + fmt(isolated[{l2, thr}]);
    }
    detail += "; ";
  }
  detail.resize(detail.size() - 2);
  report("case 3 ordering", ok, detail);
}

void sign_criterion(const Scenarios& s) {
  const auto one = s.get(DataCase::case1, 0.7), two = s.get(DataCase::case2, 0.7);
  if (one.empty() || two.empty()) {
    report("case 1 vs case 2", false, "runs failed");
    return;
  }
  std::vector<double> d;
  try {
    for (std::size_t k = 0; k < one.size(); ++k) {
      d.push_back(mean_accuracy_difference(one[k]->frame, two[k]->frame, 20));
    }
  } catch (const std::exception& e) {
    report("case 1 vs case 2", false, e.what());
    return;
  }
  const double m = mean_of(d);
  report("case 1 vs case 2", m >= 0.0,
         "mean d_A(case1, case2) 20 rounds after disruption at 0.7: " + fmt(m, 4) + " (>= 0)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string config_path = std::string(DECSIM_SOURCE_DIR) + "/configs/desk.ini";
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> only;
  app.add_option("--config", config_path, "desk-scale preset");
  app.add_option("--seeds", seeds, "override the preset's seeds")->delimiter(',');
  app.add_option("--only", only, "subset of: properties, percolation, speed, persistence, lcc, "
                                 "case3, sign")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  auto selected = [&](const std::string& name) {
    return only.empty() || std::find(only.begin(), only.end(), name) != only.end();
  };

  if (selected("properties")) property_suite();
  if (selected("percolation")) percolation_criterion();

  const bool need_iid = selected("speed") || selected("persistence") || selected("lcc") ||
                        selected("sign");
  const bool need_case3 = selected("case3");
  if (need_iid || need_case3) {
    auto cfg = load_config(config_path);
    if (!seeds.empty()) cfg.seeds = seeds;
    Scenarios s{cfg, {}, {}, {}};
    if (need_iid) {
      for (auto c : kIidCases) {
        s.want(c, std::nullopt);
        s.want(c, 0.0);
        s.want(c, 0.7);
      }
    }
    if (need_case3) {
      for (std::size_t l2 : {10, 30}) {
        s.want(DataCase::case3, 0.0, l2);
        for (double t : positive_case3_thresholds(cfg)) s.want(DataCase::case3, t, l2);
      }
    }
    const auto t0 = Clock::now();
    s.run();
    std::cout << "(desk scenarios: " << s.result.records.size() << " runs in "
              << fmt(seconds_since(t0), 1) << " s)" << std::endl;
    if (selected("speed")) speed_criterion(s);
    if (selected("persistence")) persistence_criterion(s);
    if (selected("lcc")) lcc_criterion(s);
    if (selected("case3")) case3_criterion(s);
    if (selected("sign")) sign_criterion(s);
  }
  return failures == 0 ? 0 : 1;
}
