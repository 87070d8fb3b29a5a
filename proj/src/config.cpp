#include "decsim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "decsim/errors.hpp"
#include "decsim/text.hpp"

namespace decsim {

std::string_view to_string(DataCase c) {
  switch (c) {
    case DataCase::case1: return "case1";
    case DataCase::case2: return "case2";
    case DataCase::case3: return "case3";
  }
  return "?";
}

DataCase parse_case(std::string_view name) {
  if (name == "case1") return DataCase::case1;
  if (name == "case2") return DataCase::case2;
  if (name == "case3") return DataCase::case3;
  throw ConfigError("unknown case '" + std::string(name) + "'");
}

std::string DataSource::key() const {
  std::ostringstream k;
  if (kind == Kind::idx) {
    k << "idx:" << train_images.string() << '|' << train_labels.string() << '|'
      << test_images.string() << '|' << test_labels.string();
  } else {
    k << "synthetic:" << synthetic.classes << '|' << synthetic.dim << '|' << synthetic.per_class
      << '|' << format_real(synthetic.separation) << '|' << synthetic.modes << '|'
      << synthetic.seed << '|'
      << synthetic_test_per_class;
  }
  k << "|fraction=" << format_real(train_fraction);
  return k.str();
}

namespace {

std::string join(const auto& items, auto&& fmt) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ',';
    out += fmt(x);
  }
  return out;
}

std::string threshold_text(const std::optional<double>& t) {
  return t ? format_real(*t) : "none";
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (topology.m < 1 || topology.m >= topology.n) fail("topology: need 1 <= m < nodes");
  if (!(disrupted_fraction > 0.0 && disrupted_fraction < 1.0)) {
    fail("scenario.fraction must lie in (0, 1)");
  }
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
    fail("scenario.threshold must be 'none' or lie in [0, 1]");
  }
  if (rounds < 1) fail("training.rounds must be >= 1");
  if (eval_stride < 1) fail("training.eval_stride must be >= 1");
  try {
    train.validate();
  } catch (const ParameterError& e) {
    fail(std::string("training: ") + e.what());
  }
  for (auto h : hidden_sizes) {
    if (h == 0) fail("model.hidden sizes must be positive");
  }
  if (case1_per_class < 1 || case2_per_class < 1 || case3_survivor_l2_per_class < 1) {
    fail("scenario per-class counts must be positive");
  }
  if (seeds.empty()) fail("run.seeds must list at least one seed");
  if (threads < 1) fail("run.threads must be >= 1");
  if (!(percolation_step > 0.0 && percolation_step <= 1.0)) {
    fail("percolation.step must lie in (0, 1]");
  }
  if (!(data.train_fraction > 0.0 && data.train_fraction <= 1.0)) {
    fail("data.train_fraction must lie in (0, 1]");
  }
  if (data.kind == DataSource::Kind::synthetic) {
    if (data.synthetic.classes < 2 || data.synthetic.dim < 1 || data.synthetic.per_class < 1 ||
        data.synthetic_test_per_class < 1 || data.synthetic.modes < 1 ||
        !(data.synthetic.separation > 0.0)) {
      fail("data: invalid synthetic dataset parameters");
    }
  } else if (data.train_images.empty() || data.train_labels.empty() ||
             data.test_images.empty() || data.test_labels.empty()) {
    fail("data: idx source needs train_images, train_labels, test_images, test_labels");
  }
}

std::map<std::string, std::string> ExperimentConfig::canonical() const {
  std::map<std::string, std::string> c;
  c["topology.nodes"] = std::to_string(topology.n);
  c["topology.m"] = std::to_string(topology.m);
  c["topology.seed"] = std::to_string(topology.seed);
  c["scenario.case"] = std::string(to_string(data_case));
  c["scenario.case1_per_class"] = std::to_string(case1_per_class);
  c["scenario.case2_per_class"] = std::to_string(case2_per_class);
  c["scenario.l2_per_class"] = std::to_string(case3_survivor_l2_per_class);
  if (label_split) {
    c["scenario.l2_classes"] =
        join(label_split->l2, [](ClassId x) { return std::to_string(x); });
  }
  c["scenario.centrality"] = std::string(to_string(centrality));
  c["scenario.fraction"] = format_real(disrupted_fraction);
  c["scenario.threshold"] = threshold_text(threshold);
  c["training.rounds"] = std::to_string(rounds);
  c["training.eval_stride"] = std::to_string(eval_stride);
  c["training.learning_rate"] = format_real(train.learning_rate);
  c["training.momentum"] = format_real(train.momentum);
  c["training.batch_size"] = std::to_string(train.batch_size);
  c["training.local_epochs"] = std::to_string(train.local_epochs);
  c["model.hidden"] = join(hidden_sizes, [](std::size_t x) { return std::to_string(x); });
  c["data.source"] = data.kind == DataSource::Kind::idx ? "idx" : "synthetic";
  c["data.train_fraction"] = format_real(data.train_fraction);
  if (data.kind == DataSource::Kind::idx) {
    c["data.train_images"] = data.train_images.string();
    c["data.train_labels"] = data.train_labels.string();
    c["data.test_images"] = data.test_images.string();
    c["data.test_labels"] = data.test_labels.string();
  } else {
    c["data.classes"] = std::to_string(data.synthetic.classes);
    c["data.dim"] = std::to_string(data.synthetic.dim);
    c["data.train_per_class"] = std::to_string(data.synthetic.per_class);
    c["data.test_per_class"] = std::to_string(data.synthetic_test_per_class);
    c["data.separation"] = format_real(data.synthetic.separation);
    c["data.modes"] = std::to_string(data.synthetic.modes);
    c["data.seed"] = std::to_string(data.synthetic.seed);
  }
  c["run.seeds"] = join(seeds, [](std::uint64_t s) { return std::to_string(s); });
  c["percolation.step"] = format_real(percolation_step);
  if (!sweep.cases.empty()) {
    c["sweep.cases"] = join(sweep.cases, [](DataCase x) { return std::string(to_string(x)); });
  }
  if (!sweep.thresholds.empty()) c["sweep.thresholds"] = join(sweep.thresholds, threshold_text);
  if (!sweep.case3_thresholds.empty()) {
    c["sweep.case3_thresholds"] = join(sweep.case3_thresholds, threshold_text);
  }
  if (!sweep.l2_per_class.empty()) {
    c["sweep.l2_per_class"] =
        join(sweep.l2_per_class, [](std::size_t x) { return std::to_string(x); });
  }
  // output directory and thread count do not change results
  return c;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& [k, v] : canonical()) {
    mix(k);
    mix(v);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::run_id() const {
  std::string id(to_string(data_case));
  if (data_case == DataCase::case3) id += "_l2-" + std::to_string(case3_survivor_l2_per_class);
  id += "_thr-" + threshold_text(threshold);
  return id;
}

// --- parsing -------------------------------------------------------------------

namespace {

using boost::property_tree::ptree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"topology", {"nodes", "m", "seed"}},
      {"data",
       {"source", "train_images", "train_labels", "test_images", "test_labels", "train_fraction",
        "classes", "dim", "train_per_class", "test_per_class", "separation", "modes", "seed"}},
      {"scenario",
       {"case", "centrality", "fraction", "threshold", "case1_per_class", "case2_per_class",
        "l2_per_class", "l2_classes"}},
      {"model", {"hidden"}},
      {"training",
       {"rounds", "learning_rate", "momentum", "batch_size", "local_epochs", "eval_stride"}},
      {"run", {"seeds", "output", "threads"}},
      {"sweep", {"cases", "thresholds", "case3_thresholds", "l2_per_class"}},
      {"percolation", {"step"}},
  };
  return s;
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  T value{};
  const auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, std::string_view text) {
  std::vector<T> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    out.push_back(parse_number<T>(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::optional<double> parse_threshold(const std::string& key, std::string_view text) {
  const auto t = trim(text);
  if (t == "none" || t == "baseline") return std::nullopt;
  return parse_number<double>(key, t);
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  ExperimentConfig cfg;
  std::optional<std::vector<ClassId>> l2_classes;
  auto path = [&base_dir](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };

  for (const auto& [section, body] : tree) {
    auto known = schema().find(section);
    if (known == schema().end()) {
      if (!body.data().empty()) {
        throw ConfigError("key '" + section + "' outside of any section");
      }
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      if (!known->second.contains(key)) throw ConfigError("unknown key '" + full + "'");
      // strip trailing comments
      std::string value = node.get_value<std::string>();
      if (auto pos = value.find_first_of("#;"); pos != std::string::npos) value.resize(pos);
      value = std::string(trim(value));

      if (full == "topology.nodes") cfg.topology.n = parse_number<std::size_t>(full, value);
      else if (full == "topology.m") cfg.topology.m = parse_number<std::size_t>(full, value);
      else if (full == "topology.seed") cfg.topology.seed = parse_number<std::uint64_t>(full, value);
      else if (full == "data.source") {
        if (value == "synthetic") cfg.data.kind = DataSource::Kind::synthetic;
        else if (value == "idx") cfg.data.kind = DataSource::Kind::idx;
        else throw ConfigError(full + ": expected 'synthetic' or 'idx'");
      }
      else if (full == "data.train_images") cfg.data.train_images = path(value);
      else if (full == "data.train_labels") cfg.data.train_labels = path(value);
      else if (full == "data.test_images") cfg.data.test_images = path(value);
      else if (full == "data.test_labels") cfg.data.test_labels = path(value);
      else if (full == "data.train_fraction") cfg.data.train_fraction = parse_number<double>(full, value);
      else if (full == "data.classes") cfg.data.synthetic.classes = parse_number<std::size_t>(full, value);
      else if (full == "data.dim") cfg.data.synthetic.dim = parse_number<std::size_t>(full, value);
      else if (full == "data.train_per_class") cfg.data.synthetic.per_class = parse_number<std::size_t>(full, value);
      else if (full == "data.test_per_class") cfg.data.synthetic_test_per_class = parse_number<std::size_t>(full, value);
      else if (full == "data.separation") cfg.data.synthetic.separation = parse_number<double>(full, value);
      else if (full == "data.modes") cfg.data.synthetic.modes = parse_number<std::size_t>(full, value);
      else if (full == "data.seed") cfg.data.synthetic.seed = parse_number<std::uint64_t>(full, value);
      else if (full == "scenario.case") cfg.data_case = parse_case(value);
      else if (full == "scenario.centrality") {
        try {
          cfg.centrality = parse_centrality(value);
        } catch (const ParameterError& e) {
          throw ConfigError(full + ": " + e.what());
        }
      }
      else if (full == "scenario.fraction") cfg.disrupted_fraction = parse_number<double>(full, value);
      else if (full == "scenario.threshold") cfg.threshold = parse_threshold(full, value);
      else if (full == "scenario.case1_per_class") cfg.case1_per_class = parse_number<std::size_t>(full, value);
      else if (full == "scenario.case2_per_class") cfg.case2_per_class = parse_number<std::size_t>(full, value);
      else if (full == "scenario.l2_per_class") cfg.case3_survivor_l2_per_class = parse_number<std::size_t>(full, value);
      else if (full == "scenario.l2_classes") l2_classes = parse_list<ClassId>(full, value);
      else if (full == "model.hidden") cfg.hidden_sizes = parse_list<std::size_t>(full, value);
      else if (full == "training.rounds") cfg.rounds = parse_number<int>(full, value);
      else if (full == "training.learning_rate") cfg.train.learning_rate = parse_number<double>(full, value);
      else if (full == "training.momentum") cfg.train.momentum = parse_number<double>(full, value);
      else if (full == "training.batch_size") cfg.train.batch_size = parse_number<std::size_t>(full, value);
      else if (full == "training.local_epochs") cfg.train.local_epochs = parse_number<std::size_t>(full, value);
      else if (full == "training.eval_stride") cfg.eval_stride = parse_number<int>(full, value);
      else if (full == "run.seeds") cfg.seeds = parse_list<std::uint64_t>(full, value);
      else if (full == "run.output") cfg.output_dir = value;
      else if (full == "run.threads") cfg.threads = parse_number<std::size_t>(full, value);
      else if (full == "sweep.cases") {
        cfg.sweep.cases.clear();
        for (const auto& item : split(value, ',')) cfg.sweep.cases.push_back(parse_case(item));
      }
      else if (full == "sweep.thresholds") {
        cfg.sweep.thresholds.clear();
        for (const auto& item : split(value, ',')) {
          cfg.sweep.thresholds.push_back(parse_threshold(full, item));
        }
      }
      else if (full == "sweep.case3_thresholds") {
        cfg.sweep.case3_thresholds.clear();
        for (const auto& item : split(value, ',')) {
          cfg.sweep.case3_thresholds.push_back(parse_threshold(full, item));
        }
      }
      else if (full == "sweep.l2_per_class") cfg.sweep.l2_per_class = parse_list<std::size_t>(full, value);
      else if (full == "percolation.step") cfg.percolation_step = parse_number<double>(full, value);
    }
  }

  if (l2_classes) {
    const std::size_t classes =
        cfg.data.kind == DataSource::Kind::idx ? 10 : cfg.data.synthetic.classes;
    LabelSplit split;
    std::set<ClassId> l2(l2_classes->begin(), l2_classes->end());
    for (std::size_t c = 0; c < classes; ++c) {
      (l2.contains(static_cast<ClassId>(c)) ? split.l2 : split.l1).push_back(static_cast<ClassId>(c));
    }
    if (split.l2.size() != l2.size()) throw ConfigError("scenario.l2_classes out of range");
    cfg.label_split = std::move(split);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

}  // namespace decsim
