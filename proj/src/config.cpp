#include "jwins/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "jwins/error.hpp"

namespace jwins {
namespace {

using nlohmann::json;

/// Cursor over one JSON object that tracks the key path for error messages.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(fmt::format("{} must be an object", where()));
  }

  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, value] : obj_.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == key;
      if (!known) throw ConfigError(fmt::format("unknown key '{}'", join(key)));
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  Reader child(const std::string& key) const { return Reader(obj_.at(key), join(key)); }
  const json& raw(const std::string& key) const { return obj_.at(key); }

  void read(const std::string& key, bool& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(fmt::format("{} must be true or false", join(key)));
    out = v.get<bool>();
  }

  template <typename U>
    requires std::is_unsigned_v<U>
  void read(const std::string& key, U& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(fmt::format("{} must be a nonnegative integer", join(key)));
    const auto value = v.get<std::uint64_t>();
    if (value > std::numeric_limits<U>::max()) throw ConfigError(fmt::format("{} is too large", join(key)));
    out = static_cast<U>(value);
  }

  void read(const std::string& key, int& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) throw ConfigError(fmt::format("{} must be an integer", join(key)));
    out = v.get<int>();
  }

  void read(const std::string& key, double& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(fmt::format("{} must be a number", join(key)));
    out = v.get<double>();
  }

  void read(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(fmt::format("{} must be a string", join(key)));
    out = v.get<std::string>();
  }

  void read(const std::string& key, std::filesystem::path& out) const {
    std::string s = out.string();
    read(key, s);
    out = s;
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(fmt::format("{} must be an array of numbers", join(key)));
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(fmt::format("{} must be an array of numbers", join(key)));
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? std::string("config") : path_; }

  const json& obj_;
  std::string path_;
};

AlphaDistribution read_alpha(const Reader& root) {
  const auto& v = root.raw("alpha");
  if (v.is_string()) {
    if (v.get<std::string>() == "standard") return AlphaDistribution::standard();
    throw ConfigError(fmt::format("alpha: unknown preset '{}'", v.get<std::string>()));
  }
  const Reader r = root.child("alpha");
  r.only({"support", "probs"});
  AlphaDistribution dist;
  dist.support = r.numbers("support");
  if (r.has("probs")) {
    dist.probs = r.numbers("probs");
  } else {
    dist = AlphaDistribution::uniform(dist.support);
  }
  return dist;
}

std::string_view dataset_type_name(DatasetConfig::Type t) {
  return t == DatasetConfig::Type::synthetic ? "synthetic" : "idx";
}

}  // namespace

void RunConfig::validate() const {
  if (nodes < 1) throw ConfigError("nodes must be >= 1");
  if (topology.degree >= nodes && !(nodes == 1 && topology.degree == 0)) {
    throw ConfigError("topology.degree must be smaller than nodes");
  }
  if ((static_cast<std::uint64_t>(nodes) * topology.degree) % 2 != 0) {
    throw ConfigError("nodes * topology.degree must be even");
  }
  if (algo == Algorithm::choco && topology.dynamic) {
    throw ConfigError("choco needs a static topology; set topology.dynamic to false");
  }
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (shards_per_node < 1) throw ConfigError("partition.shards_per_node must be >= 1");
  if (dataset.type == DatasetConfig::Type::synthetic) {
    if (dataset.synth.classes < 2) throw ConfigError("dataset.classes must be >= 2");
    if (dataset.synth.dims < 1) throw ConfigError("dataset.dims must be >= 1");
    if (dataset.synth.per_class < 1) throw ConfigError("dataset.per_class must be >= 1");
    if (dataset.test_per_class < 1) throw ConfigError("dataset.test_per_class must be >= 1");
    if (!(dataset.synth.noise >= 0.0)) throw ConfigError("dataset.noise must be nonnegative");
    if (!(dataset.synth.correlation >= 0.0)) throw ConfigError("dataset.correlation must be nonnegative");
  } else {
    for (const auto* p : {&dataset.train_images, &dataset.train_labels, &dataset.test_images, &dataset.test_labels}) {
      if (p->empty()) throw ConfigError("idx dataset needs train_images, train_labels, test_images and test_labels");
    }
  }
  try {
    node_config().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

NodeConfig RunConfig::node_config() const {
  NodeConfig c;
  c.algo = algo;
  c.sgd = sgd;
  c.alpha = alpha;
  c.fixed_alpha = fixed_alpha;
  c.choco_gamma = choco_gamma;
  c.ablation = ablation;
  c.wavelet_levels = wavelet_levels;
  return c;
}

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }

  RunConfig cfg;
  const Reader root(doc, "");
  root.only({"algo", "nodes", "topology", "model", "dataset", "partition", "sgd", "alpha", "fixed_alpha",
             "choco_gamma", "rounds", "eval_every", "ablation", "wavelet_levels", "workers", "seed", "output"});

  if (root.has("algo")) {
    std::string name;
    root.read("algo", name);
    cfg.algo = parse_algorithm(name);
  }
  root.read("nodes", cfg.nodes);
  if (root.has("topology")) {
    const auto t = root.child("topology");
    t.only({"degree", "dynamic", "seed"});
    t.read("degree", cfg.topology.degree);
    t.read("dynamic", cfg.topology.dynamic);
    t.read("seed", cfg.topology.seed);
  }
  if (root.has("model")) {
    const auto m = root.child("model");
    m.only({"hidden"});
    m.read("hidden", cfg.hidden);
  }
  if (root.has("dataset")) {
    const auto d = root.child("dataset");
    std::string type = "synthetic";
    d.read("type", type);
    if (type == "synthetic") {
      d.only({"type", "classes", "dims", "per_class", "test_per_class", "seed", "noise", "correlation"});
      d.read("classes", cfg.dataset.synth.classes);
      d.read("dims", cfg.dataset.synth.dims);
      d.read("per_class", cfg.dataset.synth.per_class);
      d.read("test_per_class", cfg.dataset.test_per_class);
      d.read("seed", cfg.dataset.synth.seed);
      d.read("noise", cfg.dataset.synth.noise);
      d.read("correlation", cfg.dataset.synth.correlation);
    } else if (type == "idx") {
      cfg.dataset.type = DatasetConfig::Type::idx;
      d.only({"type", "train_images", "train_labels", "test_images", "test_labels"});
      d.read("train_images", cfg.dataset.train_images);
      d.read("train_labels", cfg.dataset.train_labels);
      d.read("test_images", cfg.dataset.test_images);
      d.read("test_labels", cfg.dataset.test_labels);
    } else {
      throw ConfigError(fmt::format("dataset.type must be 'synthetic' or 'idx', got '{}'", type));
    }
  }
  if (root.has("partition")) {
    const auto p = root.child("partition");
    p.only({"shards_per_node", "seed"});
    p.read("shards_per_node", cfg.shards_per_node);
    p.read("seed", cfg.partition_seed);
  }
  if (root.has("sgd")) {
    const auto s = root.child("sgd");
    s.only({"eta", "tau", "batch"});
    s.read("eta", cfg.sgd.eta);
    s.read("tau", cfg.sgd.tau);
    s.read("batch", cfg.sgd.batch_size);
  }
  if (root.has("alpha")) cfg.alpha = read_alpha(root);
  root.read("fixed_alpha", cfg.fixed_alpha);
  root.read("choco_gamma", cfg.choco_gamma);
  root.read("rounds", cfg.rounds);
  root.read("eval_every", cfg.eval_every);
  if (root.has("ablation")) {
    const auto a = root.child("ablation");
    a.only({"wavelet", "accumulation", "random_cutoff", "metadata_compression"});
    a.read("wavelet", cfg.ablation.wavelet);
    a.read("accumulation", cfg.ablation.accumulation);
    a.read("random_cutoff", cfg.ablation.random_cutoff);
    a.read("metadata_compression", cfg.ablation.metadata_compression);
  }
  root.read("wavelet_levels", cfg.wavelet_levels);
  root.read("workers", cfg.workers);
  root.read("seed", cfg.seed);
  root.read("output", cfg.output);

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["algo"] = std::string(to_string(cfg.algo));
  j["nodes"] = cfg.nodes;
  j["topology"] = {{"degree", cfg.topology.degree}, {"dynamic", cfg.topology.dynamic}, {"seed", cfg.topology.seed}};
  j["model"] = {{"hidden", cfg.hidden}};
  if (cfg.dataset.type == DatasetConfig::Type::synthetic) {
    j["dataset"] = {{"type", dataset_type_name(cfg.dataset.type)},
                    {"classes", cfg.dataset.synth.classes},
                    {"dims", cfg.dataset.synth.dims},
                    {"per_class", cfg.dataset.synth.per_class},
                    {"test_per_class", cfg.dataset.test_per_class},
                    {"seed", cfg.dataset.synth.seed},
                    {"noise", cfg.dataset.synth.noise},
                    {"correlation", cfg.dataset.synth.correlation}};
  } else {
    j["dataset"] = {{"type", dataset_type_name(cfg.dataset.type)},
                    {"train_images", cfg.dataset.train_images.string()},
                    {"train_labels", cfg.dataset.train_labels.string()},
                    {"test_images", cfg.dataset.test_images.string()},
                    {"test_labels", cfg.dataset.test_labels.string()}};
  }
  j["partition"] = {{"shards_per_node", cfg.shards_per_node}, {"seed", cfg.partition_seed}};
  j["sgd"] = {{"eta", cfg.sgd.eta}, {"tau", cfg.sgd.tau}, {"batch", cfg.sgd.batch_size}};
  j["alpha"] = {{"support", cfg.alpha.support}, {"probs", cfg.alpha.probs}};
  j["fixed_alpha"] = cfg.fixed_alpha;
  j["choco_gamma"] = cfg.choco_gamma;
  j["rounds"] = cfg.rounds;
  j["eval_every"] = cfg.eval_every;
  j["ablation"] = {{"wavelet", cfg.ablation.wavelet},
                   {"accumulation", cfg.ablation.accumulation},
                   {"random_cutoff", cfg.ablation.random_cutoff},
                   {"metadata_compression", cfg.ablation.metadata_compression}};
  j["wavelet_levels"] = cfg.wavelet_levels;
  j["seed"] = cfg.seed;
  return j.dump();
}

}  // namespace jwins
