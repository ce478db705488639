#include "clpoison/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <vector>

#include "clpoison/error.hpp"
#include "clpoison/io.hpp"

namespace clpoison {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeySpec>& key_registry() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    auto add_str = [&k](const char* name, std::string RunConfig::* f) {
      k.push_back({name,
                   [f](RunConfig& c, const std::string& v) { c.*f = v; },
                   [f](const RunConfig& c) { return c.*f; }});
    };
    auto add_int = [&k](const char* name, int RunConfig::* f) {
      k.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_int(name, v);
                   },
                   [f](const RunConfig& c) { return std::to_string(c.*f); }});
    };
    auto add_u64 = [&k](const char* name, std::uint64_t RunConfig::* f) {
      k.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_u64(name, v);
                   },
                   [f](const RunConfig& c) { return std::to_string(c.*f); }});
    };
    auto add_dbl = [&k](const char* name, double RunConfig::* f) {
      k.push_back({name,
                   [f, name](RunConfig& c, const std::string& v) {
                     c.*f = parse_double(name, v);
                   },
                   [f](const RunConfig& c) { return format_double(c.*f); }});
    };

    add_str("data.train", &RunConfig::data_train);
    add_str("data.dev", &RunConfig::data_dev);
    add_str("data.test", &RunConfig::data_test);
    add_u64("seed", &RunConfig::seed);
    add_int("victim.embedding_dim", &RunConfig::victim_embedding_dim);
    add_int("victim.hidden_dim", &RunConfig::victim_hidden_dim);
    add_dbl("victim.learning_rate", &RunConfig::victim_learning_rate);
    add_int("victim.batch_size", &RunConfig::victim_batch_size);
    add_int("victim.epochs", &RunConfig::victim_epochs);
    add_dbl("victim.l2", &RunConfig::victim_l2);
    add_int("victim.min_count", &RunConfig::victim_min_count);
    add_dbl("poison.learning_rate", &RunConfig::poison_learning_rate);
    add_int("poison.epochs", &RunConfig::poison_epochs);
    add_int("poison.batch_size", &RunConfig::poison_batch_size);
    add_int("lm.order", &RunConfig::lm_order);
    add_dbl("lm.k", &RunConfig::lm_k);
    add_int("vectors.dim", &RunConfig::vectors_dim);
    add_int("vectors.window", &RunConfig::vectors_window);
    add_int("vectors.min_count", &RunConfig::vectors_min_count);
    add_int("vectors.power_iterations", &RunConfig::vectors_power_iterations);
    add_int("vectors.oversample", &RunConfig::vectors_oversample);
    add_int("synonyms.k", &RunConfig::synonyms_k);
    add_dbl("synonyms.max_cos_dist", &RunConfig::synonyms_max_cos_dist);
    add_int("genetic.population", &RunConfig::genetic_population);
    add_int("genetic.iterations", &RunConfig::genetic_iterations);
    add_int("genetic.candidate_pool", &RunConfig::genetic_candidate_pool);
    add_dbl("genetic.delta", &RunConfig::genetic_delta);
    add_dbl("genetic.rho", &RunConfig::genetic_rho);
    add_dbl("genetic.max_sub_fraction", &RunConfig::genetic_max_sub_fraction);
    add_dbl("genetic.temperature", &RunConfig::genetic_temperature);
    add_str("attack.target_class", &RunConfig::attack_target_class);
    add_int("attack.poison_size", &RunConfig::attack_poison_size);
    add_int("campaign.trials", &RunConfig::campaign_trials);
    add_str("badnet.trigger", &RunConfig::badnet_trigger);
    add_dbl("badnet.rate", &RunConfig::badnet_rate);
    add_dbl("defense.onion_rate", &RunConfig::defense_onion_rate);
    add_int("jobs", &RunConfig::jobs);
    return k;
  }();
  return keys;
}

const KeySpec& find_key(const std::string& name) {
  for (const auto& k : key_registry())
    if (k.name == name) return k;
  throw ConfigError("unknown config key: " + name);
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected `key = value`");
    cfg.apply_override(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
  find_key(key).set(*this, value);
}

void RunConfig::validate() const {
  victim_train_config().validate();
  poison_train_config().validate();
  genetic_config().validate();
  if (victim_embedding_dim < 1 || victim_hidden_dim < 1)
    throw ConfigError("victim dimensions must be positive");
  if (victim_min_count < 1) throw ConfigError("victim.min_count must be >= 1");
  if (lm_order < 1 || lm_order > NGramModel::kMaxOrder)
    throw ConfigError("lm.order must be in [1, 4]");
  if (!(lm_k > 0.0)) throw ConfigError("lm.k must be positive");
  if (vectors_dim < 1 || vectors_window < 1 || vectors_min_count < 1 ||
      vectors_power_iterations < 0 || vectors_oversample < 0)
    throw ConfigError("bad vectors.* configuration");
  if (attack_poison_size < 1) throw ConfigError("attack.poison_size must be >= 1");
  if (campaign_trials < 1) throw ConfigError("campaign.trials must be >= 1");
  if (!(badnet_rate > 0.0 && badnet_rate < 1.0))
    throw ConfigError("badnet.rate must be in (0, 1)");
  if (badnet_trigger.empty()) throw ConfigError("badnet.trigger must be non-empty");
  if (!(defense_onion_rate > 0.0 && defense_onion_rate < 1.0))
    throw ConfigError("defense.onion_rate must be in (0, 1)");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& k : key_registry()) {
    if (k.name == "jobs") continue;
    out[k.name] = k.get(*this);
  }
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : resolved()) {
    eat(k);
    eat("=");
    eat(v);
    eat("\n");
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig RunConfig::victim_train_config() const {
  TrainConfig t;
  t.learning_rate = victim_learning_rate;
  t.batch_size = victim_batch_size;
  t.epochs = victim_epochs;
  t.seed = seed;
  t.l2 = victim_l2;
  t.freeze_embeddings = false;
  return t;
}

TrainConfig RunConfig::poison_train_config() const {
  TrainConfig t;
  t.learning_rate = poison_learning_rate;
  t.batch_size = poison_batch_size;
  t.epochs = poison_epochs;
  t.seed = seed;
  t.freeze_embeddings = true;
  return t;
}

GeneticConfig RunConfig::genetic_config() const {
  GeneticConfig g;
  g.population = genetic_population;
  g.iterations = genetic_iterations;
  g.candidate_pool = genetic_candidate_pool;
  g.k_syn = synonyms_k;
  g.max_cos_dist = synonyms_max_cos_dist;
  g.delta = genetic_delta;
  g.rho = genetic_rho;
  g.max_sub_fraction = genetic_max_sub_fraction;
  g.temperature = genetic_temperature;
  g.seed = seed;
  return g;
}

VectorTrainConfig RunConfig::vector_train_config() const {
  VectorTrainConfig v;
  v.dim = vectors_dim;
  v.window = vectors_window;
  v.min_count = vectors_min_count;
  v.power_iterations = vectors_power_iterations;
  v.oversample = vectors_oversample;
  v.seed = seed;
  return v;
}

PipelineConfig RunConfig::pipeline_config() const {
  PipelineConfig p;
  p.genetic = genetic_config();
  p.poison_train = poison_train_config();
  p.poison_size = attack_poison_size;
  p.trials = campaign_trials;
  p.jobs = jobs;
  p.seed = seed;
  return p;
}

}  // namespace clpoison
