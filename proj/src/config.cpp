#include "bvae/config.hpp"

#include "bvae/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>

namespace bvae {

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected " + (std::is_floating_point_v<T> ? "a number" : "an integer") + ", got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

template <typename E>
E wrap(const std::string& key, const std::function<E()>& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Access>
Field number(std::string key, Access access) {
  return {key, [key, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); },
          [access](const ExperimentConfig& c) {
            const T v = access(const_cast<ExperimentConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return format_real(v);
            } else {
              return std::to_string(v);
            }
          }};
}

template <typename T, typename Access>
Field list(std::string key, Access access) {
  return {key, [key, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_list<T>(key, v); },
          [access](const ExperimentConfig& c) { return join(access(const_cast<ExperimentConfig&>(c))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // architecture
    f.push_back({"model_kind",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.model.kind = wrap<ModelKind>("model_kind", [&] { return parse_model_kind(v); });
                 },
                 [](const ExperimentConfig& c) { return to_string(c.model.kind); }});
    f.push_back(number<int>("input_size", [](ExperimentConfig& c) -> int& { return c.model.input_size; }));
    f.push_back(number<int>("input_channels", [](ExperimentConfig& c) -> int& { return c.model.input_channels; }));
    f.push_back(list<int>("encoder_filters", [](ExperimentConfig& c) -> std::vector<int>& { return c.model.encoder_filters; }));
    f.push_back(list<int>("pool_after", [](ExperimentConfig& c) -> std::vector<int>& { return c.model.pool_after; }));
    f.push_back(number<int>("bottleneck_channels", [](ExperimentConfig& c) -> int& { return c.model.bottleneck_channels; }));
    f.push_back(list<int>("decoder_filters", [](ExperimentConfig& c) -> std::vector<int>& { return c.model.decoder_filters; }));
    f.push_back(list<int>("upsample_after", [](ExperimentConfig& c) -> std::vector<int>& { return c.model.upsample_after; }));
    f.push_back(number<double>("leaky_slope", [](ExperimentConfig& c) -> double& { return c.model.leaky_slope; }));
    // optimisation
    f.push_back(number<double>("lr_init", [](ExperimentConfig& c) -> double& { return c.training.lr_init; }));
    f.push_back(number<double>("lr_decay_factor", [](ExperimentConfig& c) -> double& { return c.training.lr_decay_factor; }));
    f.push_back(number<int>("plateau_patience", [](ExperimentConfig& c) -> int& { return c.training.plateau_patience; }));
    f.push_back(number<double>("plateau_rel_tol", [](ExperimentConfig& c) -> double& { return c.training.plateau_rel_tol; }));
    f.push_back(number<int>("epochs", [](ExperimentConfig& c) -> int& { return c.training.epochs; }));
    f.push_back(number<double>("weight_decay", [](ExperimentConfig& c) -> double& { return c.training.weight_decay; }));
    f.push_back(number<int>("batch_size", [](ExperimentConfig& c) -> int& { return c.training.batch_size; }));
    f.push_back(number<double>("beta", [](ExperimentConfig& c) -> double& { return c.training.beta; }));
    f.push_back(number<double>("alpha", [](ExperimentConfig& c) -> double& { return c.training.alpha; }));
    f.push_back(number<double>("adam_beta1", [](ExperimentConfig& c) -> double& { return c.training.adam_beta1; }));
    f.push_back(number<double>("adam_beta2", [](ExperimentConfig& c) -> double& { return c.training.adam_beta2; }));
    f.push_back(number<double>("adam_eps", [](ExperimentConfig& c) -> double& { return c.training.adam_eps; }));
    f.push_back(number<double>("hvp_step", [](ExperimentConfig& c) -> double& { return c.training.hvp_step; }));
    f.push_back({"augment", [](ExperimentConfig& c, const std::string& v) { c.training.augment = parse_bool("augment", v); },
                 [](const ExperimentConfig& c) { return std::string(c.training.augment ? "true" : "false"); }});
    // scoring
    f.push_back({"score_kind",
                 [](ExperimentConfig& c, const std::string& v) { c.scoring.score_kind = parse_score_kind(v); },
                 [](const ExperimentConfig& c) { return to_string(c.scoring.score_kind); }});
    f.push_back(number<double>("gamma", [](ExperimentConfig& c) -> double& { return c.scoring.gamma; }));
    f.push_back({"threshold",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.scoring.threshold = wrap<ThresholdStrategy>("threshold", [&] { return ThresholdStrategy::parse(v); });
                 },
                 [](const ExperimentConfig& c) { return c.scoring.threshold.str(); }});
    f.push_back(number<double>("elbo_beta", [](ExperimentConfig& c) -> double& { return c.scoring.elbo_beta; }));
    // synthetic fixture
    f.push_back(number<int>("synth_train", [](ExperimentConfig& c) -> int& { return c.synth.train; }));
    f.push_back(number<int>("synth_validation", [](ExperimentConfig& c) -> int& { return c.synth.validation; }));
    f.push_back(number<int>("synth_test_normal", [](ExperimentConfig& c) -> int& { return c.synth.test_normal; }));
    f.push_back(number<int>("synth_test_abnormal", [](ExperimentConfig& c) -> int& { return c.synth.test_abnormal; }));
    f.push_back({"synth_anomaly_kinds",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.synth.anomaly_kinds.clear();
                   for (const auto& item : split_list(v)) {
                     c.synth.anomaly_kinds.push_back(
                         wrap<AnomalyKind>("synth_anomaly_kinds", [&] { return parse_anomaly_kind(item); }));
                   }
                 },
                 [](const ExperimentConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.synth.anomaly_kinds.size(); ++i) {
                     out += (i ? "," : "") + to_string(c.synth.anomaly_kinds[i]);
                   }
                   return out;
                 }});
    f.push_back(number<double>("synth_noise", [](ExperimentConfig& c) -> double& { return c.synth.noise; }));
    f.push_back(number<int>("synth_width", [](ExperimentConfig& c) -> int& { return c.synth.width; }));
    f.push_back(number<int>("synth_height", [](ExperimentConfig& c) -> int& { return c.synth.height; }));
    f.push_back(number<std::uint64_t>("synth_seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.synth_seed; }));
    // visualisation
    f.push_back(number<double>("tsne_perplexity", [](ExperimentConfig& c) -> double& { return c.tsne.perplexity; }));
    f.push_back(number<int>("tsne_restarts", [](ExperimentConfig& c) -> int& { return c.tsne.restarts; }));
    f.push_back(number<int>("tsne_iterations", [](ExperimentConfig& c) -> int& { return c.tsne.iterations; }));
    f.push_back(number<int>("tsne_exaggeration_iterations",
                            [](ExperimentConfig& c) -> int& { return c.tsne.exaggeration_iterations; }));
    f.push_back(number<double>("tsne_exaggeration", [](ExperimentConfig& c) -> double& { return c.tsne.exaggeration; }));
    f.push_back(number<double>("tsne_learning_rate", [](ExperimentConfig& c) -> double& { return c.tsne.learning_rate; }));
    f.push_back(number<double>("tsne_momentum_initial", [](ExperimentConfig& c) -> double& { return c.tsne.momentum_initial; }));
    f.push_back(number<double>("tsne_momentum_final", [](ExperimentConfig& c) -> double& { return c.tsne.momentum_final; }));
    f.push_back(number<double>("tsne_init_std", [](ExperimentConfig& c) -> double& { return c.tsne.init_std; }));
    f.push_back(number<int>("grid_pairs", [](ExperimentConfig& c) -> int& { return c.grid_pairs; }));
    f.push_back(number<int>("checkpoint_every", [](ExperimentConfig& c) -> int& { return c.checkpoint_every; }));
    // experiment
    f.push_back({"dataset", [](ExperimentConfig& c, const std::string& v) { c.dataset = v; },
                 [](const ExperimentConfig& c) { return c.dataset; }});
    f.push_back(number<std::uint64_t>("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(number<int>("runs", [](ExperimentConfig& c) -> int& { return c.runs; }));
    f.push_back(list<double>("sweep_betas", [](ExperimentConfig& c) -> std::vector<double>& { return c.sweep_betas; }));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace

KeyValues parse_key_values(std::istream& is, const std::string& source) {
  KeyValues out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    out.entries.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(cfg, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

ExperimentConfig parse_experiment(const KeyValues& kv) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : kv.entries) set_key(cfg, k, v);
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("config: cannot read '" + file.string() + "'");
  return parse_experiment(parse_key_values(is, file.string()));
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  training.validate();
  scoring.validate();
  tsne.validate();
  wrap<int>("synth", [&] {
    synth.validate();
    return 0;
  });
  if (grid_pairs < 1) throw ConfigError("grid_pairs must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (dataset.empty()) throw ConfigError("dataset: required (a directory or 'synthetic')");
  if (sweep_betas.empty()) throw ConfigError("sweep_betas: at least one value required");
  for (double b : sweep_betas)
    if (!(b >= 0) || !std::isfinite(b)) throw ConfigError("sweep_betas: values must be finite and >= 0");
  if (model.input_size != kImageSize || model.input_channels != kImageChannels) {
    throw ConfigError("input_size/input_channels: images are preprocessed to 3x64x64");
  }
}

std::string ExperimentConfig::resolved() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << '=' << f.get(*this) << '\n';
  return os.str();
}

TrainingConfig ExperimentConfig::training_for_run(int run) const {
  TrainingConfig t = training;
  t.seed = seed + static_cast<std::uint64_t>(run);
  return t;
}

DatasetSplit load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset == "synthetic") return generate_synthetic(cfg.synth, cfg.synth_seed);
  const std::filesystem::path root(cfg.dataset);
  if (!std::filesystem::is_directory(root)) throw ConfigError("dataset: directory '" + cfg.dataset + "' does not exist");
  return load_split(root);
}

namespace {

ExperimentConfig from_canonical(const std::string& text, std::initializer_list<const char*> derived) {
  std::istringstream is(text);
  KeyValues kv = parse_key_values(is, "canonical");
  std::erase_if(kv.entries, [&](const auto& e) {
    return std::any_of(derived.begin(), derived.end(), [&](const char* d) { return e.first == d; });
  });
  return parse_experiment(kv);
}

}  // namespace

ModelSpec parse_model_spec(const std::string& canonical_text) {
  ModelSpec spec = from_canonical(canonical_text, {"latent_dim"}).model;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

TrainingConfig parse_training_config(const std::string& canonical_text) {
  const ExperimentConfig e = from_canonical(canonical_text, {});
  TrainingConfig t = e.training;
  t.seed = e.seed;
  return t;
}

}  // namespace bvae
