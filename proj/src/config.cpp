#include "hardsel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "hardsel/errors.hpp"

namespace hardsel {

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const nlohmann::json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw ConfigError("config: [" + name_ + "] must be a table");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  void read_path(const char* key, std::filesystem::path& out) {
    std::string s;
    bool present = obj_.contains(key);
    read(key, s);
    if (present) out = s;
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return std::nullopt;
    return Section(*it, name_.empty() ? key : name_ + "." + key);
  }

  const nlohmann::json* raw(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ConfigError("config: unknown key '" + (name_.empty() ? "" : name_ + ".") + it.key() + "'");
      }
    }
  }

 private:
  const nlohmann::json& obj_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_client(Section s, GenerationConfig& c) {
  s.read("endpoint", c.endpoint);
  s.read("model", c.model_name);
  s.read("temperature", c.temperature);
  s.read("max_tokens", c.max_tokens);
  s.read("timeout", c.timeout_seconds);
  s.read("max_retries", c.max_retries);
  s.read("api_key_env", c.api_key_env);
  s.finish();
}

nlohmann::json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  throw ConfigError("config: unsupported TOML value (dates and times are not accepted)");
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

void RunConfig::validate() const {
  if (n_per_source == 0) throw ConfigError("config: ingest.n_per_source must be >= 1");
  if (workers == 0) throw ConfigError("config: workers must be >= 1");
  if (embedding.dim == 0) throw ConfigError("config: embedding.dim must be >= 1");
  if (embedding.provider != "hash" && embedding.provider != "remote") {
    throw ConfigError("config: embedding.provider must be 'hash' or 'remote'");
  }
  if (mock.judge != "oracle" && mock.judge != "hash") {
    throw ConfigError("config: mock.judge must be 'oracle' or 'hash'");
  }
  if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
    throw ConfigError("config: evaluate.max_missing_fraction must be in [0, 1]");
  }
  train.validate();
  inference.validate();
  generator.validate();
  judge.validate();
}

RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  Section root(doc, "");
  root.read("seed", cfg.seed);
  root.read("workers", cfg.workers);

  if (auto s = root.sub("paths")) {
    if (const auto* sources = s->raw("sources")) {
      if (!sources->is_array()) throw ConfigError("config: paths.sources must be an array");
      for (const auto& entry : *sources) {
        SourceSpec spec;
        if (entry.is_string()) {
          spec.path = entry.get<std::string>();
        } else {
          Section e(entry, "paths.sources[]");
          e.read_path("path", spec.path);
          e.read("tag", spec.tag);
          e.finish();
        }
        if (spec.path.empty()) throw ConfigError("config: paths.sources entry without a path");
        cfg.sources.push_back(std::move(spec));
      }
    }
    s->read_path("source", cfg.source_path);
    s->read_path("ingest_manifest", cfg.ingest_manifest);
    s->read_path("state", cfg.state_path);
    s->read_path("run_manifest", cfg.run_manifest);
    s->read_path("transcript", cfg.transcript);
    s->read_path("output", cfg.output);
    s->read_path("selection_report", cfg.selection_report);
    s->read_path("score_dump", cfg.score_dump);
    s->read_path("test_set", cfg.test_set);
    s->read_path("responses_a", cfg.responses_a);
    s->read_path("responses_b", cfg.responses_b);
    s->read_path("eval_report", cfg.eval_report);
    s->finish();
  }
  if (auto s = root.sub("ingest")) {
    s->read("n_per_source", cfg.n_per_source);
    s->finish();
  }
  if (auto s = root.sub("embedding")) {
    auto& e = cfg.embedding;
    s->read("provider", e.provider);
    s->read("dim", e.dim);
    s->read("seed", e.seed);
    s->read("endpoint", e.endpoint);
    s->read("timeout", e.timeout_seconds);
    s->read("max_retries", e.max_retries);
    s->read("max_batch", e.max_batch);
    s->read("api_key_env", e.api_key_env);
    s->finish();
  }
  if (auto s = root.sub("generator")) read_client(*s, cfg.generator);
  if (auto s = root.sub("judge")) read_client(*s, cfg.judge);
  if (auto s = root.sub("mock")) {
    s->read("judge", cfg.mock.judge);
    s->read("hard_z", cfg.mock.hard_z);
    s->finish();
  }
  if (auto s = root.sub("train")) {
    auto& t = cfg.train;
    s->read("batch_size", t.batch_size);
    s->read("subset_size", t.subset_size);
    s->read("k", t.k);
    s->read("alpha", t.alpha);
    s->read("val_threshold", t.val_threshold);
    s->read("max_iterations", t.max_iterations);
    s->read("kmeans_max_iter", t.kmeans_max_iter);
    s->read("learning_rate", t.optimizer.learning_rate);
    s->read("classifier_batch_size", t.optimizer.batch_size);
    s->read("max_epochs", t.optimizer.max_epochs);
    s->read("patience", t.optimizer.patience);
    s->finish();
  }
  if (auto s = root.sub("inference")) {
    auto& i = cfg.inference;
    s->read("selection_rate", i.selection_rate);
    s->read("subset_multiplier", i.subset_multiplier);
    s->read("subset_cap", i.subset_cap);
    s->read("alpha", i.alpha);
    s->read("k", i.k);
    s->read("kmeans_max_iter", i.kmeans_max_iter);
    s->read("include_hard_in_output", i.include_hard_in_output);
    s->finish();
  }
  if (auto s = root.sub("evaluate")) {
    s->read("max_missing_fraction", cfg.max_missing_fraction);
    s->finish();
  }
  root.finish();
  cfg.generator.seed = cfg.seed;
  cfg.judge.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  nlohmann::json doc;
  const auto ext = path.extension().string();
  if (ext == ".toml") {
    try {
      doc = toml_to_json(toml::parse(text, path.string()));
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "config: " << e.description() << " at " << e.source().begin;
      throw ConfigError(msg.str());
    }
  } else if (ext == ".json") {
    doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ConfigError("config: " + path.string() + " is not valid JSON");
  } else {
    throw ConfigError("config: unsupported extension '" + ext + "' (use .json or .toml)");
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return config_from_json(doc, base);
}

}  // namespace hardsel
