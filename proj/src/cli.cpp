#include "hardsel/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "hardsel/corpus.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/evalharness.hpp"
#include "hardsel/pipeline.hpp"
#include "hardsel/scoring.hpp"

namespace hardsel::cli {

namespace {

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// Exclusive lock file next to the state path; removed on scope exit.
class StateLock {
 public:
  explicit StateLock(const std::filesystem::path& state_path) : path_(state_path) {
    path_ += ".lock";
    ensure_parent(path_);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw ConfigError("state " + state_path.string() + " is locked by another run (" +
                        path_.string() + ")");
    }
  }
  ~StateLock() {
    ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  StateLock(const StateLock&) = delete;
  StateLock& operator=(const StateLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

bool use_mock(const RunConfig& cfg, const GenerationConfig& c) {
  return cfg.force_mock || c.is_mock();
}

Corpus load_source(const RunConfig& cfg) {
  const auto path = cfg.resolve(cfg.source_path);
  if (!std::filesystem::exists(path)) {
    throw IoError("source " + path.string() + " not found; run ingest first");
  }
  return Corpus(read_records_jsonl(path));
}

}  // namespace

Providers make_providers(const RunConfig& cfg) {
  Providers p;
  std::shared_ptr<EmbeddingProvider> base;
  if (cfg.force_mock || cfg.embedding.provider == "hash") {
    base = std::make_shared<HashEmbedder>(cfg.embedding.dim, cfg.embedding.seed);
  } else {
    RemoteEmbedderConfig rc;
    rc.endpoint = cfg.embedding.endpoint;
    rc.dim = cfg.embedding.dim;
    rc.timeout_seconds = cfg.embedding.timeout_seconds;
    rc.max_retries = cfg.embedding.max_retries;
    rc.max_batch = cfg.embedding.max_batch;
    rc.api_key_env = cfg.embedding.api_key_env;
    base = std::make_shared<RemoteEmbedder>(rc);
  }
  p.embedder = std::make_shared<CachingEmbedder>(base);

  if (use_mock(cfg, cfg.generator)) {
    p.generator = std::make_shared<MockGenerationClient>(cfg.seed);
  } else {
    p.generator = std::make_shared<RemoteGenerationClient>(cfg.generator);
  }

  if (use_mock(cfg, cfg.judge)) {
    if (cfg.mock.judge == "oracle") {
      p.oracle = std::make_shared<mock::HyperplaneOracle>(p.embedder, cfg.seed, cfg.mock.hard_z);
      p.judge = std::make_shared<mock::PreferenceJudge>(p.oracle->scorer());
    } else {
      p.judge = std::make_shared<mock::PreferenceJudge>(mock::hash_scorer(cfg.seed));
    }
  } else {
    p.judge = std::make_shared<RemoteChatClient>(cfg.judge);
  }
  return p;
}

nlohmann::json cmd_ingest(const RunConfig& cfg) {
  if (cfg.sources.empty()) throw ConfigError("ingest: paths.sources is empty");
  std::vector<SourcePool> pools;
  for (const auto& src : cfg.sources) {
    const auto path = cfg.resolve(src.path);
    if (!std::filesystem::exists(path)) throw IoError("source file " + path.string() + " not found");
    pools.push_back(load_jsonl(path, src.tag));
  }
  const auto sample = sample_per_source(pools, cfg.n_per_source, cfg.seed);
  Corpus check(sample);  // rejects id collisions across pools

  const auto out_path = cfg.resolve(cfg.source_path);
  ensure_parent(out_path);
  write_jsonl(out_path, sample);

  nlohmann::json per_source = nlohmann::json::array();
  for (const auto& pool : pools) {
    std::size_t sampled = 0;
    for (const auto& r : sample) sampled += r.source_tag == pool.tag ? 1 : 0;
    per_source.push_back({{"tag", pool.tag},
                          {"loaded", pool.records.size()},
                          {"dropped", pool.dropped},
                          {"sampled", sampled}});
  }
  nlohmann::json manifest{{"total", sample.size()},
                          {"n_per_source", cfg.n_per_source},
                          {"seed", cfg.seed},
                          {"sources", std::move(per_source)}};
  write_json(cfg.resolve(cfg.ingest_manifest), manifest);
  spdlog::info("ingested {} records from {} source(s)", sample.size(), pools.size());
  return manifest;
}

nlohmann::json cmd_train_policy(const RunConfig& cfg, const Providers& providers) {
  const Corpus corpus = load_source(cfg);
  const auto state_path = cfg.resolve(cfg.state_path);
  StateLock lock(state_path);

  PipelineState state;
  if (std::filesystem::exists(state_path)) {
    state = load_state(state_path);
    if (state.classifier.dim() != providers.embedder->dim()) {
      throw ConfigError("state classifier dim does not match embedding.dim");
    }
    spdlog::info("resuming from {} at iteration {}", state_path.string(), state.iteration);
  } else {
    state = initial_state(corpus, providers.embedder->dim(), cfg.seed);
  }

  PipelineContext ctx;
  ctx.corpus = &corpus;
  ctx.embedder = providers.embedder.get();
  ctx.generator = providers.generator.get();
  ctx.judge = providers.judge.get();
  ctx.workers = cfg.workers;
  if (!cfg.transcript.empty()) {
    ctx.transcript_path = cfg.resolve(cfg.transcript);
    ensure_parent(*ctx.transcript_path);
  }

  state = run_training_phase(std::move(state), cfg.train, ctx,
                             [&](const PipelineState& s) { save_state(s, state_path); });
  save_state(state, state_path);
  auto manifest = training_manifest(state, corpus.size());
  write_json(cfg.resolve(cfg.run_manifest), manifest);
  return manifest;
}

nlohmann::json cmd_select(const RunConfig& cfg, const Providers& providers) {
  const auto state_path = cfg.resolve(cfg.state_path);
  if (!std::filesystem::exists(state_path)) {
    throw IoError("state " + state_path.string() + " not found; run train-policy first");
  }
  const Corpus corpus = load_source(cfg);
  StateLock lock(state_path);
  const PipelineState state = load_state(state_path);

  const auto result =
      run_inference_selection(state, cfg.inference, corpus, *providers.embedder, cfg.workers);
  const auto out_path = cfg.resolve(cfg.output);
  ensure_parent(out_path);
  write_jsonl(out_path, result.records);
  if (!cfg.score_dump.empty()) {
    ensure_parent(cfg.resolve(cfg.score_dump));
    write_score_dump(cfg.resolve(cfg.score_dump).string(), result.scored);
  }

  nlohmann::json report{{"pool_size", state.remaining_ids.size()},
                        {"selection_rate", cfg.inference.selection_rate},
                        {"n_sel", result.n_sel},
                        {"subset_size", result.subset_size},
                        {"hard_count", result.hard_count},
                        {"overlap", result.overlap},
                        {"include_hard_in_output", cfg.inference.include_hard_in_output},
                        {"output_count", result.records.size()}};
  if (result.n_sel == 0) report["warning"] = "selection rate yields no new records; hard set only";
  write_json(cfg.resolve(cfg.selection_report), report);
  return report;
}

nlohmann::json cmd_evaluate(const RunConfig& cfg, const Providers& providers) {
  if (cfg.test_set.empty() || cfg.responses_a.empty() || cfg.responses_b.empty()) {
    throw ConfigError("evaluate: test_set, responses_a and responses_b are required");
  }
  const auto test = load_test_set(cfg.resolve(cfg.test_set));
  const auto a = load_responses(cfg.resolve(cfg.responses_a));
  const auto b = load_responses(cfg.resolve(cfg.responses_b));
  const auto report =
      evaluate_models(*providers.judge, test, a, b, cfg.max_missing_fraction, cfg.workers);
  auto doc = report_to_json(report);
  write_json(cfg.resolve(cfg.eval_report), doc);
  return doc;
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const EmptyPoolError*>(&e) || dynamic_cast<const ParseError*>(&e)) {
    return kExitConfig;
  }
  return kExitRuntime;
}

int run(int argc, char** argv) {
  CLI::App app{"hardsel: iterative hard-instruction data selection"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool mock = false;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON or TOML run configuration");
  app.add_option("--seed", seed, "RNG seed (overrides the config)");
  app.add_option("--workers", workers, "Concurrent requests / threads");
  app.add_flag("--mock", mock, "Use offline mock embedder, base model and judge");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only; no summary on stdout");

  auto* ingest = app.add_subcommand("ingest", "Sample sources into the unified source set");
  std::optional<std::size_t> n_per_source;
  ingest->add_option("--n-per-source", n_per_source, "Records sampled from each source");

  auto* train = app.add_subcommand("train-policy", "Iteratively train the hardness classifier");
  std::optional<std::size_t> max_iterations;
  train->add_option("--max-iterations", max_iterations, "Stop after this many iterations in total");

  auto* select = app.add_subcommand("select", "Select the final dataset with the trained policy");
  std::optional<double> rate;
  select->add_option("--rate", rate, "Selection rate in (0, 1]");
  std::string output;
  select->add_option("--output", output, "Output JSONL (overrides paths.output)");

  auto* evaluate = app.add_subcommand("evaluate", "Two-round pairwise model comparison");
  std::string test_set, responses_a, responses_b, report_path;
  evaluate->add_option("--test-set", test_set, "Test-set JSONL");
  evaluate->add_option("--responses-a", responses_a, "Model 1 responses JSONL");
  evaluate->add_option("--responses-b", responses_b, "Model 2 responses JSONL");
  evaluate->add_option("--report", report_path, "Report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(quiet     ? spdlog::level::err
                    : verbose ? spdlog::level::debug
                              : spdlog::level::info);

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    cfg.generator.seed = cfg.seed;
    cfg.judge.seed = cfg.seed;
    if (workers) cfg.workers = *workers;
    if (mock) cfg.force_mock = true;
    if (n_per_source) cfg.n_per_source = *n_per_source;
    if (max_iterations) cfg.train.max_iterations = *max_iterations;
    if (rate) cfg.inference.selection_rate = *rate;
    if (!output.empty()) cfg.output = std::filesystem::absolute(output);
    if (!test_set.empty()) cfg.test_set = std::filesystem::absolute(test_set);
    if (!responses_a.empty()) cfg.responses_a = std::filesystem::absolute(responses_a);
    if (!responses_b.empty()) cfg.responses_b = std::filesystem::absolute(responses_b);
    if (!report_path.empty()) cfg.eval_report = std::filesystem::absolute(report_path);
    cfg.validate();

    nlohmann::json result;
    if (*ingest) {
      result = cmd_ingest(cfg);
    } else {
      const Providers providers = make_providers(cfg);
      if (*train) result = cmd_train_policy(cfg, providers);
      if (*select) result = cmd_select(cfg, providers);
      if (*evaluate) {
        result = cmd_evaluate(cfg, providers);
        if (!quiet) std::cout << "winning_score " << result["winning_score"].get<double>() << '\n';
        return kExitOk;
      }
    }
    if (!quiet) std::cout << result.dump(2) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  }
}

}  // namespace hardsel::cli
