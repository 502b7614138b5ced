#include "hardsel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "hardsel/diversity.hpp"
#include "hardsel/errors.hpp"
#include "hardsel/parallel.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

namespace {

// Independent RNG streams per iteration.
enum Stream : std::uint64_t {
  kClusterStream = 1,
  kSubsetStream = 2,
  kPickStream = 3,
  kOrderStream = 4,
  kSplitStream = 5,
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t iteration, Stream s) {
  return derive_seed(seed, iteration * 16 + s);
}

constexpr std::size_t kEmbedChunk = 256;
constexpr char kStateFormat[] = "hardsel-pipeline-state";

}  // namespace

PipelineState initial_state(const Corpus& corpus, std::size_t dim, std::uint64_t seed) {
  PipelineState s;
  s.seed = seed;
  s.classifier = ClassifierModel(dim);
  s.remaining_ids.reserve(corpus.size());
  for (const auto& r : corpus.records()) s.remaining_ids.push_back(r.id);
  return s;
}

void TrainPhaseConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (batch_size > subset_size) throw ConfigError("train: batch_size must not exceed subset_size");
  if (k == 0) throw ConfigError("train: k must be >= 1");
  validate_alpha(alpha);
  if (!(val_threshold > 0.0 && val_threshold <= 1.0)) {
    throw ConfigError("train: val_threshold must be in (0, 1]");
  }
  if (kmeans_max_iter == 0) throw ConfigError("train: kmeans_max_iter must be >= 1");
  optimizer.validate();
}

void InferenceConfig::validate() const {
  if (!(selection_rate > 0.0 && selection_rate <= 1.0)) {
    throw ConfigError("inference: selection_rate must be in (0, 1]");
  }
  if (subset_multiplier == 0) throw ConfigError("inference: subset_multiplier must be >= 1");
  if (subset_cap == 0) throw ConfigError("inference: subset_cap must be >= 1");
  if (k == 0) throw ConfigError("inference: k must be >= 1");
  if (kmeans_max_iter == 0) throw ConfigError("inference: kmeans_max_iter must be >= 1");
  validate_alpha(alpha);
}

std::string prompt_text(const InstructionRecord& r) {
  if (is_blank(r.input)) return r.instruction;
  return r.instruction + "\n\n" + r.input;
}

std::vector<Embedding> embed_records(const Corpus& corpus, EmbeddingProvider& embedder,
                                     std::span<const std::string> ids, std::size_t workers) {
  std::vector<Embedding> out(ids.size());
  const std::size_t chunks = (ids.size() + kEmbedChunk - 1) / kEmbedChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * kEmbedChunk;
    const std::size_t end = std::min(ids.size(), begin + kEmbedChunk);
    std::vector<std::string> texts;
    texts.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) texts.push_back(prompt_text(corpus.at(ids[i])));
    auto vecs = embedder.embed_batch(texts);
    for (std::size_t i = begin; i < end; ++i) out[i] = std::move(vecs[i - begin]);
  });
  return out;
}

PipelineState run_training_iteration(const PipelineState& state, const TrainPhaseConfig& cfg,
                                     const PipelineContext& ctx) {
  cfg.validate();
  if (!ctx.corpus || !ctx.embedder || !ctx.generator || !ctx.judge) {
    throw ConfigError("pipeline: context is missing a corpus, embedder or client");
  }
  const Corpus& corpus = *ctx.corpus;
  const std::uint64_t iter = state.iteration;
  if (state.remaining_ids.size() < cfg.subset_size) {
    throw PhaseComplete("source pool has " + std::to_string(state.remaining_ids.size()) +
                        " records, fewer than subset_size " + std::to_string(cfg.subset_size));
  }

  // Diverse subset of the remaining pool.
  const auto pool_vectors = embed_records(corpus, *ctx.embedder, state.remaining_ids, ctx.workers);
  DiversityConfig dcfg;
  dcfg.k = std::min(cfg.k, state.remaining_ids.size());
  dcfg.per_cluster_quota = (cfg.subset_size + dcfg.k - 1) / dcfg.k;
  dcfg.max_iter = cfg.kmeans_max_iter;
  dcfg.seed = stream_seed(state.seed, iter, kClusterStream);
  const auto subset = diverse_subset_indices(pool_vectors, dcfg, cfg.subset_size,
                                             stream_seed(state.seed, iter, kSubsetStream));

  // Pick the batch.
  std::vector<std::size_t> picked;  // indices into the pool
  if (iter == 0) {
    Rng rng(stream_seed(state.seed, iter, kPickStream));
    for (std::size_t j : rng.sample_indices(subset.size(), cfg.batch_size)) picked.push_back(subset[j]);
  } else {
    std::vector<std::string> ids;
    std::vector<Embedding> vecs;
    ids.reserve(subset.size());
    vecs.reserve(subset.size());
    for (std::size_t i : subset) {
      ids.push_back(state.remaining_ids[i]);
      vecs.push_back(pool_vectors[i]);
    }
    const auto hard_vectors = embed_records(corpus, *ctx.embedder, state.hard_ids, ctx.workers);
    const HardSetIndex hard_index(hard_vectors);
    const auto scored = score_candidates(ids, vecs, state.classifier, hard_index, cfg.alpha, ctx.workers);
    for (const auto& c : rank_top_n(scored, cfg.batch_size)) picked.push_back(subset[c.tie_break_index]);
  }

  // Generate base-model answers.
  std::vector<std::pair<std::string, std::string>> prompts;
  prompts.reserve(picked.size());
  for (std::size_t i : picked) {
    const auto& r = corpus.at(state.remaining_ids[i]);
    prompts.emplace_back(r.instruction, r.input);
  }
  const auto generated = generate_batch(*ctx.generator, prompts, ctx.workers);

  std::vector<JudgeItem> items;
  std::vector<std::size_t> item_pool_index;
  for (std::size_t j = 0; j < picked.size(); ++j) {
    if (!generated.responses[j]) continue;
    const auto& r = corpus.at(state.remaining_ids[picked[j]]);
    items.push_back({r.id, prompt_text(r), r.response, *generated.responses[j]});
    item_pool_index.push_back(picked[j]);
  }
  if (items.empty()) throw ProviderError("every generation in the batch failed", true);

  // Judge.
  const std::size_t calls_before = ctx.judge->calls();
  const auto batch = label_batch(*ctx.judge, items, stream_seed(state.seed, iter, kOrderStream),
                                 ctx.workers);
  const std::size_t judge_calls = ctx.judge->calls() - calls_before;
  if (ctx.transcript_path) append_transcript(*ctx.transcript_path, batch);
  if (batch.hard.empty() && batch.easy.empty()) {
    throw ProviderError("every judgement in the batch failed", true);
  }

  // Merge labels, keeping selection order for the labeled examples.
  PipelineState next = state;
  std::unordered_map<std::string, Hardness> labels;
  for (const auto& p : batch.hard) labels.emplace(p.record_id, Hardness::kHard);
  for (const auto& p : batch.easy) labels.emplace(p.record_id, Hardness::kEasy);
  std::unordered_set<std::size_t> judged_pool_index;
  for (std::size_t j = 0; j < items.size(); ++j) {
    auto it = labels.find(items[j].record_id);
    if (it == labels.end()) continue;
    const std::size_t pool_i = item_pool_index[j];
    judged_pool_index.insert(pool_i);
    (it->second == Hardness::kHard ? next.hard_ids : next.easy_ids).push_back(items[j].record_id);
    next.labeled_examples.push_back({pool_vectors[pool_i], it->second, items[j].record_id});
  }

  auto trained = train_incremental(state.classifier, next.labeled_examples,
                                   stream_seed(state.seed, iter, kSplitStream), cfg.optimizer);
  next.classifier = std::move(trained.model);

  std::vector<std::string> remaining;
  remaining.reserve(state.remaining_ids.size() - judged_pool_index.size());
  for (std::size_t i = 0; i < state.remaining_ids.size(); ++i) {
    if (!judged_pool_index.contains(i)) remaining.push_back(state.remaining_ids[i]);
  }
  next.remaining_ids = std::move(remaining);

  HistoryRow row;
  row.iteration = iter;
  row.hard_count = batch.hard.size();
  row.easy_count = batch.easy.size();
  row.failed_count = generated.failed + batch.failed.size();
  row.val_accuracy = trained.report.val_accuracy;
  row.train_size = trained.report.train_size;
  row.val_size = trained.report.val_size;
  row.judge_calls = judge_calls;
  next.history.push_back(row);
  next.iteration = iter + 1;
  next.converged = row.val_accuracy > cfg.val_threshold;

  spdlog::info("iteration {}: hard {} easy {} failed {} val_acc {:.4f}", iter, row.hard_count,
               row.easy_count, row.failed_count, row.val_accuracy);
  return next;
}

PipelineState run_training_phase(PipelineState state, const TrainPhaseConfig& cfg,
                                 const PipelineContext& ctx,
                                 const std::function<void(const PipelineState&)>& after_iteration) {
  cfg.validate();
  while (!state.converged && state.iteration < cfg.max_iterations) {
    try {
      state = run_training_iteration(state, cfg, ctx);
    } catch (const PhaseComplete& e) {
      spdlog::warn("training phase stopped early: {}", e.what());
      break;
    }
    if (after_iteration) after_iteration(state);
  }
  return state;
}

std::size_t selection_count(std::size_t remaining, double rate) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(remaining) * rate + 0.5));
}

std::size_t inference_subset_size(std::size_t pool, const InferenceConfig& cfg) {
  return std::min({cfg.subset_multiplier * selection_count(pool, cfg.selection_rate), cfg.subset_cap, pool});
}

SelectionResult run_inference_selection(const PipelineState& state, const InferenceConfig& cfg,
                                        const Corpus& corpus, EmbeddingProvider& embedder,
                                        std::size_t workers) {
  cfg.validate();
  if (state.classifier.version() == 0) {
    throw ConfigError("inference: the state holds no trained classifier; run train-policy first");
  }
  if (state.classifier.dim() != embedder.dim()) {
    throw ConfigError("inference: classifier dim " + std::to_string(state.classifier.dim()) +
                      " does not match embedder dim " + std::to_string(embedder.dim()));
  }

  SelectionResult result;
  result.hard_count = state.hard_ids.size();
  const std::size_t pool = state.remaining_ids.size();
  result.n_sel = selection_count(pool, cfg.selection_rate);

  std::unordered_set<std::string> emitted;
  if (cfg.include_hard_in_output) {
    for (const auto& id : state.hard_ids) {
      if (emitted.insert(id).second) result.records.push_back(corpus.at(id));
    }
  }
  if (result.n_sel == 0) {
    spdlog::warn("selection rate {} yields no new records from a pool of {}; emitting the hard set only",
                 cfg.selection_rate, pool);
    return result;
  }

  result.subset_size = inference_subset_size(pool, cfg);
  const auto pool_vectors = embed_records(corpus, embedder, state.remaining_ids, workers);
  DiversityConfig dcfg;
  dcfg.k = std::min(cfg.k, pool);
  dcfg.per_cluster_quota = (result.subset_size + dcfg.k - 1) / dcfg.k;
  dcfg.max_iter = cfg.kmeans_max_iter;
  dcfg.seed = derive_seed(state.seed, 0xfeed0001);
  const auto subset = diverse_subset_indices(pool_vectors, dcfg, result.subset_size,
                                             derive_seed(state.seed, 0xfeed0002));

  std::vector<std::string> ids;
  std::vector<Embedding> vecs;
  ids.reserve(subset.size());
  vecs.reserve(subset.size());
  for (std::size_t i : subset) {
    ids.push_back(state.remaining_ids[i]);
    vecs.push_back(pool_vectors[i]);
  }
  const auto hard_vectors = embed_records(corpus, embedder, state.hard_ids, workers);
  const HardSetIndex hard_index(hard_vectors);
  result.scored = score_candidates(ids, vecs, state.classifier, hard_index, cfg.alpha, workers);
  result.top = rank_top_n(result.scored, result.n_sel);

  const std::unordered_set<std::string> hard_set(state.hard_ids.begin(), state.hard_ids.end());
  for (const auto& c : result.top) {
    if (hard_set.contains(c.record_id)) ++result.overlap;
    if (emitted.insert(c.record_id).second) result.records.push_back(corpus.at(c.record_id));
  }
  return result;
}

nlohmann::json state_to_json(const PipelineState& s) {
  nlohmann::json examples = nlohmann::json::array();
  for (const auto& ex : s.labeled_examples) {
    examples.push_back({{"id", ex.record_id},
                        {"label", static_cast<int>(ex.label)},
                        {"embedding", std::vector<double>(ex.embedding.values().begin(),
                                                          ex.embedding.values().end())}});
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : s.history) {
    history.push_back({{"iteration", h.iteration},
                       {"hard_count", h.hard_count},
                       {"easy_count", h.easy_count},
                       {"failed_count", h.failed_count},
                       {"val_accuracy", h.val_accuracy},
                       {"train_size", h.train_size},
                       {"val_size", h.val_size},
                       {"judge_calls", h.judge_calls}});
  }
  return nlohmann::json{{"format", kStateFormat},
                        {"version", kStateFormatVersion},
                        {"iteration", s.iteration},
                        {"seed", s.seed},
                        {"converged", s.converged},
                        {"remaining_ids", s.remaining_ids},
                        {"hard_ids", s.hard_ids},
                        {"easy_ids", s.easy_ids},
                        {"labeled_examples", std::move(examples)},
                        {"classifier", classifier_to_json(s.classifier)},
                        {"history", std::move(history)}};
}

PipelineState state_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != kStateFormat) {
    throw ParseError("not a pipeline state file");
  }
  const auto version = j.value("version", -1);
  if (version != kStateFormatVersion) {
    throw ParseError("unsupported state format version " + std::to_string(version) +
                     " (expected " + std::to_string(kStateFormatVersion) + ")");
  }
  try {
    PipelineState s;
    s.iteration = j.at("iteration").get<std::uint64_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.converged = j.at("converged").get<bool>();
    s.remaining_ids = j.at("remaining_ids").get<std::vector<std::string>>();
    s.hard_ids = j.at("hard_ids").get<std::vector<std::string>>();
    s.easy_ids = j.at("easy_ids").get<std::vector<std::string>>();
    for (const auto& ex : j.at("labeled_examples")) {
      const int label = ex.at("label").get<int>();
      if (label != 0 && label != 1) throw ParseError("labeled example with label " + std::to_string(label));
      s.labeled_examples.push_back({Embedding(ex.at("embedding").get<std::vector<double>>()),
                                    static_cast<Hardness>(label), ex.at("id").get<std::string>()});
    }
    s.classifier = classifier_from_json(j.at("classifier"));
    for (const auto& h : j.at("history")) {
      HistoryRow row;
      row.iteration = h.at("iteration").get<std::uint64_t>();
      row.hard_count = h.at("hard_count").get<std::size_t>();
      row.easy_count = h.at("easy_count").get<std::size_t>();
      row.failed_count = h.at("failed_count").get<std::size_t>();
      row.val_accuracy = h.at("val_accuracy").get<double>();
      row.train_size = h.at("train_size").get<std::size_t>();
      row.val_size = h.at("val_size").get<std::size_t>();
      row.judge_calls = h.at("judge_calls").get<std::size_t>();
      s.history.push_back(row);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("state file: ") + e.what());
  } catch (const ContractError& e) {
    throw ParseError(std::string("state file: ") + e.what());
  }
}

void save_state(const PipelineState& state, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << state_to_json(state).dump() << '\n';
    if (!out.flush()) throw IoError("write error on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

PipelineState load_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError(path.string() + ": corrupt state file (not JSON)");
  return state_from_json(j);
}

nlohmann::json training_manifest(const PipelineState& state, std::size_t source_size) {
  nlohmann::json rows = nlohmann::json::array();
  std::size_t judge_calls = 0;
  for (const auto& h : state.history) {
    rows.push_back({{"iteration", h.iteration},
                    {"hard", h.hard_count},
                    {"easy", h.easy_count},
                    {"failed", h.failed_count},
                    {"val_accuracy", h.val_accuracy}});
    judge_calls += h.judge_calls;
  }
  return nlohmann::json{{"phase", "train"},
                        {"iterations", state.history.size()},
                        {"converged", state.converged},
                        {"source_size", source_size},
                        {"remaining", state.remaining_ids.size()},
                        {"hard_total", state.hard_ids.size()},
                        {"easy_total", state.easy_ids.size()},
                        {"judge_calls", judge_calls},
                        {"classifier_version", state.classifier.version()},
                        {"history", std::move(rows)}};
}

}  // namespace hardsel
