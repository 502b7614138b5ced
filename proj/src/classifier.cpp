#include "hardsel/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "hardsel/errors.hpp"
#include "hardsel/kernels.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

ClassifierModel::ClassifierModel(std::size_t dim) {
  if (dim == 0) throw ConfigError("classifier: dim must be >= 1");
  weights_ = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
}

ClassifierModel::ClassifierModel(std::array<std::vector<double>, 2> weights,
                                 std::array<double, 2> bias, std::uint64_t version)
    : weights_(std::move(weights)), bias_(bias), version_(version) {
  if (weights_[0].empty() || weights_[0].size() != weights_[1].size()) {
    throw ConfigError("classifier: weight rows must be non-empty and equal length");
  }
  for (const auto& row : weights_) {
    for (double w : row) {
      if (!std::isfinite(w)) throw ConfigError("classifier: non-finite weight");
    }
  }
  if (!std::isfinite(bias_[0]) || !std::isfinite(bias_[1])) {
    throw ConfigError("classifier: non-finite bias");
  }
}

std::array<double, 2> ClassifierModel::logits(std::span<const double> v) const {
  return {simd::dot(weights_[0], v) + bias_[0], simd::dot(weights_[1], v) + bias_[1]};
}

std::array<double, 2> ClassifierModel::logits(const Embedding& v) const {
  if (v.dim() != dim()) {
    throw ConfigError("classifier: embedding dim " + std::to_string(v.dim()) +
                      " does not match model dim " + std::to_string(dim()));
  }
  return logits(v.values());
}

Hardness ClassifierModel::predict(const Embedding& v) const {
  const auto z = logits(v);
  return z[0] >= z[1] ? Hardness::kHard : Hardness::kEasy;
}

double hard_probability(double z0, double z1) noexcept {
  // exp(z0)/(exp(z0)+exp(z1)) with the larger logit factored out.
  if (z0 >= z1) return 1.0 / (1.0 + std::exp(z1 - z0));
  const double e = std::exp(z0 - z1);
  return e / (1.0 + e);
}

double model_score(const ClassifierModel& model, const Embedding& v) {
  const auto z = model.logits(v);
  return hard_probability(z[0], z[1]);
}

double validation_accuracy(const ClassifierModel& model,
                           std::span<const TrainingExample> examples) {
  if (examples.empty()) throw ConfigError("validation_accuracy: no examples");
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (model.predict(ex.embedding) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

namespace {

// log(exp(z0) + exp(z1)) - z_label
double example_loss(const std::array<double, 2>& z, Hardness label) {
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[static_cast<int>(label)];
}

void check_dims(const ClassifierModel& model, std::span<const TrainingExample> examples) {
  for (const auto& ex : examples) {
    if (ex.embedding.dim() != model.dim()) {
      throw ConfigError("classifier: example '" + ex.record_id + "' has dim " +
                        std::to_string(ex.embedding.dim()) + ", model expects " +
                        std::to_string(model.dim()));
    }
  }
}

}  // namespace

double cross_entropy_loss(const ClassifierModel& model, std::span<const TrainingExample> examples) {
  if (examples.empty()) throw ConfigError("cross_entropy_loss: no examples");
  check_dims(model, examples);
  double total = 0.0;
  for (const auto& ex : examples) total += example_loss(model.logits(ex.embedding.values()), ex.label);
  return total / static_cast<double>(examples.size());
}

ModelGradient cross_entropy_gradient(const ClassifierModel& model,
                                     std::span<const TrainingExample> examples) {
  if (examples.empty()) throw ConfigError("cross_entropy_gradient: no examples");
  check_dims(model, examples);
  ModelGradient g;
  g.weights = {std::vector<double>(model.dim(), 0.0), std::vector<double>(model.dim(), 0.0)};
  const double scale = 1.0 / static_cast<double>(examples.size());
  for (const auto& ex : examples) {
    const auto z = model.logits(ex.embedding.values());
    const double p0 = hard_probability(z[0], z[1]);
    // dL/dz_c = softmax_c - onehot_c
    const double d0 = (p0 - (ex.label == Hardness::kHard ? 1.0 : 0.0)) * scale;
    const double d1 = -d0;
    simd::axpy(d0, ex.embedding.values(), g.weights[0]);
    simd::axpy(d1, ex.embedding.values(), g.weights[1]);
    g.bias[0] += d0;
    g.bias[1] += d1;
  }
  return g;
}

void OptimizerConfig::validate() const {
  if (batch_size == 0) throw ConfigError("optimizer: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer: learning_rate must be positive");
  }
  if (max_epochs == 0) throw ConfigError("optimizer: max_epochs must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("optimizer: val_fraction must be in (0, 1)");
  }
}

class ClassifierTrainer {
 public:
  static void step(ClassifierModel& model, const ModelGradient& g, double lr) {
    for (int c = 0; c < 2; ++c) {
      simd::axpy(-lr, g.weights[c], model.weights_[c]);
      model.bias_[c] -= lr * g.bias[c];
    }
  }
};

TrainResult train_incremental(const ClassifierModel& model,
                              std::span<const TrainingExample> examples, std::uint64_t split_seed,
                              const OptimizerConfig& optimizer) {
  optimizer.validate();
  if (examples.size() < 5) {
    throw ConfigError("train_incremental: need at least 5 examples, got " +
                      std::to_string(examples.size()));
  }
  check_dims(model, examples);

  const std::size_t n = examples.size();
  std::size_t hard = 0;
  for (const auto& ex : examples) hard += ex.label == Hardness::kHard ? 1 : 0;
  const bool single_class = hard == 0 || hard == n;
  if (single_class) {
    spdlog::warn("train_incremental: all {} examples carry the same label", n);
  } else if (hard * 10 > n * 8 || hard * 10 < n * 2) {
    spdlog::warn("train_incremental: class imbalance, {} hard / {} easy", hard, n - hard);
  }

  Rng rng(split_seed);
  std::vector<const TrainingExample*> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = &examples[i];
  rng.shuffle(order);

  const auto val_size = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(optimizer.val_fraction * static_cast<double>(n) + 0.5)),
      1, n - 1);
  std::vector<TrainingExample> val;
  std::vector<TrainingExample> train;
  for (std::size_t i = 0; i < n; ++i) (i < val_size ? val : train).push_back(*order[i]);

  ClassifierModel current = model;
  ClassifierModel best = model;
  double best_acc = validation_accuracy(model, val);
  double best_loss = cross_entropy_loss(model, val);
  std::size_t since_improvement = 0;
  std::size_t epochs = 0;

  std::vector<std::size_t> perm(train.size());
  std::vector<TrainingExample> batch;
  batch.reserve(optimizer.batch_size);
  for (std::size_t epoch = 0; epoch < optimizer.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    for (std::size_t start = 0; start < perm.size(); start += optimizer.batch_size) {
      batch.clear();
      const std::size_t end = std::min(perm.size(), start + optimizer.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[perm[i]]);
      ClassifierTrainer::step(current, cross_entropy_gradient(current, batch),
                              optimizer.learning_rate);
    }
    ++epochs;
    // Equal accuracy with lower validation loss still counts as progress;
    // otherwise a majority-class plateau ends training before the weights move.
    const double acc = validation_accuracy(current, val);
    const double loss = cross_entropy_loss(current, val);
    if (acc > best_acc || (acc == best_acc && loss < best_loss)) {
      best_acc = acc;
      best_loss = loss;
      best = current;
      since_improvement = 0;
    } else if (++since_improvement >= optimizer.patience) {
      break;
    }
  }

  TrainReport report;
  report.val_accuracy = best_acc;
  report.train_size = train.size();
  report.val_size = val.size();
  report.epochs_run = epochs;
  report.final_loss = cross_entropy_loss(best, train);
  report.single_class = single_class;
  best = ClassifierModel(best.weights(), best.bias(), model.version() + 1);
  return {std::move(best), report};
}

nlohmann::json classifier_to_json(const ClassifierModel& model) {
  return nlohmann::json{{"dim", model.dim()},
                        {"version", model.version()},
                        {"weights", {model.weights()[0], model.weights()[1]}},
                        {"bias", {model.bias()[0], model.bias()[1]}}};
}

ClassifierModel classifier_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto& w = j.at("weights");
    const auto& b = j.at("bias");
    if (!w.is_array() || w.size() != 2 || !b.is_array() || b.size() != 2) {
      throw ParseError("checkpoint: weights must be 2 rows and bias 2 values");
    }
    std::array<std::vector<double>, 2> weights{w[0].get<std::vector<double>>(),
                                               w[1].get<std::vector<double>>()};
    if (weights[0].size() != dim || weights[1].size() != dim) {
      throw ParseError("checkpoint: weight rows do not match dim");
    }
    return ClassifierModel(std::move(weights), {b[0].get<double>(), b[1].get<double>()},
                           j.at("version").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ClassifierModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << classifier_to_json(model).dump() << '\n';
}

ClassifierModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError(path.string() + ": not valid JSON");
  return classifier_from_json(j);
}

}  // namespace hardsel
