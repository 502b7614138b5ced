#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hardsel/embedding.hpp"

namespace hardsel {

/// Class labels. Hard means the base model did not beat the reference.
enum class Hardness : int { kHard = 0, kEasy = 1 };

struct TrainingExample {
  Embedding embedding;
  Hardness label = Hardness::kHard;
  std::string record_id;

  bool operator==(const TrainingExample&) const = default;
};

/// Two-logit affine head: z = W·v + b with z[0] the "hard" logit.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  /// Zero-initialised model of the given dimension, version 0.
  explicit ClassifierModel(std::size_t dim);
  ClassifierModel(std::array<std::vector<double>, 2> weights, std::array<double, 2> bias,
                  std::uint64_t version);

  std::size_t dim() const noexcept { return weights_[0].size(); }
  std::uint64_t version() const noexcept { return version_; }
  const std::array<std::vector<double>, 2>& weights() const noexcept { return weights_; }
  const std::array<double, 2>& bias() const noexcept { return bias_; }

  std::array<double, 2> logits(std::span<const double> v) const;
  std::array<double, 2> logits(const Embedding& v) const;

  /// Argmax of the logits; z0 == z1 resolves to hard.
  Hardness predict(const Embedding& v) const;

  bool operator==(const ClassifierModel&) const = default;

 private:
  friend class ClassifierTrainer;
  std::array<std::vector<double>, 2> weights_;
  std::array<double, 2> bias_{0.0, 0.0};
  std::uint64_t version_ = 0;
};

/// P(hard | logits) = exp(z0) / (exp(z0) + exp(z1)), computed stably.
double hard_probability(double z0, double z1) noexcept;

/// Model score M(x): probability of the hard class. Throws ConfigError on
/// dimension mismatch.
double model_score(const ClassifierModel& model, const Embedding& v);

/// Fraction of examples whose predicted class equals the label.
double validation_accuracy(const ClassifierModel& model, std::span<const TrainingExample> examples);

/// Mean cross-entropy of the softmax over the two logits.
double cross_entropy_loss(const ClassifierModel& model, std::span<const TrainingExample> examples);

/// Gradient of cross_entropy_loss, laid out like the model parameters.
struct ModelGradient {
  std::array<std::vector<double>, 2> weights;
  std::array<double, 2> bias{0.0, 0.0};
};
ModelGradient cross_entropy_gradient(const ClassifierModel& model,
                                     std::span<const TrainingExample> examples);

struct OptimizerConfig {
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;  // epochs without validation improvement
  double val_fraction = 0.2;

  void validate() const;
};

struct TrainReport {
  double val_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
  bool single_class = false;
};

struct TrainResult {
  ClassifierModel model;
  TrainReport report;
};

/// Continues training from `model` on `examples`. The examples are shuffled
/// with split_seed and round(val_fraction·n) are held out. Mini-batch
/// gradient descent runs until max_epochs or until validation accuracy has
/// not improved for `patience` epochs; the best-validation parameters are
/// returned (the starting point counts as a candidate). Returns a new model
/// with version + 1; the input is never modified. Throws ConfigError for
/// fewer than 5 examples or mismatched dimensions.
TrainResult train_incremental(const ClassifierModel& model,
                              std::span<const TrainingExample> examples, std::uint64_t split_seed,
                              const OptimizerConfig& optimizer = {});

/// {"dim", "version", "weights": [[...],[...]], "bias": [a, b]}
nlohmann::json classifier_to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hardsel
