// Per-attribute binary logistic classifiers trained online by SGD, and
// confidence banding against base/positive thresholds.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gwl/attributes.hpp"
#include "gwl/vision.hpp"

namespace gwl {

using vision::FeatureVector;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double sigmoid(double z);

struct SgdParams {
  double eta0 = 4.0;
  double l2 = 1e-4;
};

struct TrainingJudgement {
  FeatureVector features;
  Attribute attribute;
  bool positive = true;
};

struct AttributeClassifier {
  Attribute attribute = Attribute::Red;
  std::vector<double> weights = std::vector<double>(vision::kFeatureDim, 0.0);
  double bias = 0.0;
  std::uint64_t updates_seen = 0;

  double margin(std::span<const double> x) const;
  double predict_prob(std::span<const double> x) const { return sigmoid(margin(x)); }

  // Step size for the next update: eta0 / (1 + eta0 * l2 * t).
  double learning_rate(const SgdParams& p) const;

  // One SGD step on L2-regularized logistic loss (bias unregularized).
  void update(std::span<const double> x, bool positive, const SgdParams& p);

  bool operator==(const AttributeClassifier&) const = default;
};

double predict_prob(const AttributeClassifier& c, const FeatureVector& x);
AttributeClassifier sgd_update(AttributeClassifier c, const TrainingJudgement& j, const SgdParams& p);

// Regularized logistic loss for one example, the objective sgd_update descends.
double logistic_loss(const AttributeClassifier& c, std::span<const double> x, bool positive, double l2);

struct ConfidenceBands {
  double base = 0.5;
  double positive = 0.9;

  ConfidenceBands() = default;
  ConfidenceBands(double base_threshold, double positive_threshold);
};

enum class Band { Unknown, Unsure, Confident };

std::string_view name(Band b);

Band band_of(double prob, const ConfidenceBands& bands);

struct Verdict {
  Category category = Category::Colour;
  std::optional<Attribute> best;
  double prob = 0.0;
  Band band = Band::Unknown;
};

using CategoryVerdicts = std::array<Verdict, 2>;

class ClassifierRegistry {
 public:
  // Creates the classifier on first mention; `category` comes from the
  // question that introduced the word.
  AttributeClassifier& ensure(Attribute a, Category category);
  AttributeClassifier& ensure(Attribute a) { return ensure(a, category_of(a)); }

  const AttributeClassifier* find(Attribute a) const;
  bool contains(Attribute a) const { return find(a) != nullptr; }
  std::size_t size() const { return classifiers_.size(); }

  std::optional<Category> category(Attribute a) const;
  std::vector<Attribute> members(Category c) const;

  // Missing classifiers predict 0.5.
  double prob(Attribute a, const FeatureVector& x) const;

  void train(const TrainingJudgement& j, const SgdParams& p);

  // Best attribute per category among existing classifiers, skipping `exclude`.
  CategoryVerdicts classify_bands(const FeatureVector& x, const ConfidenceBands& bands,
                                  std::span<const Attribute> exclude = {}) const;

  const std::map<Attribute, AttributeClassifier>& classifiers() const { return classifiers_; }

  bool operator==(const ClassifierRegistry&) const = default;

  void save(const std::filesystem::path& path, const ConfidenceBands& bands) const;
  // Returns the registry and the bands stored with it.
  static std::pair<ClassifierRegistry, ConfidenceBands> load(const std::filesystem::path& path);

 private:
  std::map<Attribute, AttributeClassifier> classifiers_;
  std::map<Attribute, Category> categories_;
};

}  // namespace gwl
