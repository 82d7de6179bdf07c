#include "gwl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace gwl {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double AttributeClassifier::margin(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw DimensionMismatch("feature length " + std::to_string(x.size()) + " != weight length " +
                            std::to_string(weights.size()));
  }
  double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

double AttributeClassifier::learning_rate(const SgdParams& p) const {
  return p.eta0 / (1.0 + p.eta0 * p.l2 * static_cast<double>(updates_seen));
}

void AttributeClassifier::update(std::span<const double> x, bool positive, const SgdParams& p) {
  const double err = predict_prob(x) - (positive ? 1.0 : 0.0);
  const double eta = learning_rate(p);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] -= eta * (err * x[i] + p.l2 * weights[i]);
  }
  bias -= eta * err;
  ++updates_seen;
}

double predict_prob(const AttributeClassifier& c, const FeatureVector& x) {
  return c.predict_prob(x.values);
}

AttributeClassifier sgd_update(AttributeClassifier c, const TrainingJudgement& j, const SgdParams& p) {
  c.update(j.features.values, j.positive, p);
  return c;
}

double logistic_loss(const AttributeClassifier& c, std::span<const double> x, bool positive, double l2) {
  const double z = c.margin(x);
  // log(1 + exp(-s z)) computed stably
  const double sz = positive ? z : -z;
  const double nll = sz > 0 ? std::log1p(std::exp(-sz)) : -sz + std::log1p(std::exp(sz));
  double norm2 = 0.0;
  for (double w : c.weights) norm2 += w * w;
  return nll + 0.5 * l2 * norm2;
}

ConfidenceBands::ConfidenceBands(double base_threshold, double positive_threshold)
    : base(base_threshold), positive(positive_threshold) {
  if (!(base > 0.0 && base < 1.0) || !(positive > base && positive <= 1.0)) {
    throw std::invalid_argument("confidence bands need 0 < base < positive <= 1");
  }
}

std::string_view name(Band b) {
  switch (b) {
    case Band::Unknown: return "unknown";
    case Band::Unsure: return "unsure";
    default: return "confident";
  }
}

Band band_of(double prob, const ConfidenceBands& bands) {
  if (prob < bands.base) return Band::Unknown;
  if (prob < bands.positive) return Band::Unsure;
  return Band::Confident;
}

AttributeClassifier& ClassifierRegistry::ensure(Attribute a, Category category) {
  auto it = classifiers_.find(a);
  if (it == classifiers_.end()) {
    AttributeClassifier c;
    c.attribute = a;
    it = classifiers_.emplace(a, std::move(c)).first;
    categories_[a] = category;
  }
  return it->second;
}

const AttributeClassifier* ClassifierRegistry::find(Attribute a) const {
  auto it = classifiers_.find(a);
  return it == classifiers_.end() ? nullptr : &it->second;
}

std::optional<Category> ClassifierRegistry::category(Attribute a) const {
  auto it = categories_.find(a);
  if (it == categories_.end()) return std::nullopt;
  return it->second;
}

std::vector<Attribute> ClassifierRegistry::members(Category c) const {
  std::vector<Attribute> out;
  for (const auto& [a, cat] : categories_) {
    if (cat == c) out.push_back(a);
  }
  return out;
}

double ClassifierRegistry::prob(Attribute a, const FeatureVector& x) const {
  const auto* c = find(a);
  return c ? c->predict_prob(x.values) : 0.5;
}

void ClassifierRegistry::train(const TrainingJudgement& j, const SgdParams& p) {
  ensure(j.attribute).update(j.features.values, j.positive, p);
}

CategoryVerdicts ClassifierRegistry::classify_bands(const FeatureVector& x, const ConfidenceBands& bands,
                                                    std::span<const Attribute> exclude) const {
  CategoryVerdicts out;
  for (auto cat : kAllCategories) {
    Verdict& v = out[index_of(cat)];
    v.category = cat;
    for (auto a : members(cat)) {
      if (std::find(exclude.begin(), exclude.end(), a) != exclude.end()) continue;
      const double p = find(a)->predict_prob(x.values);
      if (!v.best || p > v.prob) {
        v.best = a;
        v.prob = p;
      }
    }
    v.band = v.best ? band_of(v.prob, bands) : Band::Unknown;
  }
  return out;
}

namespace {
constexpr int kModelVersion = 1;
}

void ClassifierRegistry::save(const std::filesystem::path& path, const ConfidenceBands& bands) const {
  nlohmann::json j;
  j["format"] = "gwl-classifier-registry";
  j["version"] = kModelVersion;
  j["bands"] = {{"base", bands.base}, {"positive", bands.positive}};
  j["classifiers"] = nlohmann::json::array();
  for (const auto& [a, c] : classifiers_) {
    j["classifiers"].push_back({{"attribute", name(a)},
                                {"category", name(categories_.at(a))},
                                {"bias", c.bias},
                                {"updates_seen", c.updates_seen},
                                {"weights", c.weights}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model to " + path.string());
  out << j.dump();
}

std::pair<ClassifierRegistry, ConfidenceBands> ClassifierRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "gwl-classifier-registry" || j.value("version", 0) != kModelVersion) {
    throw std::runtime_error("unsupported model file " + path.string());
  }
  ClassifierRegistry reg;
  for (const auto& c : j.at("classifiers")) {
    const auto a = parse_attribute(c.at("attribute").get<std::string>());
    const auto cat = parse_category(c.at("category").get<std::string>());
    if (!a || !cat) throw std::runtime_error("bad classifier entry in " + path.string());
    auto& cls = reg.ensure(*a, *cat);
    cls.bias = c.at("bias").get<double>();
    cls.updates_seen = c.at("updates_seen").get<std::uint64_t>();
    cls.weights = c.at("weights").get<std::vector<double>>();
    if (cls.weights.size() != static_cast<std::size_t>(vision::kFeatureDim)) {
      throw DimensionMismatch("stored weights have the wrong length");
    }
  }
  const auto& b = j.at("bands");
  return {std::move(reg), ConfidenceBands(b.at("base").get<double>(), b.at("positive").get<double>())};
}

}  // namespace gwl
