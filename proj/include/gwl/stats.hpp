// Balanced 2x2x2 between-subjects ANOVA with permutation p-values.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gwl::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> xs);

// Factor bits of a cell index: bit 2 = Initiative (Learner), bit 1 =
// Uncertainty (+UC), bit 0 = Context-Dependency (+CD).
inline constexpr unsigned kInitiativeBit = 4;
inline constexpr unsigned kUncertaintyBit = 2;
inline constexpr unsigned kContextBit = 1;

struct EffectTest {
  std::string effect;
  unsigned mask = 0;  // factor bits involved
  double f = 0.0;
  double p = 1.0;
  // Zero residual variance: F is reported as 0 or +inf.
  bool degenerate = false;
};

// Single-df F test of the effect `mask` (a product of +/-1 factor codes);
// the residual mean square comes from the full cell-means model.
double effect_f(const std::vector<std::vector<double>>& cells, unsigned mask, bool* degenerate = nullptr);

// Freedman-Lane permutation test: residuals of the model without the effect
// are permuted and added back to its fitted values.
EffectTest permutation_test(const std::vector<std::vector<double>>& cells, unsigned mask, int permutations,
                            std::uint64_t seed);

// Initiative, Uncertainty, Context-Dependency main effects and the
// Initiative x Uncertainty interaction.
std::vector<EffectTest> main_effects(const std::vector<std::vector<double>>& cells, int permutations = 10000,
                                     std::uint64_t seed = 1);

// Two-group one-way F test with a label-permutation p-value.
EffectTest two_group_test(std::span<const double> a, std::span<const double> b, int permutations,
                          std::uint64_t seed, std::string effect = "group");

}  // namespace gwl::stats
