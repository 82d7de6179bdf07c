#include "gwl/stats.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gwl::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

constexpr std::size_t kCells = 8;

struct Design {
  std::vector<double> y;
  std::vector<unsigned> cell;
  std::size_t per_cell = 0;
};

Design flatten(const std::vector<std::vector<double>>& cells) {
  if (cells.size() != kCells) throw std::invalid_argument("factorial design needs 8 cells");
  Design d;
  d.per_cell = cells[0].size();
  if (d.per_cell < 2) throw std::invalid_argument("each cell needs at least two observations");
  for (unsigned c = 0; c < kCells; ++c) {
    if (cells[c].size() != d.per_cell) throw std::invalid_argument("design must be balanced");
    for (double v : cells[c]) {
      d.y.push_back(v);
      d.cell.push_back(c);
    }
  }
  return d;
}

double code(unsigned cell, unsigned mask) {
  // Product of +/-1 codes of the factors in mask.
  return std::popcount(~cell & mask) % 2 == 0 ? 1.0 : -1.0;
}

double f_statistic(const std::vector<double>& y, const std::vector<unsigned>& cell, unsigned mask,
                   bool* degenerate) {
  const double n = static_cast<double>(y.size());
  std::array<double, kCells> sum{};
  std::array<double, kCells> count{};
  double contrast = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum[cell[i]] += y[i];
    count[cell[i]] += 1.0;
    contrast += code(cell[i], mask) * y[i];
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - sum[cell[i]] / count[cell[i]];
    sse += r * r;
  }
  const double ss_effect = contrast * contrast / n;
  const double mse = sse / (n - static_cast<double>(kCells));
  // Relative floor: sums of squares at rounding level count as zero.
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-24 * std::max(1.0, scale * scale) * n;
  const bool zero_mse = sse <= tiny;
  if (degenerate) *degenerate = zero_mse;
  if (zero_mse) return ss_effect <= tiny ? 0.0 : std::numeric_limits<double>::infinity();
  return ss_effect / mse;
}

std::string effect_name(unsigned mask) {
  std::string out;
  auto add = [&](unsigned bit, const char* n) {
    if (!(mask & bit)) return;
    if (!out.empty()) out += " x ";
    out += n;
  };
  add(kInitiativeBit, "Initiative");
  add(kUncertaintyBit, "Uncertainty");
  add(kContextBit, "ContextDependency");
  return out;
}

}  // namespace

double effect_f(const std::vector<std::vector<double>>& cells, unsigned mask, bool* degenerate) {
  const Design d = flatten(cells);
  return f_statistic(d.y, d.cell, mask, degenerate);
}

EffectTest permutation_test(const std::vector<std::vector<double>>& cells, unsigned mask, int permutations,
                            std::uint64_t seed) {
  if (mask == 0 || mask >= kCells) throw std::invalid_argument("bad effect mask");
  const Design d = flatten(cells);
  EffectTest out;
  out.effect = effect_name(mask);
  out.mask = mask;
  out.f = f_statistic(d.y, d.cell, mask, &out.degenerate);

  // Reduced model: cell means with this effect's contribution removed.
  const double n = static_cast<double>(d.y.size());
  std::array<double, kCells> sum{};
  std::array<double, kCells> count{};
  double contrast = 0.0;
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    sum[d.cell[i]] += d.y[i];
    count[d.cell[i]] += 1.0;
    contrast += code(d.cell[i], mask) * d.y[i];
  }
  const double b = contrast / n;
  std::vector<double> fitted(d.y.size());
  std::vector<double> resid(d.y.size());
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    fitted[i] = sum[d.cell[i]] / count[d.cell[i]] - b * code(d.cell[i], mask);
    resid[i] = d.y[i] - fitted[i];
  }

  std::mt19937_64 rng(seed);
  std::vector<double> y_perm(d.y.size());
  int at_least = 0;
  for (int k = 0; k < permutations; ++k) {
    std::shuffle(resid.begin(), resid.end(), rng);
    for (std::size_t i = 0; i < d.y.size(); ++i) y_perm[i] = fitted[i] + resid[i];
    const double f = f_statistic(y_perm, d.cell, mask, nullptr);
    if (f >= out.f * (1.0 - 1e-12)) ++at_least;
  }
  out.p = (1.0 + at_least) / (1.0 + permutations);
  return out;
}

std::vector<EffectTest> main_effects(const std::vector<std::vector<double>>& cells, int permutations,
                                     std::uint64_t seed) {
  std::vector<EffectTest> out;
  const unsigned masks[] = {kInitiativeBit, kUncertaintyBit, kContextBit, kInitiativeBit | kUncertaintyBit};
  for (unsigned i = 0; i < std::size(masks); ++i) {
    out.push_back(permutation_test(cells, masks[i], permutations, seed + i));
  }
  return out;
}

EffectTest two_group_test(std::span<const double> a, std::span<const double> b, int permutations,
                          std::uint64_t seed, std::string effect) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("each group needs two observations");
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const std::size_t na = a.size();
  auto f_of = [&](const std::vector<double>& v, bool* degenerate) {
    const double ma = mean(std::span(v).first(na));
    const double mb = mean(std::span(v).subspan(na));
    const double m = mean(v);
    double ssb = static_cast<double>(na) * (ma - m) * (ma - m) +
                 static_cast<double>(v.size() - na) * (mb - m) * (mb - m);
    double ssw = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double g = i < na ? ma : mb;
      ssw += (v[i] - g) * (v[i] - g);
    }
    const bool zero = ssw <= 1e-24 * std::max(1.0, m * m) * static_cast<double>(v.size());
    if (degenerate) *degenerate = zero;
    if (zero) return ssb <= 1e-24 ? 0.0 : std::numeric_limits<double>::infinity();
    return ssb / (ssw / static_cast<double>(v.size() - 2));
  };
  EffectTest out;
  out.effect = std::move(effect);
  out.f = f_of(all, &out.degenerate);
  std::mt19937_64 rng(seed);
  int at_least = 0;
  for (int k = 0; k < permutations; ++k) {
    std::shuffle(all.begin(), all.end(), rng);
    if (f_of(all, nullptr) >= out.f * (1.0 - 1e-12)) ++at_least;
  }
  out.p = (1.0 + at_least) / (1.0 + permutations);
  return out;
}

}  // namespace gwl::stats
