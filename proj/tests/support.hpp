#pragma once

#include <random>

#include "gwl/dataset.hpp"
#include "gwl/vision.hpp"

namespace testing_support {

// Renders and specs are real; features are a cheap stand-in with one HSV bin
// per colour and one word bin per shape plus noise, each block at unit L2
// norm like the real extractor. Enough for the protocol-level tests.
inline gwl::Dataset toy_dataset(int count, std::uint64_t seed = 5, bool with_images = false) {
  gwl::Dataset d;
  d.specs = gwl::make_specs(count, seed, {});
  if (with_images) d.images = gwl::render_all(d.specs, 1);
  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (const auto& s : d.specs) {
    gwl::vision::FeatureVector f;
    f.values.assign(gwl::vision::kFeatureDim, 0.0);
    for (auto& v : f.values) v = std::abs(noise(rng)) * 0.2;
    f.values[gwl::index_of(s.color) * 17] += 1.0;
    f.values[gwl::vision::kHsvBins + gwl::index_of(s.shape) * 101] += 1.0;
    std::span<double> all(f.values);
    gwl::vision::l2_normalize(all.subspan(0, gwl::vision::kHsvBins));
    gwl::vision::l2_normalize(all.subspan(gwl::vision::kHsvBins));
    d.features.push_back(std::move(f));
  }
  return d;
}

}  // namespace testing_support
