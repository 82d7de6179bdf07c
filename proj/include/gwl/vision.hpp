// Synthetic object rendering and the stacked colour + visual-word features.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwl/attributes.hpp"

namespace gwl::vision {

class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kImageSize = 128;

inline constexpr int kHueBins = 16;
inline constexpr int kSatBins = 4;
inline constexpr int kValBins = 4;
inline constexpr int kHsvBins = kHueBins * kSatBins * kValBins;  // 256

// Descriptor layout: a block of 2x2 cells, each cell 4x4 pixels with an
// 8-bin signed gradient-orientation histogram; cells ordered row-major
// (top-left, top-right, bottom-left, bottom-right), bins counter-clockwise
// from +x. Blocks are sampled every 4 pixels, giving 31x31 = 961 blocks on
// a 128x128 image.
inline constexpr int kCellSize = 4;
inline constexpr int kBlockCells = 2;
inline constexpr int kOrientationBins = 8;
inline constexpr int kGridStep = 4;
inline constexpr int kDescriptorDim = kBlockCells * kBlockCells * kOrientationBins;  // 32
inline constexpr int kBlockSpan = kBlockCells * kCellSize;                           // 8
inline constexpr int kBlocksPerAxis = (kImageSize - kBlockSpan) / kGridStep + 1;      // 31
inline constexpr int kDescriptorCount = kBlocksPerAxis * kBlocksPerAxis;              // 961

inline constexpr int kVisualWords = 1024;
inline constexpr int kFeatureDim = kHsvBins + kVisualWords;  // 1280

// Per-object variation ranges; the actual draw is a pure function of the seed.
struct Jitter {
  double size_min_px = 44.0;
  double size_max_px = 80.0;
  double rotation_deg = 25.0;
  double hue_noise_deg = 9.0;
  double sat_noise = 0.10;
  double val_noise = 0.08;
  double offset_px = 10.0;
  // Per-pixel noise.
  double pixel_hue_deg = 2.0;
  double pixel_sat = 0.02;
  double pixel_val = 0.01;
};

struct ObjectSpec {
  Attribute color = Attribute::Red;
  Attribute shape = Attribute::Square;
  std::uint64_t seed = 0;
  Jitter jitter{};
};

// Half-open pixel box [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool operator==(const BBox&) const = default;
};

struct ObjectImage {
  int width = kImageSize;
  int height = kImageSize;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
  BBox bbox;

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    const auto* p = &rgb[3 * (static_cast<std::size_t>(y) * width + x)];
    return {p[0], p[1], p[2]};
  }
};

struct Hsv {
  double h;  // degrees [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& c);

// Nominal HSV of each colour attribute.
Hsv nominal_colour(Attribute colour);

bool is_background(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct FeatureVector {
  std::vector<double> values;

  std::span<const double> hsv_block() const { return {values.data(), kHsvBins}; }
  std::span<const double> word_block() const {
    return {values.data() + kHsvBins, static_cast<std::size_t>(kVisualWords)};
  }
  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

struct Descriptor {
  int x = 0;  // top-left pixel of the block
  int y = 0;
  std::array<float, kDescriptorDim> v{};
};

class VisualDictionary {
 public:
  VisualDictionary() = default;
  VisualDictionary(int k, std::vector<float> centers);

  int size() const { return k_; }
  int descriptor_dim() const { return kDescriptorDim; }
  std::span<const float> center(int i) const {
    return {centers_.data() + static_cast<std::size_t>(i) * kDescriptorDim,
            static_cast<std::size_t>(kDescriptorDim)};
  }
  const std::vector<float>& centers() const { return centers_; }

  int nearest(std::span<const float> descriptor) const;

  void save(const std::filesystem::path& path) const;
  static VisualDictionary load(const std::filesystem::path& path);

  bool operator==(const VisualDictionary&) const = default;

 private:
  int k_ = 0;
  std::vector<float> centers_;
  std::vector<float> center_norms_;
};

ObjectImage render_object(const ObjectSpec& spec);

// L1-normalized colour histogram over object pixels inside the bounding box. White
// background pixels are excluded; achromatic pixels (s < 0.1) use hue bin 0.
std::vector<double> hsv_histogram(const ObjectImage& img);

std::vector<Descriptor> dense_descriptors(const ObjectImage& img);

// Descriptors whose block window overlaps the bounding box, blank (zero) ones
// dropped.
std::vector<Descriptor> object_descriptors(const ObjectImage& img);

struct KMeansOptions {
  int k = kVisualWords;
  std::uint64_t seed = 0;
  int max_iterations = 12;
};

VisualDictionary build_dictionary(std::span<const ObjectImage> seed_images,
                                  const KMeansOptions& options);
VisualDictionary build_dictionary_from_descriptors(std::span<const Descriptor> descriptors,
                                                   const KMeansOptions& options);

// Nearest-word counts, L1-normalized.
std::vector<double> word_histogram(const ObjectImage& img, const VisualDictionary& dict);

// Scales a block to unit L2 norm (all-zero blocks stay zero).
void l2_normalize(std::span<double> block);

// [hsv_histogram | word_histogram], each block rescaled to unit L2 norm so a
// few hundred SGD steps move the margin as much as the bias.
FeatureVector extract_features(const ObjectImage& img, const VisualDictionary& dict);

}  // namespace gwl::vision
