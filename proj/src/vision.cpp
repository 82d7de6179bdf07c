#include "gwl/vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

namespace gwl::vision {

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out{0.0, mx > 0.0 ? d / mx : 0.0, mx};
  if (d <= 0.0) return out;
  double h;
  if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  out.h = h >= 360.0 ? h - 360.0 : h;
  return out;
}

std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& c) {
  double h = std::fmod(c.h, 360.0);
  if (h < 0.0) h += 360.0;
  const double s = std::clamp(c.s, 0.0, 1.0);
  const double v = std::clamp(c.v, 0.0, 1.0);
  const double chroma = v * s;
  const double hp = h / 60.0;
  const double x = chroma * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = chroma; g = x; break;
    case 1: r = x; g = chroma; break;
    case 2: g = chroma; b = x; break;
    case 3: g = x; b = chroma; break;
    case 4: r = x; b = chroma; break;
    default: r = chroma; b = x; break;
  }
  const double m = v - chroma;
  auto to8 = [](double u) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

Hsv nominal_colour(Attribute colour) {
  switch (colour) {
    case Attribute::Black: return {0.0, 0.15, 0.14};
    case Attribute::Blue: return {222.0, 0.80, 0.74};
    case Attribute::Green: return {125.0, 0.70, 0.58};
    case Attribute::Orange: return {27.0, 0.88, 0.84};
    case Attribute::Purple: return {282.0, 0.55, 0.60};
    case Attribute::Red: return {358.0, 0.84, 0.76};
    default: throw std::invalid_argument("not a colour attribute");
  }
}

bool is_background(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return r >= 240 && g >= 240 && b >= 240;
}

namespace {

struct Point {
  double x, y;
};

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool inside_convex(const std::vector<Point>& poly, Point p) {
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const double c = cross(poly[i], poly[(i + 1) % poly.size()], p);
    pos |= c > 0;
    neg |= c < 0;
  }
  return !(pos && neg);
}

std::vector<Point> regular_polygon(int sides, double radius, double rotation_rad, Point centre,
                                   double phase) {
  std::vector<Point> pts;
  for (int i = 0; i < sides; ++i) {
    const double a = rotation_rad + phase + 2.0 * std::numbers::pi * i / sides;
    pts.push_back({centre.x + radius * std::cos(a), centre.y + radius * std::sin(a)});
  }
  return pts;
}

}  // namespace

ObjectImage render_object(const ObjectSpec& spec) {
  if (category_of(spec.color) != Category::Colour || category_of(spec.shape) != Category::Shape) {
    throw std::invalid_argument("object spec needs one colour and one shape");
  }
  const Jitter& j = spec.jitter;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double size = uniform(j.size_min_px, j.size_max_px);
  const double rotation = uniform(-j.rotation_deg, j.rotation_deg) * std::numbers::pi / 180.0;
  const Point centre{kImageSize / 2.0 + uniform(-j.offset_px, j.offset_px),
                     kImageSize / 2.0 + uniform(-j.offset_px, j.offset_px)};
  Hsv base = nominal_colour(spec.color);
  base.h += j.hue_noise_deg * gauss(rng);
  base.s = std::clamp(base.s + j.sat_noise * gauss(rng), 0.05, 1.0);
  base.v = std::clamp(base.v + j.val_noise * gauss(rng), 0.05, 0.88);

  std::vector<Point> poly;
  if (spec.shape == Attribute::Square) {
    // Side 0.85 * size; circumradius side / sqrt(2).
    poly = regular_polygon(4, 0.85 * size / std::numbers::sqrt2, rotation, centre,
                           std::numbers::pi / 4.0);
  } else if (spec.shape == Attribute::Triangle) {
    poly = regular_polygon(3, 0.6 * size, rotation, centre, -std::numbers::pi / 2.0);
  }
  const double radius = size / 2.0;

  ObjectImage img;
  img.rgb.assign(static_cast<std::size_t>(kImageSize) * kImageSize * 3, 255);
  int x0 = kImageSize, y0 = kImageSize, x1 = 0, y1 = 0;
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const Point p{x + 0.5, y + 0.5};
      const bool in = spec.shape == Attribute::Circle
                          ? std::hypot(p.x - centre.x, p.y - centre.y) <= radius
                          : inside_convex(poly, p);
      // Noise is drawn for every pixel so the stream does not depend on shape.
      const double dh = j.pixel_hue_deg * gauss(rng);
      const double ds = j.pixel_sat * gauss(rng);
      const double dv = j.pixel_val * gauss(rng);
      if (!in) continue;
      const Hsv c{base.h + dh, std::clamp(base.s + ds, 0.0, 1.0), std::clamp(base.v + dv, 0.0, 0.9)};
      const auto rgb = hsv_to_rgb(c);
      auto* px = &img.rgb[3 * (static_cast<std::size_t>(y) * kImageSize + x)];
      px[0] = rgb[0];
      px[1] = rgb[1];
      px[2] = rgb[2];
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  img.bbox = x1 > x0 ? BBox{x0, y0, x1, y1} : BBox{};
  return img;
}

std::vector<double> hsv_histogram(const ObjectImage& img) {
  if (img.bbox.empty()) throw DegenerateInput("empty bounding box");
  std::vector<double> hist(kHsvBins, 0.0);
  double total = 0.0;
  for (int y = img.bbox.y0; y < img.bbox.y1; ++y) {
    for (int x = img.bbox.x0; x < img.bbox.x1; ++x) {
      const auto [r, g, b] = img.pixel(x, y);
      if (is_background(r, g, b)) continue;
      const Hsv c = rgb_to_hsv(r, g, b);
      const int hb = c.s < 0.1 ? 0 : std::min(kHueBins - 1, static_cast<int>(c.h / 360.0 * kHueBins));
      const int sb = std::min(kSatBins - 1, static_cast<int>(c.s * kSatBins));
      const int vb = std::min(kValBins - 1, static_cast<int>(c.v * kValBins));
      hist[(hb * kSatBins + sb) * kValBins + vb] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw DegenerateInput("no object pixels inside the bounding box");
  for (auto& h : hist) h /= total;
  return hist;
}

namespace {

// Gradient magnitudes below this are treated as flat.
constexpr float kMinGradient = 0.04f;
// Blocks whose summed magnitude is below this produce the zero descriptor.
constexpr float kMinBlockEnergy = 0.1f;

}  // namespace

std::vector<Descriptor> dense_descriptors(const ObjectImage& img) {
  const int w = img.width, h = img.height;
  std::vector<float> intensity(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [r, g, b] = img.pixel(x, y);
      intensity[static_cast<std::size_t>(y) * w + x] = std::max({r, g, b}) / 255.0f;
    }
  }
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return intensity[static_cast<std::size_t>(y) * w + x];
  };

  const int cells_x = w / kCellSize, cells_y = h / kCellSize;
  std::vector<float> cells(static_cast<std::size_t>(cells_x) * cells_y * kOrientationBins, 0.0f);
  const float bin_width = 2.0f * std::numbers::pi_v<float> / kOrientationBins;
  for (int y = 0; y < cells_y * kCellSize; ++y) {
    for (int x = 0; x < cells_x * kCellSize; ++x) {
      const float gx = at(x + 1, y) - at(x - 1, y);
      const float gy = at(x, y + 1) - at(x, y - 1);
      const float mag = std::sqrt(gx * gx + gy * gy);
      if (mag < kMinGradient) continue;
      float angle = std::atan2(-gy, gx);  // image y points down
      if (angle < 0) angle += 2.0f * std::numbers::pi_v<float>;
      const int bin = std::min(kOrientationBins - 1, static_cast<int>(angle / bin_width));
      const std::size_t cell = static_cast<std::size_t>(y / kCellSize) * cells_x + x / kCellSize;
      cells[cell * kOrientationBins + bin] += mag;
    }
  }

  std::vector<Descriptor> out;
  out.reserve(static_cast<std::size_t>(kDescriptorCount));
  for (int by = 0; by + kBlockSpan <= h; by += kGridStep) {
    for (int bx = 0; bx + kBlockSpan <= w; bx += kGridStep) {
      Descriptor d;
      d.x = bx;
      d.y = by;
      float energy = 0.0f;
      int k = 0;
      for (int cy = 0; cy < kBlockCells; ++cy) {
        for (int cx = 0; cx < kBlockCells; ++cx) {
          const std::size_t cell =
              static_cast<std::size_t>(by / kCellSize + cy) * cells_x + bx / kCellSize + cx;
          for (int o = 0; o < kOrientationBins; ++o) {
            d.v[k] = cells[cell * kOrientationBins + o];
            energy += d.v[k];
            ++k;
          }
        }
      }
      if (energy < kMinBlockEnergy) {
        d.v.fill(0.0f);
      } else {
        float norm = 0.0f;
        for (float u : d.v) norm += u * u;
        norm = std::sqrt(norm);
        for (float& u : d.v) u /= norm;
      }
      out.push_back(d);
    }
  }
  return out;
}

std::vector<Descriptor> object_descriptors(const ObjectImage& img) {
  if (img.bbox.empty()) throw DegenerateInput("empty bounding box");
  std::vector<Descriptor> all = dense_descriptors(img);
  std::vector<Descriptor> out;
  for (const auto& d : all) {
    const bool overlaps = d.x < img.bbox.x1 && d.x + kBlockSpan > img.bbox.x0 &&
                          d.y < img.bbox.y1 && d.y + kBlockSpan > img.bbox.y0;
    // Low-contrast blocks carry no edge and are dropped.
    const bool blank = std::all_of(d.v.begin(), d.v.end(), [](float u) { return u == 0.0f; });
    if (overlaps && !blank) out.push_back(d);
  }
  return out;
}

VisualDictionary::VisualDictionary(int k, std::vector<float> centers)
    : k_(k), centers_(std::move(centers)) {
  if (k_ <= 0 || centers_.size() != static_cast<std::size_t>(k_) * kDescriptorDim) {
    throw std::invalid_argument("dictionary size does not match its center array");
  }
  center_norms_.resize(k_);
  for (int i = 0; i < k_; ++i) {
    float n = 0.0f;
    for (float u : center(i)) n += u * u;
    center_norms_[i] = n;
  }
}

int VisualDictionary::nearest(std::span<const float> d) const {
  // argmin ||c||^2 - 2 c.d, ties to the lowest index.
  int best = 0;
  float best_score = std::numeric_limits<float>::infinity();
  const float* c = centers_.data();
  for (int i = 0; i < k_; ++i, c += kDescriptorDim) {
    float dot = 0.0f;
    for (int j = 0; j < kDescriptorDim; ++j) dot += c[j] * d[j];
    const float score = center_norms_[i] - 2.0f * dot;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

namespace {
constexpr int kDictionaryVersion = 1;
}

void VisualDictionary::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "gwl-visual-dictionary";
  j["version"] = kDictionaryVersion;
  j["k"] = k_;
  j["descriptor_dim"] = kDescriptorDim;
  j["centers"] = centers_;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dictionary to " + path.string());
  out << j.dump();
}

VisualDictionary VisualDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dictionary " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "gwl-visual-dictionary" || j.value("version", 0) != kDictionaryVersion) {
    throw std::runtime_error("unsupported dictionary file " + path.string());
  }
  if (j.at("descriptor_dim").get<int>() != kDescriptorDim) {
    throw std::runtime_error("dictionary descriptor dimension mismatch");
  }
  return VisualDictionary(j.at("k").get<int>(), j.at("centers").get<std::vector<float>>());
}

VisualDictionary build_dictionary_from_descriptors(std::span<const Descriptor> descriptors,
                                                   const KMeansOptions& options) {
  const int k = options.k;
  const std::size_t n = descriptors.size();
  if (k <= 0) throw std::invalid_argument("k must be positive");
  if (n < static_cast<std::size_t>(k)) {
    throw InsufficientData("need at least " + std::to_string(k) + " descriptors, got " +
                           std::to_string(n));
  }
  constexpr int D = kDescriptorDim;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto dist2 = [](const float* a, const float* b) {
    float s = 0.0f;
    for (int j = 0; j < D; ++j) {
      const float d = a[j] - b[j];
      s += d * d;
    }
    return s;
  };

  // k-means++ seeding; once every distinct point is a center, fall back to
  // uniform picks.
  std::vector<float> centers(static_cast<std::size_t>(k) * D);
  std::vector<float> closest(n, std::numeric_limits<float>::infinity());
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (int c = 0; c < k; ++c) {
    std::copy(descriptors[pick].v.begin(), descriptors[pick].v.end(), centers.begin() + c * D);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], dist2(descriptors[i].v.data(), &centers[c * D]));
      total += closest[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      continue;
    }
    double r = unit(rng) * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= closest[i];
      if (r <= 0.0 && closest[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    VisualDictionary current(k, centers);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int a = current.nearest(descriptors[i].v);
      changed |= a != assign[i];
      assign[i] = a;
    }
    if (!changed) break;
    std::vector<double> sums(static_cast<std::size_t>(k) * D, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (int j = 0; j < D; ++j) sums[static_cast<std::size_t>(assign[i]) * D + j] += descriptors[i].v[j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (int j = 0; j < D; ++j) {
        centers[static_cast<std::size_t>(c) * D + j] =
            static_cast<float>(sums[static_cast<std::size_t>(c) * D + j] / counts[c]);
      }
    }
  }
  return VisualDictionary(k, std::move(centers));
}

VisualDictionary build_dictionary(std::span<const ObjectImage> seed_images,
                                  const KMeansOptions& options) {
  std::vector<Descriptor> all;
  for (const auto& img : seed_images) {
    auto d = object_descriptors(img);
    all.insert(all.end(), d.begin(), d.end());
  }
  return build_dictionary_from_descriptors(all, options);
}

std::vector<double> word_histogram(const ObjectImage& img, const VisualDictionary& dict) {
  const auto descriptors = object_descriptors(img);
  if (descriptors.empty()) throw DegenerateInput("no edge descriptors overlap the bounding box");
  std::vector<double> hist(dict.size(), 0.0);
  for (const auto& d : descriptors) hist[dict.nearest(d.v)] += 1.0;
  for (auto& h : hist) h /= static_cast<double>(descriptors.size());
  return hist;
}

void l2_normalize(std::span<double> block) {
  double ss = 0.0;
  for (double v : block) ss += v * v;
  if (ss <= 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (double& v : block) v *= inv;
}

FeatureVector extract_features(const ObjectImage& img, const VisualDictionary& dict) {
  if (dict.size() != kVisualWords) {
    throw std::invalid_argument("feature extraction needs a " + std::to_string(kVisualWords) +
                                "-word dictionary");
  }
  FeatureVector f;
  f.values = hsv_histogram(img);
  const auto words = word_histogram(img, dict);
  f.values.insert(f.values.end(), words.begin(), words.end());
  l2_normalize(std::span(f.values).first(kHsvBins));
  l2_normalize(std::span(f.values).subspan(kHsvBins));
  return f;
}

}  // namespace gwl::vision
