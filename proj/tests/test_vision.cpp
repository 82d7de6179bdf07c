#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "gwl/dataset.hpp"
#include "gwl/image_io.hpp"
#include "gwl/vision.hpp"

using namespace gwl;
using namespace gwl::vision;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// A 1024-word dictionary from one render per (colour, shape) cell; few
// iterations keep it fast.
const VisualDictionary& small_dictionary() {
  static const VisualDictionary dict = [] {
    std::vector<ObjectImage> imgs;
    for (const auto& s : make_specs(18, 321, {})) imgs.push_back(render_object(s));
    KMeansOptions o;
    o.seed = 3;
    o.max_iterations = 3;
    return build_dictionary(imgs, o);
  }();
  return dict;
}

}  // namespace

TEST_CASE("rendering is a pure function of the spec") {
  const ObjectSpec spec{Attribute::Red, Attribute::Square, 7, {}};
  const auto a = render_object(spec), b = render_object(spec);
  CHECK(a.rgb == b.rgb);
  CHECK(a.bbox == b.bbox);
  CHECK(a.rgb.size() == static_cast<std::size_t>(3 * kImageSize * kImageSize));
  CHECK_FALSE(a.bbox.empty());
  auto other = spec;
  other.seed = 8;
  CHECK(render_object(other).rgb != a.rgb);
}

TEST_CASE("rendered colour stays near the nominal hue") {
  // Tolerance: half the hue gap to the nearest other chromatic colour, i.e.
  // the pixel reads as blue rather than as a neighbour.
  const double target = nominal_colour(Attribute::Blue).h;
  double gap = 360.0;
  for (auto c : {Attribute::Green, Attribute::Orange, Attribute::Purple, Attribute::Red}) {
    const double d = std::abs(nominal_colour(c).h - target);
    gap = std::min(gap, std::min(d, 360.0 - d));
  }
  const double tolerance = gap / 2.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto img = render_object({Attribute::Blue, Attribute::Circle, seed, {}});
    int object = 0, near = 0;
    for (int y = img.bbox.y0; y < img.bbox.y1; ++y) {
      for (int x = img.bbox.x0; x < img.bbox.x1; ++x) {
        const auto p = img.pixel(x, y);
        if (is_background(p[0], p[1], p[2])) continue;
        ++object;
        const double h = rgb_to_hsv(p[0], p[1], p[2]).h;
        const double d = std::min(std::abs(h - target), 360.0 - std::abs(h - target));
        if (d <= tolerance) ++near;
      }
    }
    REQUIRE(object > 0);
    CHECK_MESSAGE(static_cast<double>(near) / object >= 0.9, "seed " << seed);
  }
}

TEST_CASE("specs are balanced over the 18 cells") {
  const auto specs = make_specs(600, 1, {});
  std::map<std::pair<Attribute, Attribute>, int> cells;
  for (const auto& s : specs) ++cells[{s.color, s.shape}];
  CHECK(cells.size() == 18);
  for (const auto& [cell, n] : cells) {
    CHECK(n >= 33);
    CHECK(n <= 34);
  }
}

TEST_CASE("hsv conversion round-trips") {
  for (auto c : kColours) {
    const auto rgb = hsv_to_rgb(nominal_colour(c));
    const auto back = hsv_to_rgb(rgb_to_hsv(rgb[0], rgb[1], rgb[2]));
    CHECK(back == rgb);
  }
}

TEST_CASE("hsv histogram") {
  const auto img = render_object({Attribute::Red, Attribute::Square, 1, {}});
  const auto h = hsv_histogram(img);
  CHECK(h.size() == kHsvBins);
  CHECK(sum(h) == doctest::Approx(1.0));

  ObjectImage flat;
  flat.rgb.assign(3 * kImageSize * kImageSize, 0);
  for (std::size_t i = 0; i < flat.rgb.size(); i += 3) flat.rgb[i] = 200;
  flat.bbox = {10, 10, 40, 40};
  const auto hf = hsv_histogram(flat);
  CHECK(*std::max_element(hf.begin(), hf.end()) == doctest::Approx(1.0));

  const auto blue = hsv_histogram(render_object({Attribute::Blue, Attribute::Square, 1, {}}));
  CHECK(argmax(h) != argmax(blue));

  ObjectImage empty_box = flat;
  empty_box.bbox = {};
  CHECK_THROWS_AS(hsv_histogram(empty_box), DegenerateInput);
}

TEST_CASE("dense descriptors") {
  const auto img = render_object({Attribute::Green, Attribute::Triangle, 2, {}});
  const auto d = dense_descriptors(img);
  CHECK(d.size() == static_cast<std::size_t>(kDescriptorCount));
  CHECK(kDescriptorCount == 961);
  const auto d2 = dense_descriptors(img);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i].v == d2[i].v);

  ObjectImage white;
  white.rgb.assign(3 * kImageSize * kImageSize, 255);
  white.bbox = {0, 0, kImageSize, kImageSize};
  float max_v = 0;
  for (const auto& desc : dense_descriptors(white)) {
    for (float v : desc.v) max_v = std::max(max_v, std::abs(v));
  }
  CHECK(max_v < 1e-6f);

  for (const auto& desc : object_descriptors(img)) {
    CHECK(std::any_of(desc.v.begin(), desc.v.end(), [](float v) { return v != 0.0f; }));
  }
}

TEST_CASE("dictionary build") {
  const auto& dict = small_dictionary();
  CHECK(dict.size() == kVisualWords);
  CHECK(dict.centers().size() == static_cast<std::size_t>(kVisualWords * kDescriptorDim));

  std::vector<ObjectImage> one{render_object({Attribute::Red, Attribute::Circle, 1, {}})};
  CHECK_THROWS_AS(build_dictionary(one, {}), InsufficientData);

  std::vector<Descriptor> descs;
  for (const auto& s : make_specs(4, 9, {})) {
    const auto d = object_descriptors(render_object(s));
    descs.insert(descs.end(), d.begin(), d.end());
  }
  KMeansOptions o{16, 4, 5};
  CHECK(build_dictionary_from_descriptors(descs, o) == build_dictionary_from_descriptors(descs, o));

  const auto path = std::filesystem::temp_directory_path() / "gwl_test_dict.json";
  dict.save(path);
  CHECK(VisualDictionary::load(path) == dict);
  std::filesystem::remove(path);
}

TEST_CASE("nearest word is the exact minimum distance center") {
  const auto& dict = small_dictionary();
  const auto descs = object_descriptors(render_object({Attribute::Orange, Attribute::Circle, 5, {}}));
  for (std::size_t i = 0; i < descs.size(); i += 37) {
    double best_d = 1e300;
    for (int k = 0; k < dict.size(); ++k) {
      double d = 0;
      const auto c = dict.center(k);
      for (int j = 0; j < kDescriptorDim; ++j) d += (descs[i].v[j] - c[j]) * (descs[i].v[j] - c[j]);
      best_d = std::min(best_d, d);
    }
    const int got = dict.nearest(descs[i].v);
    double got_d = 0;
    for (int j = 0; j < kDescriptorDim; ++j) got_d += (descs[i].v[j] - dict.center(got)[j]) * (descs[i].v[j] - dict.center(got)[j]);
    CHECK(got_d == doctest::Approx(best_d).epsilon(1e-4));
  }
}

TEST_CASE("feature vectors") {
  const auto& dict = small_dictionary();
  const ObjectSpec circle{Attribute::Purple, Attribute::Circle, 12, {}};
  const ObjectSpec square{Attribute::Purple, Attribute::Square, 12, {}};
  const auto fc = extract_features(render_object(circle), dict);
  CHECK(fc.size() == static_cast<std::size_t>(kFeatureDim));
  CHECK(fc == extract_features(render_object(circle), dict));
  const auto fs = extract_features(render_object(square), dict);
  CHECK(argmax(fc.hsv_block()) == argmax(fs.hsv_block()));
  CHECK(cosine(fc.word_block(), fs.word_block()) < 0.999);

  double n1 = 0, n2 = 0;
  for (double v : fc.hsv_block()) n1 += v * v;
  for (double v : fc.word_block()) n2 += v * v;
  CHECK(n1 == doctest::Approx(1.0));
  CHECK(n2 == doctest::Approx(1.0));

  const auto words = word_histogram(render_object(circle), dict);
  CHECK(words.size() == static_cast<std::size_t>(kVisualWords));
  CHECK(sum(words) == doctest::Approx(1.0));

  VisualDictionary tiny(2, std::vector<float>(2 * kDescriptorDim, 0.0f));
  CHECK_THROWS_AS(extract_features(render_object(circle), tiny), std::invalid_argument);
}

TEST_CASE("png round trip") {
  const auto img = render_object({Attribute::Black, Attribute::Triangle, 4, {}});
  const auto path = std::filesystem::temp_directory_path() / "gwl_test_obj.png";
  write_png(path, img);
  const auto back = read_png(path);
  CHECK(back.rgb == img.rgb);
  CHECK(back.width == img.width);
  std::filesystem::remove(path);
}

TEST_CASE("on-disk dataset reloads to the same features") {
  const auto dir = std::filesystem::temp_directory_path() / "gwl_test_dataset";
  std::filesystem::remove_all(dir);
  const auto specs = make_specs(6, 77, {});
  const auto imgs = render_all(specs, 1);
  save_dataset_images(dir, specs, imgs);
  const auto manifest = load_manifest(dir);
  REQUIRE(manifest.size() == 6);
  CHECK(manifest[2].bbox == imgs[2].bbox);
  CHECK(manifest[2].color == specs[2].color);
  const auto ds = load_dataset(dir, small_dictionary(), 1);
  CHECK(ds.features == extract_all(imgs, small_dictionary(), 1));
  std::filesystem::remove_all(dir);
}
