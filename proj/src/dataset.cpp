#include "gwl/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "gwl/image_io.hpp"
#include "gwl/parallel.hpp"

namespace gwl {

namespace {
constexpr std::uint64_t kDatasetStream = 1;
constexpr std::uint64_t kSeedSetStream = 2;
constexpr std::size_t kCells = kColours.size() * kShapes.size();
}  // namespace

std::string object_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "obj%04zu", index);
  return buf;
}

std::vector<vision::ObjectSpec> make_specs(int count, std::uint64_t seed, const vision::Jitter& jitter) {
  std::vector<vision::ObjectSpec> specs;
  specs.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::size_t cell = static_cast<std::size_t>(i) % kCells;
    specs.push_back({kColours[cell % kColours.size()], kShapes[cell / kColours.size()],
                     derive_seed(seed, kDatasetStream, static_cast<std::uint64_t>(i)), jitter});
  }
  return specs;
}

std::vector<vision::ObjectSpec> seed_set_specs(const DatasetConfig& config) {
  std::vector<vision::ObjectSpec> specs;
  const int n = config.seed_images_per_cell * static_cast<int>(kCells);
  for (int i = 0; i < n; ++i) {
    const std::size_t cell = static_cast<std::size_t>(i) % kCells;
    specs.push_back({kColours[cell % kColours.size()], kShapes[cell / kColours.size()],
                     derive_seed(config.dictionary_seed, kSeedSetStream, static_cast<std::uint64_t>(i)),
                     config.jitter});
  }
  return specs;
}

std::vector<vision::ObjectImage> render_all(const std::vector<vision::ObjectSpec>& specs, int jobs) {
  std::vector<vision::ObjectImage> images(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) { images[i] = vision::render_object(specs[i]); });
  return images;
}

std::vector<vision::FeatureVector> extract_all(const std::vector<vision::ObjectImage>& images,
                                               const vision::VisualDictionary& dict, int jobs) {
  std::vector<vision::FeatureVector> features(images.size());
  parallel_for(images.size(), jobs,
               [&](std::size_t i) { features[i] = vision::extract_features(images[i], dict); });
  return features;
}

vision::VisualDictionary build_seed_dictionary(const DatasetConfig& config) {
  const auto seed_images = render_all(seed_set_specs(config), config.jobs);
  return vision::build_dictionary(
      seed_images, {vision::kVisualWords, config.dictionary_seed, config.kmeans_iterations});
}

Dataset build_dataset(const DatasetConfig& config) {
  Dataset ds;
  ds.specs = make_specs(config.count, config.seed, config.jitter);
  ds.images = render_all(ds.specs, config.jobs);
  ds.dictionary = build_seed_dictionary(config);
  ds.features = extract_all(ds.images, ds.dictionary, config.jobs);
  return ds;
}

void save_dataset_images(const std::filesystem::path& dir, const std::vector<vision::ObjectSpec>& specs,
                         const std::vector<vision::ObjectImage>& images) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto id = object_id(i);
    vision::write_png(dir / (id + ".png"), images[i]);
    const auto& b = images[i].bbox;
    nlohmann::json row = {{"id", id},
                          {"color", name(specs[i].color)},
                          {"shape", name(specs[i].shape)},
                          {"seed", specs[i].seed},
                          {"bbox", {b.x0, b.y0, b.x1, b.y1}}};
    manifest << row.dump() << '\n';
  }
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw std::runtime_error("no manifest.jsonl in " + dir.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto color = parse_attribute(j.at("color").get<std::string>());
    const auto shape = parse_attribute(j.at("shape").get<std::string>());
    if (!color || !shape || category_of(*color) != Category::Colour ||
        category_of(*shape) != Category::Shape) {
      throw std::runtime_error("bad attribute labels in manifest row: " + line);
    }
    const auto b = j.at("bbox").get<std::vector<int>>();
    if (b.size() != 4) throw std::runtime_error("bad bbox in manifest row: " + line);
    out.push_back({j.at("id").get<std::string>(), *color, *shape, j.at("seed").get<std::uint64_t>(),
                   {b[0], b[1], b[2], b[3]}});
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir, vision::VisualDictionary dict, int jobs) {
  const auto manifest = load_manifest(dir);
  Dataset ds;
  ds.dictionary = std::move(dict);
  ds.images.resize(manifest.size());
  parallel_for(manifest.size(), jobs, [&](std::size_t i) {
    ds.images[i] = vision::read_png(dir / (manifest[i].id + ".png"));
    ds.images[i].bbox = manifest[i].bbox;
  });
  for (const auto& m : manifest) ds.specs.push_back({m.color, m.shape, m.seed, {}});
  ds.features = extract_all(ds.images, ds.dictionary, jobs);
  return ds;
}

}  // namespace gwl
