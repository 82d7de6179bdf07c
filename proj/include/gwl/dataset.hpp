// The synthetic 600-object dataset: specs, renders, frozen dictionary and
// extracted features, plus its on-disk form (PNG per object + JSONL manifest).
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gwl/vision.hpp"

namespace gwl {

struct DatasetConfig {
  int count = 600;
  std::uint64_t seed = 20160913;
  vision::Jitter jitter{};
  // Dictionary seed set: this many renders per (colour, shape) cell, drawn
  // from a reserved seed stream disjoint from the dataset.
  int seed_images_per_cell = 5;
  std::uint64_t dictionary_seed = 7001;
  int kmeans_iterations = 12;
  int jobs = 1;
};

struct Dataset {
  std::vector<vision::ObjectSpec> specs;
  std::vector<vision::ObjectImage> images;
  std::vector<vision::FeatureVector> features;
  vision::VisualDictionary dictionary;

  std::size_t size() const { return specs.size(); }
};

std::string object_id(std::size_t index);

// Balanced over the 18 (colour, shape) cells in round-robin order.
std::vector<vision::ObjectSpec> make_specs(int count, std::uint64_t seed, const vision::Jitter& jitter);
std::vector<vision::ObjectSpec> seed_set_specs(const DatasetConfig& config);

std::vector<vision::ObjectImage> render_all(const std::vector<vision::ObjectSpec>& specs, int jobs);
std::vector<vision::FeatureVector> extract_all(const std::vector<vision::ObjectImage>& images,
                                               const vision::VisualDictionary& dict, int jobs);

vision::VisualDictionary build_seed_dictionary(const DatasetConfig& config);

Dataset build_dataset(const DatasetConfig& config);

struct ManifestEntry {
  std::string id;
  Attribute color;
  Attribute shape;
  std::uint64_t seed;
  vision::BBox bbox;
};

void save_dataset_images(const std::filesystem::path& dir, const std::vector<vision::ObjectSpec>& specs,
                         const std::vector<vision::ObjectImage>& images);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& dir);

// Reads PNGs listed in the manifest and extracts features with `dict`.
// Jitter parameters are not stored on disk; loaded specs carry defaults.
Dataset load_dataset(const std::filesystem::path& dir, vision::VisualDictionary dict, int jobs);

}  // namespace gwl
