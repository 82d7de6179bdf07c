#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gwl/vision.hpp"

namespace gwl::vision {

std::vector<std::uint8_t> encode_png(const ObjectImage& img);
void write_png(const std::filesystem::path& path, const ObjectImage& img);

// Reads an 8-bit RGB(A) PNG; the bounding box is left empty.
ObjectImage read_png(const std::filesystem::path& path);

}  // namespace gwl::vision
