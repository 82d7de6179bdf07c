#include "gwl/attributes.hpp"

namespace gwl {

namespace {
constexpr std::array<std::string_view, 9> kAttributeNames = {
    "black", "blue", "green", "orange", "purple", "red", "circle", "square", "triangle"};
}

std::vector<Attribute> attributes_in(Category c) {
  if (c == Category::Colour) return {kColours.begin(), kColours.end()};
  return {kShapes.begin(), kShapes.end()};
}

std::string_view name(Attribute a) { return kAttributeNames[index_of(a)]; }

std::string_view name(Category c) { return c == Category::Colour ? "colour" : "shape"; }

std::optional<Attribute> parse_attribute(std::string_view s) {
  for (auto a : kAllAttributes) {
    if (name(a) == s) return a;
  }
  return std::nullopt;
}

std::optional<Category> parse_category(std::string_view s) {
  if (s == "colour" || s == "color") return Category::Colour;
  if (s == "shape") return Category::Shape;
  return std::nullopt;
}

}  // namespace gwl
