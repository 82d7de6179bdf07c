// The nine-attribute inventory: six colours and three shapes.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gwl {

enum class Category { Colour, Shape };

enum class Attribute { Black, Blue, Green, Orange, Purple, Red, Circle, Square, Triangle };

inline constexpr std::array<Attribute, 9> kAllAttributes = {
    Attribute::Black,  Attribute::Blue,   Attribute::Green,  Attribute::Orange,  Attribute::Purple,
    Attribute::Red,    Attribute::Circle, Attribute::Square, Attribute::Triangle};

inline constexpr std::array<Category, 2> kAllCategories = {Category::Colour, Category::Shape};

inline constexpr std::array<Attribute, 6> kColours = {Attribute::Black,  Attribute::Blue,
                                                       Attribute::Green,  Attribute::Orange,
                                                       Attribute::Purple, Attribute::Red};

inline constexpr std::array<Attribute, 3> kShapes = {Attribute::Circle, Attribute::Square,
                                                      Attribute::Triangle};

constexpr std::size_t index_of(Attribute a) { return static_cast<std::size_t>(a); }
constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

constexpr Category category_of(Attribute a) {
  return index_of(a) < kColours.size() ? Category::Colour : Category::Shape;
}

std::vector<Attribute> attributes_in(Category c);

std::string_view name(Attribute a);
std::string_view name(Category c);

std::optional<Attribute> parse_attribute(std::string_view s);
// Accepts both "colour" and "color".
std::optional<Category> parse_category(std::string_view s);

}  // namespace gwl
