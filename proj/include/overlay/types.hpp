#pragma once

#include <string>

#include "overlay/errors.hpp"

namespace overlay {

/// Ground-truth category of an annotated image.
enum class Category { overlay, natural, none };

inline constexpr int kCategoryCount = 3;

/// Binary task label. Positive means artificial overlay present.
enum class BinaryLabel { negative = 0, positive = 1 };

enum class Split { train, eval };

std::string to_string(Category c);
std::string to_string(BinaryLabel l);
std::string to_string(Split s);

Category category_from_string(const std::string& s);
Split split_from_string(const std::string& s);

/// One annotated image.
struct ImageSample {
    std::string id;
    std::string image_path;
    Category category = Category::none;
    Split split = Split::train;

    bool operator==(const ImageSample&) const = default;
};

}  // namespace overlay
