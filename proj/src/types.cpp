#include "overlay/types.hpp"

#include "overlay/verdict.hpp"

namespace overlay {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::zero_shot: return "zero_shot";
        case Strategy::sequential: return "sequential";
        case Strategy::fusion: return "fusion";
        case Strategy::finetuned: return "finetuned";
    }
    throw ContractError("invalid Strategy value");
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "zero_shot") return Strategy::zero_shot;
    if (s == "sequential") return Strategy::sequential;
    if (s == "fusion") return Strategy::fusion;
    if (s == "finetuned") return Strategy::finetuned;
    throw SchemaError("unknown strategy \"" + s + "\"");
}

std::string to_string(Category c) {
    switch (c) {
        case Category::overlay: return "overlay";
        case Category::natural: return "natural";
        case Category::none:    return "none";
    }
    throw ContractError("invalid Category value");
}

std::string to_string(BinaryLabel l) {
    return l == BinaryLabel::positive ? "positive" : "negative";
}

std::string to_string(Split s) {
    return s == Split::train ? "train" : "eval";
}

Category category_from_string(const std::string& s) {
    if (s == "overlay") return Category::overlay;
    if (s == "natural") return Category::natural;
    if (s == "none") return Category::none;
    throw SchemaError("unknown category \"" + s + "\"");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "eval") return Split::eval;
    throw SchemaError("unknown split \"" + s + "\"");
}

}  // namespace overlay
