#pragma once

#include <string>
#include <vector>

#include "overlay/types.hpp"

namespace overlay {

enum class Strategy { zero_shot, sequential, fusion, finetuned };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// A strategy's binary decision with its supporting evidence.
struct OverlayVerdict {
    BinaryLabel label = BinaryLabel::negative;
    double confidence = 1.0;  // prompt-based strategies have no calibrated score
    std::vector<std::string> overlay_texts;
    std::string evidence;  // raw model rationale, empty for the fusion model
    Strategy strategy = Strategy::zero_shot;

    bool operator==(const OverlayVerdict&) const = default;
};

}  // namespace overlay
