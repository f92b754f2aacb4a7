#pragma once

// Test-only oracles, independent of the library implementation paths they
// check.

#include <vector>

#include "overlay/metrics.hpp"

namespace overlay::testing {

/// Brute-force per-sample confusion counter.
inline ConfusionMatrix brute_force_confusion(const std::vector<BinaryLabel>& preds,
                                             const std::vector<BinaryLabel>& truths) {
    ConfusionMatrix m;
    for (size_t i = 0; i < preds.size(); ++i) {
        const int cell = (preds[i] == BinaryLabel::positive ? 2 : 0) +
                         (truths[i] == BinaryLabel::positive ? 1 : 0);
        switch (cell) {
            case 3: ++m.tp; break;
            case 2: ++m.fp; break;
            case 1: ++m.fn; break;
            default: ++m.tn; break;
        }
    }
    return m;
}

}  // namespace overlay::testing
