#pragma once

#include <optional>
#include <vector>

#include "overlay/types.hpp"

namespace overlay {

struct ConfusionMatrix {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    long total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Precision/recall carry no value when their denominator is zero;
/// reports render that as an em dash, never 0 or 1.
struct MetricReport {
    std::optional<double> precision;
    std::optional<double> recall;
    double accuracy = 0.0;
    ConfusionMatrix matrix;
    long n = 0;
};

/// overlay -> positive; natural and none -> negative. The mapping is fixed:
/// natural scene text is a negative even though OCR sees it.
BinaryLabel category_to_binary(Category category);

ConfusionMatrix confusion(const std::vector<BinaryLabel>& predictions,
                          const std::vector<BinaryLabel>& truths);

MetricReport summarize(const ConfusionMatrix& matrix);

}  // namespace overlay
