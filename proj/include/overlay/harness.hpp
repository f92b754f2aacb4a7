#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "overlay/dataset.hpp"
#include "overlay/metrics.hpp"
#include "overlay/verdict.hpp"

namespace overlay {

/// One evaluated sample: exactly one of verdict / error is set.
struct PredictionRecord {
    std::string image_id;
    std::string strategy;
    std::optional<OverlayVerdict> verdict;
    Category truth_category = Category::none;
    BinaryLabel truth_binary = BinaryLabel::negative;
    std::optional<std::string> error;
};

/// Per-image detection callback; throws to signal a per-sample failure.
using StrategyFn = std::function<OverlayVerdict(const ImageSample&)>;

/// Runs the strategy over every sample with up to `parallelism` images in
/// flight. Output order matches manifest order regardless of completion
/// order; per-sample failures become error-tagged records, never aborts.
std::vector<PredictionRecord> evaluate(const Manifest& manifest,
                                       const std::string& strategy_name,
                                       const StrategyFn& strategy,
                                       int parallelism);

enum class ErrorPolicy { count_as_negative, exclude };

MetricReport score(const std::vector<PredictionRecord>& records,
                   ErrorPolicy policy = ErrorPolicy::count_as_negative);

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

struct ComparisonReport {
    struct Row {
        std::string strategy;
        MetricReport metrics;
    };
    std::vector<Row> rows;
    std::string dataset_fingerprint;
    std::string generated_at;  // empty in deterministic outputs
};

/// FNV-1a over the manifest file bytes, rendered as 16 hex digits.
std::string fingerprint_file(const std::filesystem::path& path);

/// Model | Precision | Recall | Accuracy with 2-decimal cells; undefined
/// metrics render as an em dash.
std::string render_table(const ComparisonReport& report);

/// Machine format keeps full precision plus the confusion matrices.
void save_report(const ComparisonReport& report, const std::filesystem::path& path);
ComparisonReport load_report(const std::filesystem::path& path);

}  // namespace overlay
