#include "overlay/metrics.hpp"

namespace overlay {

BinaryLabel category_to_binary(Category category) {
    return category == Category::overlay ? BinaryLabel::positive : BinaryLabel::negative;
}

ConfusionMatrix confusion(const std::vector<BinaryLabel>& predictions,
                          const std::vector<BinaryLabel>& truths) {
    if (predictions.size() != truths.size())
        throw ContractError("confusion: prediction/truth length mismatch");
    if (predictions.empty())
        throw ContractError("confusion: empty input");
    ConfusionMatrix m;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const bool pred = predictions[i] == BinaryLabel::positive;
        const bool truth = truths[i] == BinaryLabel::positive;
        if (pred && truth) ++m.tp;
        else if (pred && !truth) ++m.fp;
        else if (!pred && truth) ++m.fn;
        else ++m.tn;
    }
    return m;
}

MetricReport summarize(const ConfusionMatrix& matrix) {
    const long n = matrix.total();
    if (n == 0) throw ContractError("summarize: empty confusion matrix");
    MetricReport r;
    r.matrix = matrix;
    r.n = n;
    if (matrix.tp + matrix.fp > 0)
        r.precision = static_cast<double>(matrix.tp) / (matrix.tp + matrix.fp);
    if (matrix.tp + matrix.fn > 0)
        r.recall = static_cast<double>(matrix.tp) / (matrix.tp + matrix.fn);
    r.accuracy = static_cast<double>(matrix.tp + matrix.tn) / n;
    return r;
}

}  // namespace overlay
