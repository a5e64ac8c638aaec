#include "uwno/metrics.hpp"

#include <stdexcept>

namespace uwno {

namespace {

bool binary_bit(float v, const char* which) {
    if (v == 0.0f) return false;
    if (v == 1.0f) return true;
    throw std::invalid_argument(std::string("confusion_counts: ") + which +
                                " mask holds a non-binary value " + std::to_string(v));
}

} // namespace

ConfusionCounts confusion_counts(const Tensor& pred, const Tensor& gt) {
    if (pred.shape() != gt.shape()) {
        throw std::invalid_argument("confusion_counts: shape mismatch " +
                                    shape_str(pred.shape()) + " vs " + shape_str(gt.shape()));
    }
    ConfusionCounts c;
    auto pv = pred.data();
    auto gv = gt.data();
    for (int i = 0; i < pred.numel(); ++i) {
        const bool p = binary_bit(pv[static_cast<size_t>(i)], "predicted");
        const bool g = binary_bit(gv[static_cast<size_t>(i)], "reference");
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double dice_score(const ConfusionCounts& c) {
    const int64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;   // both masks empty: perfect agreement
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

} // namespace uwno
