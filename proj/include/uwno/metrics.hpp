#pragma once

#include "uwno/tensor.hpp"

#include <cstdint>

namespace uwno {

// Pixel-level tallies between a predicted and a reference binary mask.
struct ConfusionCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t tn = 0;

    int64_t total() const { return tp + fp + fn + tn; }
};

// Both tensors must hold exactly 0 or 1 and share a shape.
ConfusionCounts confusion_counts(const Tensor& pred, const Tensor& gt);

// DS = 2*TP / (2*TP + FP + FN); defined as 1.0 when both masks are empty.
double dice_score(const ConfusionCounts& c);

} // namespace uwno
