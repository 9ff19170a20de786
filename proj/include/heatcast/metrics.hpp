#pragma once

#include <cstdint>

namespace heatcast {

struct ConfusionCounts {
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t tn = 0;
    uint64_t fn = 0;

    uint64_t total() const { return tp + fp + tn + fn; }
    uint64_t positives() const { return tp + fn; }
    uint64_t negatives() const { return fp + tn; }
};

struct Scores {
    double tpr = 0.0;
    double fpr = 0.0;
    double mcc = 0.0;
};

/// TPR, FPR and the Matthews correlation coefficient. Exact integer
/// arithmetic feeds the floating evaluation, safe for counts up to 1e9.
/// When any MCC denominator factor is zero the MCC is 0 by convention.
/// Throws BoundsError on an empty test set or when either class is absent.
Scores score(const ConfusionCounts& counts);

}  // namespace heatcast
