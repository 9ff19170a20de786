#include "heatcast/metrics.hpp"

#include <cmath>

#include "heatcast/errors.hpp"

namespace heatcast {

Scores score(const ConfusionCounts& c) {
    if (c.total() == 0) throw BoundsError("score: empty test set");
    if (c.positives() == 0 || c.negatives() == 0)
        throw BoundsError("score: rates undefined, one class is absent");

    Scores s;
    s.tpr = double(c.tp) / double(c.positives());
    s.fpr = double(c.fp) / double(c.negatives());

    const uint64_t pp = c.tp + c.fp;  // predicted positive
    const uint64_t pn = c.tn + c.fn;  // predicted negative
    if (pp == 0 || pn == 0) {
        s.mcc = 0.0;
        return s;
    }
    // tp*tn and fp*fn each fit 128 bits for counts <= 1e9; the difference is
    // exact. Denominator factors are exact in long double; the product order
    // (a*b)*(c*d) is fixed.
    const __int128 num =
        __int128(c.tp) * __int128(c.tn) - __int128(c.fp) * __int128(c.fn);
    const long double denom = (static_cast<long double>(pp) * static_cast<long double>(c.positives())) *
                              (static_cast<long double>(pn) * static_cast<long double>(c.negatives()));
    s.mcc = double(static_cast<long double>(num) / std::sqrt(denom));
    return s;
}

}  // namespace heatcast
