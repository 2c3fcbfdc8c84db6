#include "catbench/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "catbench/errors.hpp"

namespace catbench {

std::vector<RankedCategory> rank_categories(std::span<const double> probs, std::size_t k) {
    if (k < 1 || k > probs.size())
        throw ArgumentError("k must be in [1, " + std::to_string(probs.size()) + "], got " + std::to_string(k));
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    auto before = [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    std::vector<RankedCategory> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back({order[i], probs[order[i]]});
    return out;
}

void validate_prediction(const Prediction& p, std::size_t num_classes, double tolerance) {
    if (p.probs.size() != num_classes)
        throw ValidationError("probability vector has " + std::to_string(p.probs.size()) + " entries, expected " +
                              std::to_string(num_classes));
    double sum = p.other_prob;
    if (!(p.other_prob >= 0.0)) throw ValidationError("negative 'Other' probability");
    for (double v : p.probs) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("probability outside [0, 1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance)
        throw ValidationError("probabilities sum to " + std::to_string(sum) + ", not 1");

    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < p.ranked.size(); ++i) {
        const auto& r = p.ranked[i];
        if (r.category != kOtherCategory && r.category >= num_classes)
            throw ValidationError("ranked category index out of range");
        if (!seen.insert(r.category).second) throw ValidationError("ranked categories are not distinct");
        double expected = r.category == kOtherCategory ? p.other_prob : p.probs[r.category];
        if (r.prob != expected) throw ValidationError("ranked probability disagrees with the distribution");
        if (i > 0) {
            const auto& prev = p.ranked[i - 1];
            bool ordered = prev.prob > r.prob || (prev.prob == r.prob && prev.category < r.category);
            if (!ordered) throw ValidationError("ranked list is not sorted");
        }
    }
}

}  // namespace catbench
