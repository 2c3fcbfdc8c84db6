#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace catbench {

/// Index of the non-taxonomy "Other" sink. Never equals a true label.
inline constexpr std::size_t kOtherCategory = std::numeric_limits<std::size_t>::max();

struct RankedCategory {
    std::size_t category;
    double prob;

    bool operator==(const RankedCategory&) const = default;
};

/// Per-observation output of any classifier path.
///
/// `probs` covers every taxonomy category; `other_prob` is mass placed on the
/// "Other" sink (freeform prompting only). Together they sum to 1. `ranked` is
/// sorted by descending probability, ties by ascending category index, with the
/// sink ordered after every real category at equal probability.
struct Prediction {
    std::vector<double> probs;
    double other_prob = 0.0;
    std::vector<RankedCategory> ranked;

    double top_probability() const { return ranked.empty() ? 0.0 : ranked.front().prob; }
};

/// The first k categories of `probs` under the ranking rule.
std::vector<RankedCategory> rank_categories(std::span<const double> probs, std::size_t k);

/// Distribution sums to 1 within `tolerance`, entries nonnegative, ranking ordered and distinct.
/// Throws ValidationError describing the first violation.
void validate_prediction(const Prediction& p, std::size_t num_classes, double tolerance = 1e-6);

}  // namespace catbench
