#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "catbench/dataset.hpp"
#include "catbench/prediction.hpp"

namespace catbench {

struct ProPortfolio {
    struct Record {
        std::string pro_id;
        std::set<std::size_t> categories;
    };
    std::vector<Record> records;
};

/// Line-delimited JSON {"pro_id", "categories": [names]}.
ProPortfolio load_portfolio(const std::string& path, const CategoryTaxonomy& taxonomy);
ProPortfolio parse_portfolio(std::string_view contents, const CategoryTaxonomy& taxonomy);

/// rel(p, q): share of professionals offering p who also offer q. Not symmetric.
class RelevanceMatrix {
public:
    /// Identity relevance: exact matches only.
    static RelevanceMatrix identity(std::size_t num_classes);
    RelevanceMatrix(std::size_t num_classes, std::vector<double> values);

    std::size_t size() const { return n_; }
    /// Relevance of predicted category q to true category p; 0 for the "Other" sink.
    double operator()(std::size_t p, std::size_t q) const {
        return q == kOtherCategory ? 0.0 : values_[p * n_ + q];
    }
    const std::vector<double>& values() const { return values_; }

    /// Categories that no professional offers (their row falls back to identity).
    std::vector<std::size_t> unsupported_categories;

private:
    std::size_t n_;
    std::vector<double> values_;
};

RelevanceMatrix relevance_matrix(const ProPortfolio& portfolio, std::size_t num_classes);

double accuracy_at_k(std::span<const Prediction> preds, std::span<const std::size_t> truths, std::size_t k);
double relative_accuracy_at_k(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                              const RelevanceMatrix& rel, std::size_t k);
/// Per-observation min(1, sum of relevance over the top k).
double relative_hit(const Prediction& pred, std::size_t truth, const RelevanceMatrix& rel, std::size_t k);

/// Mean over observations of sum_c (f_c - o_c)^2, including the "Other" sink.
double brier_score(std::span<const Prediction> preds, std::span<const std::size_t> truths);

struct CalibrationBin {
    double mean_top_probability;
    double mean_relative_accuracy;
    std::size_t count;
};

/// Observations ordered by top probability and cut into `bins` quantile groups,
/// the first n % bins groups one observation larger.
std::vector<CalibrationBin> calibration_curve(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                                              const RelevanceMatrix& rel, std::size_t bins);

/// Counts of top probabilities in `bins` equal-width bins over [0, 1].
std::vector<std::size_t> top_probability_histogram(std::span<const Prediction> preds, std::size_t bins = 20);

struct MetricSection {
    std::size_t n = 0;
    std::vector<double> accuracy;           // index k-1
    std::vector<double> relative_accuracy;  // index k-1
    double brier = 0.0;
    std::vector<CalibrationBin> calibration;  // empty when n < bins
    std::vector<std::size_t> histogram;
};

struct EvaluationReport {
    std::size_t k_max = 10;
    std::size_t bins = 10;
    MetricSection overall;
    /// Indexed like kAllInputTypes; empty when the subgroup has no observations.
    std::array<std::optional<MetricSection>, 3> by_input_type;
    std::vector<std::size_t> unsupported_categories;
};

MetricSection compute_section(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                              const RelevanceMatrix& rel, std::size_t k_max, std::size_t bins);

/// Overall metrics plus the same metrics recomputed for each input type.
EvaluationReport evaluate(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                          std::span<const InputType> input_types, const RelevanceMatrix& rel, std::size_t k_max,
                          std::size_t bins);

}  // namespace catbench
