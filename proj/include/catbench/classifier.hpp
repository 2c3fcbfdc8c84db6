#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catbench/dataset.hpp"
#include "catbench/embeddings.hpp"
#include "catbench/prediction.hpp"

namespace catbench {

struct TrainConfig {
    double l2_lambda = 1e-3;
    std::size_t max_iterations = 1000;
    double gradient_tolerance = 1e-5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Multinomial logistic regression over pooled embeddings.
///
/// Coefficients are C rows of D weights followed by one intercept, stored row-major.
class SoftmaxModel {
public:
    SoftmaxModel(CategoryTaxonomy taxonomy, std::size_t dimension, std::vector<double> coefficients);

    const CategoryTaxonomy& taxonomy() const { return taxonomy_; }
    std::size_t num_classes() const { return taxonomy_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::vector<double>& coefficients() const { return coefficients_; }
    double weight(std::size_t cls, std::size_t j) const { return coefficients_[cls * (dimension_ + 1) + j]; }
    double intercept(std::size_t cls) const { return coefficients_[cls * (dimension_ + 1) + dimension_]; }

    std::vector<double> logits(std::span<const double> x) const;
    /// Softmax of the logits, computed after subtracting the largest logit.
    std::vector<double> predict_proba(const AggregatedInput& x) const;
    std::vector<RankedCategory> predict_topk(const AggregatedInput& x, std::size_t k) const;
    Prediction predict(const AggregatedInput& x, std::size_t k) const;

    std::vector<std::uint8_t> encode() const;
    /// Rejects truncation/corruption (IntegrityError) and a different taxonomy or
    /// dimension (CompatibilityError). `expected_dimension` of 0 skips the dimension check.
    static SoftmaxModel decode(std::span<const std::uint8_t> bytes, const CategoryTaxonomy& taxonomy,
                               std::size_t expected_dimension = 0);
    void save(const std::string& path) const;
    static SoftmaxModel load(const std::string& path, const CategoryTaxonomy& taxonomy,
                             std::size_t expected_dimension = 0);

private:
    CategoryTaxonomy taxonomy_;
    std::size_t dimension_;
    std::vector<double> coefficients_;
};

/// Mean cross-entropy plus (lambda/2)*||W||^2, intercepts unpenalized.
class SoftmaxObjective {
public:
    SoftmaxObjective(std::span<const AggregatedInput> inputs, std::span<const std::size_t> labels,
                     std::size_t num_classes, double l2_lambda);

    std::size_t num_classes() const { return num_classes_; }
    std::size_t dimension() const { return static_cast<std::size_t>(design_.cols()) - 1; }
    std::size_t num_parameters() const { return num_classes_ * static_cast<std::size_t>(design_.cols()); }

    /// `beta` is C x (D+1) row-major, as in SoftmaxModel.
    double value(std::span<const double> beta) const;
    double value_and_gradient(std::span<const double> beta, std::span<double> gradient) const;

private:
    double evaluate(const Eigen::MatrixXd& beta, Eigen::MatrixXd* gradient) const;

    Eigen::MatrixXd design_;  // n x (D+1), last column ones
    std::vector<std::size_t> labels_;
    std::size_t num_classes_;
    double l2_lambda_;
};

enum class StopReason { GradientTolerance, IterationLimit, LineSearchStalled };
std::string_view to_string(StopReason r);

struct TrainResult {
    SoftmaxModel model;
    std::size_t iterations;
    double final_loss;
    double gradient_max_norm;
    StopReason stop_reason;
    /// Objective after initialization and after every accepted step.
    std::vector<double> loss_history;
};

/// Full-batch gradient descent from beta = 0 with Armijo backtracking (step halving).
TrainResult train(std::span<const AggregatedInput> inputs, std::span<const std::size_t> labels,
                  const CategoryTaxonomy& taxonomy, const TrainConfig& cfg);

struct LambdaTrial {
    double l2_lambda;
    double validation_loss;  // mean cross-entropy, no penalty
    std::size_t iterations;
};

struct LambdaSelection {
    double best_lambda;
    std::vector<LambdaTrial> trials;
};

inline const std::vector<double> kDefaultLambdaGrid = {1e-4, 1e-3, 1e-2};

/// Fits each grid value on the training part and keeps the lowest validation
/// cross-entropy; ties keep the earlier grid entry.
LambdaSelection select_l2_lambda(std::span<const AggregatedInput> train_inputs, std::span<const std::size_t> train_labels,
                                 std::span<const AggregatedInput> val_inputs, std::span<const std::size_t> val_labels,
                                 const CategoryTaxonomy& taxonomy, const TrainConfig& base,
                                 std::span<const double> grid = kDefaultLambdaGrid);

/// Mean negative log-likelihood of `labels` under `model`.
double mean_cross_entropy(const SoftmaxModel& model, std::span<const AggregatedInput> inputs,
                          std::span<const std::size_t> labels);

}  // namespace catbench
