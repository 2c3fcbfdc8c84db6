#include "catbench/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "catbench/errors.hpp"

namespace catbench {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::string_view kModelMagic = "SMX1";
constexpr double kArmijo = 1e-4;
constexpr std::size_t kMaxHalvings = 60;
constexpr double kMaxStep = 1e4;

void check_training_inputs(std::span<const AggregatedInput> inputs, std::span<const std::size_t> labels,
                           std::size_t num_classes) {
    if (inputs.empty()) throw ArgumentError("training needs at least one example");
    if (inputs.size() != labels.size())
        throw ArgumentError("got " + std::to_string(inputs.size()) + " inputs but " + std::to_string(labels.size()) +
                            " labels");
    const auto dim = inputs.front().values.size();
    if (dim == 0) throw ArgumentError("inputs have dimension 0");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].values.size() != dim)
            throw ArgumentError("input " + std::to_string(i) + " has dimension " +
                                std::to_string(inputs[i].values.size()) + ", expected " + std::to_string(dim));
        if (labels[i] >= num_classes) throw ArgumentError("label out of range at index " + std::to_string(i));
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) throw ArgumentError("l2_lambda must be nonnegative");
    if (max_iterations < 1) throw ArgumentError("max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw ArgumentError("gradient_tolerance must be positive");
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::GradientTolerance: return "gradient-tolerance";
        case StopReason::IterationLimit: return "iteration-limit";
        case StopReason::LineSearchStalled: return "line-search-stalled";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// SoftmaxModel

SoftmaxModel::SoftmaxModel(CategoryTaxonomy taxonomy, std::size_t dimension, std::vector<double> coefficients)
    : taxonomy_(std::move(taxonomy)), dimension_(dimension), coefficients_(std::move(coefficients)) {
    if (dimension_ == 0) throw ArgumentError("model dimension must be >= 1");
    if (coefficients_.size() != taxonomy_.size() * (dimension_ + 1))
        throw ArgumentError("coefficient count does not match C x (D+1)");
    for (double v : coefficients_)
        if (!std::isfinite(v)) throw NumericalError("non-finite model coefficient", 0);
}

std::vector<double> SoftmaxModel::logits(std::span<const double> x) const {
    if (x.size() != dimension_)
        throw ArgumentError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(dimension_));
    std::vector<double> z(num_classes());
    for (std::size_t c = 0; c < z.size(); ++c) {
        const double* row = coefficients_.data() + c * (dimension_ + 1);
        double acc = row[dimension_];
        for (std::size_t j = 0; j < dimension_; ++j) acc += row[j] * x[j];
        z[c] = acc;
    }
    return z;
}

std::vector<double> SoftmaxModel::predict_proba(const AggregatedInput& x) const {
    auto z = logits(x.values);
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        total += v;
    }
    for (auto& v : z) v /= total;
    return z;
}

std::vector<RankedCategory> SoftmaxModel::predict_topk(const AggregatedInput& x, std::size_t k) const {
    if (k < 1 || k > num_classes())
        throw ArgumentError("k must be in [1, " + std::to_string(num_classes()) + "], got " + std::to_string(k));
    return rank_categories(predict_proba(x), k);
}

Prediction SoftmaxModel::predict(const AggregatedInput& x, std::size_t k) const {
    Prediction p;
    p.probs = predict_proba(x);
    p.ranked = rank_categories(p.probs, k);
    return p;
}

std::vector<std::uint8_t> SoftmaxModel::encode() const {
    ByteWriter body;
    body.put_u32(static_cast<std::uint32_t>(num_classes()));
    body.put_u32(static_cast<std::uint32_t>(dimension_));
    auto digest = taxonomy_.digest();
    body.put_bytes(std::span<const std::uint8_t>(digest));
    for (double v : coefficients_) body.put_f64(v);
    ByteWriter out;
    out.put_bytes(kModelMagic);
    out.put_bytes(std::span<const std::uint8_t>(body.bytes()));
    out.put_u32(crc32(body.bytes()));
    return out.bytes();
}

SoftmaxModel SoftmaxModel::decode(std::span<const std::uint8_t> bytes, const CategoryTaxonomy& taxonomy,
                                  std::size_t expected_dimension) {
    constexpr std::size_t kHeader = 4 + 4 + 4 + 32;
    if (bytes.size() < kHeader + 4) throw IntegrityError("model file truncated");
    if (!std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin()))
        throw IntegrityError("model file has bad magic");
    ByteReader r(bytes.subspan(4));
    auto classes = r.get_u32();
    auto dim = r.get_u32();
    const std::uint64_t expected_size = kHeader + 8ull * classes * (static_cast<std::uint64_t>(dim) + 1) + 4;
    if (bytes.size() != expected_size) throw IntegrityError("model file truncated or padded");
    auto body = bytes.subspan(4, bytes.size() - 8);
    ByteReader crc_reader(bytes.subspan(bytes.size() - 4));
    if (crc_reader.get_u32() != crc32(body)) throw IntegrityError("model file CRC mismatch");

    auto stored_digest = r.take(32);
    auto digest = taxonomy.digest();
    if (classes != taxonomy.size() || !std::equal(digest.begin(), digest.end(), stored_digest.begin()))
        throw CompatibilityError("model was trained against a different taxonomy");
    if (expected_dimension != 0 && dim != expected_dimension)
        throw CompatibilityError("model dimension " + std::to_string(dim) + " does not match expected " +
                                 std::to_string(expected_dimension));

    std::vector<double> coef(static_cast<std::size_t>(classes) * (dim + 1));
    for (auto& v : coef) v = r.get_f64();
    return SoftmaxModel(taxonomy, dim, std::move(coef));
}

void SoftmaxModel::save(const std::string& path) const {
    auto bytes = encode();
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

SoftmaxModel SoftmaxModel::load(const std::string& path, const CategoryTaxonomy& taxonomy,
                                std::size_t expected_dimension) {
    auto raw = read_file(path);
    return decode(as_bytes(raw), taxonomy, expected_dimension);
}

// ---------------------------------------------------------------------------
// Objective

SoftmaxObjective::SoftmaxObjective(std::span<const AggregatedInput> inputs, std::span<const std::size_t> labels,
                                   std::size_t num_classes, double l2_lambda)
    : labels_(labels.begin(), labels.end()), num_classes_(num_classes), l2_lambda_(l2_lambda) {
    if (num_classes_ < 2) throw ArgumentError("need at least 2 classes");
    check_training_inputs(inputs, labels, num_classes_);
    const auto n = static_cast<Eigen::Index>(inputs.size());
    const auto d = static_cast<Eigen::Index>(inputs.front().values.size());
    design_.resize(n, d + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = inputs[static_cast<std::size_t>(i)].values;
        for (Eigen::Index j = 0; j < d; ++j) design_(i, j) = v[static_cast<std::size_t>(j)];
        design_(i, d) = 1.0;
    }
}

double SoftmaxObjective::evaluate(const Eigen::MatrixXd& beta, Eigen::MatrixXd* gradient) const {
    const Eigen::Index n = design_.rows();
    const Eigen::Index d = design_.cols() - 1;
    Eigen::MatrixXd scores = design_ * beta.transpose();  // n x C

    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto row = scores.row(i);
        const double zmax = row.maxCoeff();
        const double lse = zmax + std::log((row.array() - zmax).exp().sum());
        nll += lse - row(static_cast<Eigen::Index>(labels_[static_cast<std::size_t>(i)]));
        if (gradient) row = (row.array() - lse).exp();
    }
    const auto weights = beta.leftCols(d);
    double value = nll / static_cast<double>(n) + 0.5 * l2_lambda_ * weights.squaredNorm();

    if (gradient) {
        for (Eigen::Index i = 0; i < n; ++i) scores(i, static_cast<Eigen::Index>(labels_[static_cast<std::size_t>(i)])) -= 1.0;
        *gradient = scores.transpose() * design_ / static_cast<double>(n);
        gradient->leftCols(d) += l2_lambda_ * weights;
    }
    return value;
}

double SoftmaxObjective::value(std::span<const double> beta) const {
    if (beta.size() != num_parameters()) throw ArgumentError("beta has the wrong length");
    Eigen::MatrixXd b = Eigen::Map<const RowMajorMatrix>(beta.data(), static_cast<Eigen::Index>(num_classes_),
                                                         design_.cols());
    return evaluate(b, nullptr);
}

double SoftmaxObjective::value_and_gradient(std::span<const double> beta, std::span<double> gradient) const {
    if (beta.size() != num_parameters() || gradient.size() != num_parameters())
        throw ArgumentError("beta or gradient has the wrong length");
    const auto rows = static_cast<Eigen::Index>(num_classes_);
    Eigen::MatrixXd b = Eigen::Map<const RowMajorMatrix>(beta.data(), rows, design_.cols());
    Eigen::MatrixXd g;
    double v = evaluate(b, &g);
    Eigen::Map<RowMajorMatrix>(gradient.data(), rows, design_.cols()) = g;
    return v;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(std::span<const AggregatedInput> inputs, std::span<const std::size_t> labels,
                  const CategoryTaxonomy& taxonomy, const TrainConfig& cfg) {
    cfg.validate();
    SoftmaxObjective objective(inputs, labels, taxonomy.size(), cfg.l2_lambda);
    const std::size_t p = objective.num_parameters();

    std::vector<double> beta(p, 0.0), grad(p), candidate(p), cand_grad(p);
    double loss = objective.value_and_gradient(beta, grad);
    if (!std::isfinite(loss)) throw NumericalError("non-finite training loss", 0);

    auto max_abs = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };

    std::vector<double> history{loss};
    double step = 1.0;
    std::size_t iterations = 0;
    StopReason reason = StopReason::IterationLimit;
    double gmax = max_abs(grad);

    while (true) {
        if (gmax < cfg.gradient_tolerance) {
            reason = StopReason::GradientTolerance;
            break;
        }
        if (iterations >= cfg.max_iterations) {
            reason = StopReason::IterationLimit;
            break;
        }
        double gnorm2 = 0.0;
        for (double g : grad) gnorm2 += g * g;

        bool accepted = false;
        double t = step;
        double cand_loss = 0.0;
        for (std::size_t h = 0; h <= kMaxHalvings; ++h, t *= 0.5) {
            for (std::size_t i = 0; i < p; ++i) candidate[i] = beta[i] - t * grad[i];
            cand_loss = objective.value_and_gradient(candidate, cand_grad);
            if (std::isfinite(cand_loss) && cand_loss <= loss - kArmijo * t * gnorm2) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            reason = StopReason::LineSearchStalled;
            break;
        }
        ++iterations;
        beta.swap(candidate);
        grad.swap(cand_grad);
        loss = cand_loss;
        if (!std::isfinite(loss)) throw NumericalError("non-finite training loss", iterations);
        history.push_back(loss);
        gmax = max_abs(grad);
        step = std::min(2.0 * t, kMaxStep);
    }

    for (double v : beta)
        if (!std::isfinite(v)) throw NumericalError("non-finite coefficient after training", iterations);

    return TrainResult{SoftmaxModel(taxonomy, objective.dimension(), std::move(beta)),
                       iterations,
                       loss,
                       gmax,
                       reason,
                       std::move(history)};
}

double mean_cross_entropy(const SoftmaxModel& model, std::span<const AggregatedInput> inputs,
                          std::span<const std::size_t> labels) {
    if (inputs.size() != labels.size() || inputs.empty()) throw ArgumentError("need matching, nonempty inputs and labels");
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto z = model.logits(inputs[i].values);
        const double zmax = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - zmax);
        total += zmax + std::log(s) - z.at(labels[i]);
    }
    return total / static_cast<double>(inputs.size());
}

LambdaSelection select_l2_lambda(std::span<const AggregatedInput> train_inputs, std::span<const std::size_t> train_labels,
                                 std::span<const AggregatedInput> val_inputs, std::span<const std::size_t> val_labels,
                                 const CategoryTaxonomy& taxonomy, const TrainConfig& base,
                                 std::span<const double> grid) {
    if (grid.empty()) throw ArgumentError("lambda grid is empty");
    LambdaSelection sel{grid.front(), {}};
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        TrainConfig cfg = base;
        cfg.l2_lambda = lambda;
        auto fit = train(train_inputs, train_labels, taxonomy, cfg);
        double vloss = mean_cross_entropy(fit.model, val_inputs, val_labels);
        sel.trials.push_back({lambda, vloss, fit.iterations});
        if (vloss < best) {
            best = vloss;
            sel.best_lambda = lambda;
        }
    }
    return sel;
}

}  // namespace catbench
