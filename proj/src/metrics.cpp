#include "catbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "catbench/errors.hpp"

namespace catbench {

using json = nlohmann::json;

namespace {

void check_lengths(std::span<const Prediction> preds, std::span<const std::size_t> truths) {
    if (preds.size() != truths.size())
        throw ArgumentError("got " + std::to_string(preds.size()) + " predictions but " +
                            std::to_string(truths.size()) + " labels");
}

double mean(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

}  // namespace

ProPortfolio parse_portfolio(std::string_view contents, const CategoryTaxonomy& taxonomy) {
    ProPortfolio out;
    std::size_t line_no = 0, start = 0;
    while (start < contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string_view::npos) end = contents.size();
        auto line = contents.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!rec.is_object() || !rec.contains("pro_id") || !rec.contains("categories") ||
            !rec["categories"].is_array())
            throw ParseError("portfolio record needs 'pro_id' and a 'categories' array", line_no);
        ProPortfolio::Record r;
        r.pro_id = rec["pro_id"].is_string() ? rec["pro_id"].get<std::string>() : rec["pro_id"].dump();
        for (const auto& c : rec["categories"]) {
            if (!c.is_string()) throw ParseError("category names must be strings", line_no);
            auto idx = taxonomy.index_of(c.get<std::string>());
            if (!idx)
                throw ValidationError("line " + std::to_string(line_no) + ": unknown category '" +
                                      c.get<std::string>() + "'");
            r.categories.insert(*idx);
        }
        if (r.categories.empty())
            throw ValidationError("line " + std::to_string(line_no) + ": professional offers no categories");
        out.records.push_back(std::move(r));
    }
    return out;
}

ProPortfolio load_portfolio(const std::string& path, const CategoryTaxonomy& taxonomy) {
    return parse_portfolio(read_file(path), taxonomy);
}

RelevanceMatrix RelevanceMatrix::identity(std::size_t num_classes) {
    std::vector<double> v(num_classes * num_classes, 0.0);
    for (std::size_t i = 0; i < num_classes; ++i) v[i * num_classes + i] = 1.0;
    return RelevanceMatrix(num_classes, std::move(v));
}

RelevanceMatrix::RelevanceMatrix(std::size_t num_classes, std::vector<double> values)
    : n_(num_classes), values_(std::move(values)) {
    if (values_.size() != n_ * n_) throw ArgumentError("relevance matrix must be C x C");
    for (double v : values_)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("relevance entries must lie in [0, 1]");
}

RelevanceMatrix relevance_matrix(const ProPortfolio& portfolio, std::size_t num_classes) {
    std::vector<std::size_t> offering(num_classes, 0);
    std::vector<std::size_t> both(num_classes * num_classes, 0);
    for (const auto& rec : portfolio.records) {
        for (auto p : rec.categories) {
            if (p >= num_classes) throw ArgumentError("portfolio category index out of range");
            ++offering[p];
            for (auto q : rec.categories) ++both[p * num_classes + q];
        }
    }
    std::vector<double> values(num_classes * num_classes, 0.0);
    std::vector<std::size_t> unsupported;
    for (std::size_t p = 0; p < num_classes; ++p) {
        if (offering[p] == 0) {
            unsupported.push_back(p);
            values[p * num_classes + p] = 1.0;
            continue;
        }
        for (std::size_t q = 0; q < num_classes; ++q)
            values[p * num_classes + q] =
                static_cast<double>(both[p * num_classes + q]) / static_cast<double>(offering[p]);
    }
    RelevanceMatrix rel(num_classes, std::move(values));
    rel.unsupported_categories = std::move(unsupported);
    return rel;
}

double accuracy_at_k(std::span<const Prediction> preds, std::span<const std::size_t> truths, std::size_t k) {
    check_lengths(preds, truths);
    if (k < 1) throw ArgumentError("k must be >= 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& ranked = preds[i].ranked;
        const auto top = std::min(k, ranked.size());
        for (std::size_t j = 0; j < top; ++j) {
            if (ranked[j].category == truths[i]) {
                ++hits;
                break;
            }
        }
    }
    return mean(static_cast<double>(hits), preds.size());
}

double relative_hit(const Prediction& pred, std::size_t truth, const RelevanceMatrix& rel, std::size_t k) {
    if (truth >= rel.size()) throw ArgumentError("label outside the relevance matrix");
    double total = 0.0;
    const auto top = std::min(k, pred.ranked.size());
    for (std::size_t j = 0; j < top; ++j) total += rel(truth, pred.ranked[j].category);
    return std::min(1.0, total);
}

double relative_accuracy_at_k(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                              const RelevanceMatrix& rel, std::size_t k) {
    check_lengths(preds, truths);
    if (k < 1) throw ArgumentError("k must be >= 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum += relative_hit(preds[i], truths[i], rel, k);
    return mean(sum, preds.size());
}

double brier_score(std::span<const Prediction> preds, std::span<const std::size_t> truths) {
    check_lengths(preds, truths);
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        double total = p.other_prob;
        for (double v : p.probs) total += v;
        if (std::abs(total - 1.0) > 1e-6)
            throw ValidationError("observation " + std::to_string(i) + ": probabilities sum to " +
                                  std::to_string(total));
        if (truths[i] >= p.probs.size()) throw ArgumentError("label outside the probability vector");
        double obs = p.other_prob * p.other_prob;
        for (std::size_t c = 0; c < p.probs.size(); ++c) {
            const double d = p.probs[c] - (c == truths[i] ? 1.0 : 0.0);
            obs += d * d;
        }
        sum += obs;
    }
    return mean(sum, preds.size());
}

std::vector<CalibrationBin> calibration_curve(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                                              const RelevanceMatrix& rel, std::size_t bins) {
    check_lengths(preds, truths);
    if (bins < 2) throw ArgumentError("calibration needs at least 2 bins");
    if (preds.size() < bins)
        throw ArgumentError("calibration needs at least as many observations (" + std::to_string(preds.size()) +
                            ") as bins (" + std::to_string(bins) + ")");
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return preds[a].top_probability() < preds[b].top_probability();
    });

    const std::size_t base = preds.size() / bins;
    const std::size_t extra = preds.size() % bins;
    std::vector<CalibrationBin> out;
    out.reserve(bins);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t count = base + (b < extra ? 1 : 0);
        double prob_sum = 0.0, acc_sum = 0.0;
        for (std::size_t j = pos; j < pos + count; ++j) {
            const auto i = order[j];
            prob_sum += preds[i].top_probability();
            acc_sum += relative_hit(preds[i], truths[i], rel, 1);
        }
        out.push_back({mean(prob_sum, count), mean(acc_sum, count), count});
        pos += count;
    }
    return out;
}

std::vector<std::size_t> top_probability_histogram(std::span<const Prediction> preds, std::size_t bins) {
    if (bins < 1) throw ArgumentError("histogram needs at least one bin");
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& p : preds) {
        double t = std::clamp(p.top_probability(), 0.0, 1.0);
        auto b = static_cast<std::size_t>(t * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    return counts;
}

MetricSection compute_section(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                              const RelevanceMatrix& rel, std::size_t k_max, std::size_t bins) {
    MetricSection s;
    s.n = preds.size();
    for (std::size_t k = 1; k <= k_max; ++k) {
        s.accuracy.push_back(accuracy_at_k(preds, truths, k));
        s.relative_accuracy.push_back(relative_accuracy_at_k(preds, truths, rel, k));
    }
    s.brier = brier_score(preds, truths);
    if (preds.size() >= bins) s.calibration = calibration_curve(preds, truths, rel, bins);
    s.histogram = top_probability_histogram(preds, 20);
    return s;
}

EvaluationReport evaluate(std::span<const Prediction> preds, std::span<const std::size_t> truths,
                          std::span<const InputType> input_types, const RelevanceMatrix& rel, std::size_t k_max,
                          std::size_t bins) {
    check_lengths(preds, truths);
    if (input_types.size() != preds.size()) throw ArgumentError("input types do not line up with predictions");
    if (k_max < 1) throw ArgumentError("k_max must be >= 1");

    EvaluationReport report;
    report.k_max = k_max;
    report.bins = bins;
    report.overall = compute_section(preds, truths, rel, k_max, bins);
    report.unsupported_categories = rel.unsupported_categories;

    for (std::size_t t = 0; t < 3; ++t) {
        std::vector<Prediction> sub_preds;
        std::vector<std::size_t> sub_truths;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (input_types[i] != kAllInputTypes[t]) continue;
            sub_preds.push_back(preds[i]);
            sub_truths.push_back(truths[i]);
        }
        if (!sub_preds.empty()) report.by_input_type[t] = compute_section(sub_preds, sub_truths, rel, k_max, bins);
    }
    return report;
}

}  // namespace catbench
