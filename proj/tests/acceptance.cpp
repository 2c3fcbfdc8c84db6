// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catbench/bench.hpp"
#include "catbench/classifier.hpp"
#include "catbench/cli.hpp"
#include "catbench/codec.hpp"
#include "catbench/embeddings.hpp"
#include "catbench/errors.hpp"
#include "catbench/metrics.hpp"
#include "catbench/prompting.hpp"
#include "synthetic.hpp"
#include "test_support.hpp"

using namespace catbench;
using json = nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

// ---- independent oracles ----

std::vector<std::size_t> oracle_order(const std::vector<double>& p) {
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    return idx;
}

double oracle_accuracy(const std::vector<std::vector<double>>& P, const std::vector<std::size_t>& y, std::size_t k) {
    double hits = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        auto order = oracle_order(P[i]);
        for (std::size_t j = 0; j < k; ++j)
            if (order[j] == y[i]) hits += 1;
    }
    return hits / static_cast<double>(P.size());
}

double oracle_relative(const std::vector<std::vector<double>>& P, const std::vector<std::size_t>& y,
                       const std::vector<std::vector<double>>& rel, std::size_t k) {
    double total = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        auto order = oracle_order(P[i]);
        double s = 0;
        for (std::size_t j = 0; j < k; ++j) s += rel[y[i]][order[j]];
        total += std::min(1.0, s);
    }
    return total / static_cast<double>(P.size());
}

double oracle_brier(const std::vector<std::vector<double>>& P, const std::vector<std::size_t>& y) {
    double total = 0;
    for (std::size_t i = 0; i < P.size(); ++i)
        for (std::size_t c = 0; c < P[i].size(); ++c) {
            const double o = c == y[i] ? 1.0 : 0.0;
            total += (P[i][c] - o) * (P[i][c] - o);
        }
    return total / static_cast<double>(P.size());
}

std::vector<std::vector<double>> oracle_relevance(const std::vector<std::set<std::size_t>>& pros, std::size_t C) {
    std::vector<std::vector<double>> rel(C, std::vector<double>(C, 0.0));
    for (std::size_t p = 0; p < C; ++p) {
        double offer_p = 0;
        for (const auto& s : pros) offer_p += s.count(p);
        for (std::size_t q = 0; q < C; ++q) {
            if (offer_p == 0) {
                rel[p][q] = p == q ? 1.0 : 0.0;
                continue;
            }
            double both = 0;
            for (const auto& s : pros) both += (s.count(p) && s.count(q)) ? 1 : 0;
            rel[p][q] = both / offer_p;
        }
    }
    return rel;
}

Prediction make_prediction(std::vector<double> probs) {
    Prediction p;
    p.ranked = rank_categories(probs, probs.size());
    p.probs = std::move(probs);
    return p;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t C, bool allow_ties) {
    std::vector<double> v(C);
    if (allow_ties) {
        std::uniform_int_distribution<int> d(0, 3);
        for (auto& x : v) x = d(rng);
        if (std::accumulate(v.begin(), v.end(), 0.0) == 0) v[0] = 1;
    } else {
        std::exponential_distribution<double> e(1.0);
        for (auto& x : v) x = e(rng);
    }
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) x /= s;
    return v;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string fmt(double v) {
    std::ostringstream o;
    o << std::setprecision(10) << v;
    return o.str();
}

CategoryTaxonomy numbered_taxonomy(std::size_t C) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < C; ++c) names.push_back(testing::category_name(c));
    return CategoryTaxonomy(names);
}

// ---- criteria ----

Outcome criterion_cost() {
    Outcome o;
    testing::TempDir dir("acc_cost");
    std::ostringstream out, err;
    const int code = run_cli({"cost", "--config", testing::fixture("cost/reference_inputs.json"), "--out", dir / "c.json"},
                             out, err);
    o.require(code == kExitOk, "cost exited " + std::to_string(code) + ": " + err.str());
    if (!o.pass) return o;
    auto rep = json::parse(read_file(dir / "c.json"));
    auto micros = [&](const char* a, const char* b) { return rep[a][b]["micros"].get<std::int64_t>(); };
    o.require(rep["embeddings"]["annual"]["micros"].get<std::int64_t>() == 9'179'080'000, "embeddings micros");
    o.require(micros("api", "image") == 80'325'000'000, "api image micros");
    o.require(micros("api", "tokens") == 12'001'500'000, "api token micros");
    o.require(micros("api", "total") == 92'326'500'000, "api total micros");
    o.require(rep["embeddings"]["annual"]["exact"] == "$9,179.08", "embeddings display");
    o.require(rep["api"]["image"]["exact"] == "$80,325.00", "image display");
    o.require(rep["api"]["tokens"]["exact"] == "$12,001.50", "token display");
    o.require(rep["embeddings"]["annual"]["rounded"] == "$9,179", "embeddings rounded");
    o.require(rep["api"]["image"]["rounded"] == "$80,325", "image rounded");
    if (o.pass)
        o.detail = "embeddings " + rep["embeddings"]["annual"]["exact"].get<std::string>() + ", api " +
                   rep["api"]["image"]["exact"].get<std::string>() + " + " +
                   rep["api"]["tokens"]["exact"].get<std::string>() + " = " +
                   rep["api"]["total"]["exact"].get<std::string>();
    return o;
}

Outcome criterion_capacity() {
    Outcome o;
    CostModelInputs in;
    in.throughput_rps = 2;
    in.utilization = 1.0;
    o.require(daily_capacity(in) == 172'800, "daily capacity " + std::to_string(daily_capacity(in)));
    o.require(annual_capacity(in) == 63'072'000, "annual capacity " + std::to_string(annual_capacity(in)));
    if (o.pass) o.detail = "172800/day, 63072000/year";
    return o;
}

Outcome criterion_metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::size_t checked = 0;
    for (int trial = 0; trial < 1000 && o.pass; ++trial) {
        const std::size_t C = 2 + rng() % 9;
        const std::size_t n = 1 + rng() % 50;
        const std::size_t k = 1 + rng() % C;
        const bool ties = trial % 4 == 0;
        std::vector<std::vector<double>> P;
        std::vector<Prediction> preds;
        std::vector<std::size_t> y;
        for (std::size_t i = 0; i < n; ++i) {
            P.push_back(random_simplex(rng, C, ties));
            preds.push_back(make_prediction(P.back()));
            y.push_back(rng() % C);
        }
        std::vector<std::set<std::size_t>> pros(1 + rng() % 12);
        ProPortfolio pf;
        for (std::size_t p = 0; p < pros.size(); ++p) {
            for (std::size_t c = 0; c < C; ++c)
                if (rng() % 3 == 0) pros[p].insert(c);
            pf.records.push_back({"p" + std::to_string(p), pros[p]});
        }
        const auto rel_oracle = oracle_relevance(pros, C);
        const auto rel = relevance_matrix(pf, C);
        for (std::size_t p = 0; p < C; ++p)
            for (std::size_t q = 0; q < C; ++q)
                o.require(close(rel(p, q), rel_oracle[p][q], 1e-12), "relevance mismatch trial " + std::to_string(trial));

        o.require(close(accuracy_at_k(preds, y, k), oracle_accuracy(P, y, k), 1e-12),
                  "accuracy@k mismatch trial " + std::to_string(trial));
        o.require(close(relative_accuracy_at_k(preds, y, rel, k), oracle_relative(P, y, rel_oracle, k), 1e-12),
                  "relative accuracy@k mismatch trial " + std::to_string(trial));
        o.require(close(brier_score(preds, y), oracle_brier(P, y), 1e-12),
                  "brier mismatch trial " + std::to_string(trial));
        ++checked;
    }
    if (o.pass) o.detail = std::to_string(checked) + " random instances within 1e-12";
    return o;
}

Outcome criterion_example_two() {
    Outcome o;
    auto tax = CategoryTaxonomy({"Furniture Assembly", "Appliance Installation", "Plumbing"});
    // 10 professionals offer Furniture Assembly; 8 of them also Appliance Installation.
    ProPortfolio pf;
    for (int i = 0; i < 10; ++i) {
        std::set<std::size_t> cats = {0};
        if (i < 8) cats.insert(1);
        pf.records.push_back({"pro" + std::to_string(i), cats});
    }
    auto rel = relevance_matrix(pf, tax.size());
    std::vector<Prediction> preds = {make_prediction({0.1, 0.7, 0.2})};
    std::vector<std::size_t> truth = {0};
    const double acc = accuracy_at_k(preds, truth, 1);
    const double racc = relative_accuracy_at_k(preds, truth, rel, 1);
    o.require(rel(0, 1) == 0.8, "Rel(FA, AI) = " + fmt(rel(0, 1)));
    o.require(acc == 0.0, "accuracy@1 = " + fmt(acc));
    o.require(racc == 0.8, "relative accuracy@1 = " + fmt(racc));
    if (o.pass) o.detail = "accuracy@1 = 0, relative accuracy@1 = 0.8";
    return o;
}

Outcome criterion_metric_laws() {
    Outcome o;
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300 && o.pass; ++trial) {
        const std::size_t C = 2 + rng() % 15;
        const std::size_t n = 1 + rng() % 40;
        std::vector<Prediction> preds;
        std::vector<std::size_t> y;
        for (std::size_t i = 0; i < n; ++i) {
            preds.push_back(make_prediction(random_simplex(rng, C, trial % 3 == 0)));
            y.push_back(rng() % C);
        }
        std::vector<double> vals(C * C);
        for (std::size_t p = 0; p < C; ++p)
            for (std::size_t q = 0; q < C; ++q) vals[p * C + q] = p == q ? 1.0 : std::uniform_real_distribution<>(0, 1)(rng);
        RelevanceMatrix rel(C, vals);
        double prev_acc = 0, prev_rel = 0;
        for (std::size_t k = 1; k <= C; ++k) {
            const double a = accuracy_at_k(preds, y, k);
            const double r = relative_accuracy_at_k(preds, y, rel, k);
            o.require(a + 1e-15 >= prev_acc, "accuracy not monotone in k");
            o.require(r + 1e-15 >= prev_rel, "relative accuracy not monotone in k");
            o.require(r + 1e-15 >= a, "relative accuracy below accuracy");
            for (std::size_t i = 0; i < n; ++i)
                o.require(relative_hit(preds[i], y[i], rel, k) <= 1.0, "relative hit above 1");
            prev_acc = a;
            prev_rel = r;
        }
        const double b = brier_score(preds, y);
        o.require(b >= 0.0 && b <= 2.0, "brier outside [0, 2]: " + fmt(b));
    }
    const std::size_t C = 95;
    std::vector<Prediction> uniform(37, make_prediction(std::vector<double>(C, 1.0 / C)));
    std::vector<std::size_t> y(37);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = (i * 13) % C;
    const double b = brier_score(uniform, y);
    o.require(close(b, (C - 1.0) / C, 1e-12), "uniform brier " + fmt(b));
    if (o.pass) o.detail = "laws hold on 300 instances; uniform brier at C=95 = " + fmt(b);
    return o;
}

Outcome criterion_classifier() {
    Outcome o;
    std::mt19937_64 rng(11);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 2 + rng() % 4, D = 1 + rng() % 5, n = 3 + rng() % 10;
        const double lambda = (trial % 2) ? 1e-2 : 0.0;
        std::vector<AggregatedInput> X;
        std::vector<std::size_t> y;
        for (std::size_t i = 0; i < n; ++i) {
            X.push_back({testing::random_vector(rng, D, -2, 2)});
            y.push_back(rng() % C);
        }
        SoftmaxObjective obj(X, y, C, lambda);
        auto beta = testing::random_vector(rng, obj.num_parameters(), -1, 1);
        std::vector<double> g(beta.size());
        obj.value_and_gradient(beta, g);
        double num = 0, den = 0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            const double h = 1e-5;
            auto bp = beta, bm = beta;
            bp[j] += h;
            bm[j] -= h;
            const double fd = (obj.value(bp) - obj.value(bm)) / (2 * h);
            num += (g[j] - fd) * (g[j] - fd);
            den += std::max(g[j] * g[j], fd * fd);
        }
        const double relerr = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
        worst = std::max(worst, relerr);
    }
    o.require(worst < 1e-4, "gradient relative error " + fmt(worst));

    // Shift invariance: a common offset on every intercept leaves probabilities unchanged.
    double shift_err = 0, sum_err = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = 2 + rng() % 8, D = 1 + rng() % 6;
        auto tax = numbered_taxonomy(C);
        auto coef = testing::random_vector(rng, C * (D + 1), -3, 3);
        auto shifted = coef;
        const double offset = std::uniform_real_distribution<>(-50, 50)(rng);
        for (std::size_t c = 0; c < C; ++c) shifted[c * (D + 1) + D] += offset;
        SoftmaxModel a(tax, D, coef), b(tax, D, shifted);
        AggregatedInput x{testing::random_vector(rng, D, -2, 2)};
        auto pa = a.predict_proba(x), pb = b.predict_proba(x);
        double s = 0;
        for (std::size_t c = 0; c < C; ++c) {
            shift_err = std::max(shift_err, std::abs(pa[c] - pb[c]));
            s += pa[c];
        }
        sum_err = std::max(sum_err, std::abs(s - 1.0));
    }
    o.require(shift_err <= 1e-12, "shift invariance error " + fmt(shift_err));
    o.require(sum_err <= 1e-9, "probability sum error " + fmt(sum_err));

    // Separable 3-class blobs, D = 8, n = 300.
    const std::size_t D = 8;
    std::normal_distribution<double> gauss(0, 1);
    std::vector<std::vector<double>> centers(3, std::vector<double>(D, 0.0));
    for (std::size_t c = 0; c < 3; ++c) centers[c][c] = 4.0;
    std::vector<AggregatedInput> X;
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < 300; ++i) {
        const std::size_t c = i % 3;
        std::vector<double> v(D);
        for (std::size_t j = 0; j < D; ++j) v[j] = centers[c][j] + 0.5 * gauss(rng);
        X.push_back({v});
        y.push_back(c);
    }
    auto fit = train(X, y, numbered_taxonomy(3), TrainConfig{});
    std::size_t hits = 0;
    for (std::size_t i = 0; i < X.size(); ++i) hits += fit.model.predict_topk(X[i], 1).front().category == y[i];
    const double acc = static_cast<double>(hits) / X.size();
    o.require(acc >= 0.95, "blob training accuracy " + fmt(acc));
    if (o.pass)
        o.detail = "gradient rel err " + fmt(worst) + ", shift err " + fmt(shift_err) + ", blob accuracy " + fmt(acc);
    return o;
}

class MapProvider final : public EmbeddingProvider {
public:
    explicit MapProvider(std::size_t dim) : dim_(dim) {}
    std::size_t dimension() const override { return dim_; }
    std::vector<double> fetch(EmbeddingKind, const std::string& payload) override {
        auto it = vectors.find(payload);
        if (it == vectors.end()) throw MissingEmbeddingError(payload);
        return it->second;
    }
    std::map<std::string, std::vector<double>> vectors;

private:
    std::size_t dim_;
};

Outcome criterion_aggregation() {
    Outcome o;
    std::mt19937_64 rng(5);
    const std::size_t D = 16;
    auto provider = std::make_shared<MapProvider>(D);
    Embedder emb(provider);
    auto max_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
        double m = a.size() == b.size() ? 0.0 : INFINITY;
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    };
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng() % 5;
        std::vector<std::string> refs;
        provider->vectors["text"] = testing::random_vector(rng, D, -5, 5);
        for (std::size_t j = 0; j < m; ++j) {
            refs.push_back("img" + std::to_string(j));
            provider->vectors[refs.back()] = testing::random_vector(rng, D, -5, 5);
        }
        std::vector<double> mean(D, 0.0);
        for (const auto& r : refs)
            for (std::size_t d = 0; d < D; ++d) mean[d] += provider->vectors[r][d];
        for (auto& v : mean) v /= static_cast<double>(m);
        std::vector<double> both(D);
        for (std::size_t d = 0; d < D; ++d) both[d] = (provider->vectors["text"][d] + mean[d]) / 2.0;

        worst = std::max(worst, max_diff(emb.aggregate(std::nullopt, refs).values, mean));
        worst = std::max(worst, max_diff(emb.aggregate(std::string("text"), {}).values, provider->vectors["text"]));
        worst = std::max(worst, max_diff(emb.aggregate(std::string("text"), refs).values, both));
        auto perm = refs;
        std::shuffle(perm.begin(), perm.end(), rng);
        worst = std::max(worst, max_diff(emb.aggregate(std::string("text"), perm).values, both));
    }
    o.require(worst <= 1e-12, "branch oracle error " + fmt(worst));

    // Symmetric cancellation: images v and -v pool to zero, so both-present halves the text vector.
    auto v = testing::random_vector(rng, D, -1, 1);
    std::vector<double> neg(D), half(D);
    for (std::size_t d = 0; d < D; ++d) neg[d] = -v[d];
    provider->vectors["pos"] = v;
    provider->vectors["neg"] = neg;
    provider->vectors["text"] = testing::random_vector(rng, D, -1, 1);
    for (std::size_t d = 0; d < D; ++d) half[d] = provider->vectors["text"][d] / 2.0;
    std::vector<std::string> pair = {"pos", "neg"};
    o.require(max_diff(emb.aggregate(std::nullopt, pair).values, std::vector<double>(D, 0.0)) <= 1e-12,
              "cancelling images do not pool to zero");
    o.require(max_diff(emb.aggregate(std::string("text"), pair).values, half) <= 1e-12,
              "text with cancelling images is not half the text");
    if (o.pass) o.detail = "max error " + fmt(worst) + " over 200 random instances";
    return o;
}

Outcome criterion_prompting() {
    Outcome o;
    auto tax = CategoryTaxonomy::load(testing::fixture("prompting/taxonomy.txt"));
    auto store = FixtureStore::load_dir(testing::fixture("prompting/replay"));
    std::istringstream in(read_file(testing::fixture("prompting/cases.jsonl")));
    std::string line;
    std::size_t valid = 0, parsed = 0, invalid = 0, rejected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto c = json::parse(line);
        PromptTemplate tpl;
        tpl.variant = prompt_variant_from_string(c["variant"].get<std::string>());
        PromptClassifier clf(tax, tpl, LLMClientConfig{}, std::make_shared<ReplayTransport>(store));
        ProblemDescription input("fixture case " + c["name"].get<std::string>(), {},
                                 parse_rfc3339("2024-06-01T00:00:00Z"));
        const std::string expect = c["expect"];
        if (expect == "valid") {
            ++valid;
            try {
                auto r = clf.classify(input);
                parsed += r.response == parse_llm_content(c["content"], tpl, tax);
            } catch (const std::exception&) {
            }
            continue;
        }
        ++invalid;
        try {
            clf.classify(input);
        } catch (const MalformedResponseError&) {
            rejected += expect == "malformed";
        } catch (const ContractViolationError&) {
            rejected += expect == "contract";
        } catch (const std::exception&) {
        }
    }
    o.require(valid > 0 && parsed == valid, std::to_string(parsed) + "/" + std::to_string(valid) + " valid parsed");
    o.require(invalid > 0 && rejected == invalid,
              std::to_string(rejected) + "/" + std::to_string(invalid) + " invalid rejected");

    std::mt19937_64 rng(3);
    double sum_err = 0;
    bool order_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        auto names = tax.names();
        std::shuffle(names.begin(), names.end(), rng);
        names.resize(1 + rng() % 10);
        std::vector<int> pool = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(names.size());
        std::sort(pool.rbegin(), pool.rend());
        LLMResponse r;
        r.predictions = names;
        r.scores.assign(pool.begin(), pool.end());
        auto p = normalize_scores(r, tax);
        double s = p.other_prob;
        for (double x : p.probs) s += x;
        sum_err = std::max(sum_err, std::abs(s - 1.0));
        for (std::size_t i = 0; i < names.size(); ++i)
            order_ok = order_ok && i < p.ranked.size() && tax.name(p.ranked[i].category) == names[i];
    }
    o.require(sum_err <= 1e-12, "normalized sum error " + fmt(sum_err));
    o.require(order_ok, "normalized ranking does not preserve the response order");
    if (o.pass)
        o.detail = std::to_string(parsed) + "/" + std::to_string(valid) + " valid parsed, " + std::to_string(rejected) +
                   "/" + std::to_string(invalid) + " invalid rejected, sum error " + fmt(sum_err);
    return o;
}

Outcome criterion_calibration() {
    Outcome o;
    const std::size_t n = 10000, C = 10, bins = 10;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> top_dist(0.2, 1.0), u(0, 1);
    std::vector<Prediction> preds;
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = top_dist(rng);
        const std::size_t top = rng() % C;
        std::vector<double> probs(C, (1.0 - p) / (C - 1));
        probs[top] = p;
        preds.push_back(make_prediction(probs));
        std::size_t truth = top;
        if (u(rng) >= p) truth = (top + 1 + rng() % (C - 1)) % C;
        y.push_back(truth);
    }
    auto curve = calibration_curve(preds, y, RelevanceMatrix::identity(C), bins);
    o.require(curve.size() == bins, "bin count " + std::to_string(curve.size()));
    std::size_t total = 0, lo = n, hi = 0;
    double worst = 0;
    for (const auto& b : curve) {
        total += b.count;
        lo = std::min(lo, b.count);
        hi = std::max(hi, b.count);
        worst = std::max(worst, std::abs(b.mean_top_probability - b.mean_relative_accuracy));
    }
    o.require(total == n, "bins cover " + std::to_string(total) + " observations");
    o.require(hi - lo <= 1, "bin sizes differ by " + std::to_string(hi - lo));
    o.require(worst < 0.05, "worst bin gap " + fmt(worst));
    for (std::size_t b = 1; b < curve.size(); ++b)
        o.require(curve[b].mean_top_probability >= curve[b - 1].mean_top_probability, "bins not ordered");
    if (o.pass) o.detail = "worst bin gap " + fmt(worst) + ", sizes " + std::to_string(lo) + ".." + std::to_string(hi);
    return o;
}

Outcome criterion_end_to_end() {
    Outcome o;
    testing::TempDir dir("acc_e2e");
    testing::SyntheticSpec spec;
    spec.categories = 20;
    spec.n_train = 2000;
    spec.n_test = 500;
    spec.dimension = 16;
    spec.center_scale = 3.0;
    spec.noise = 3.0;
    spec.seed = 42;
    auto run = testing::build_synthetic(dir.path(), spec);
    auto step = [&](std::vector<std::string> args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        o.require(code == kExitOk, args[0] + " exited " + std::to_string(code) + ": " + err.str());
        return code == kExitOk;
    };
    if (!step({"ingest", "--config", run.config}) || !step({"train", "--config", run.config})) return o;
    for (const char* path : {"embeddings", "baseline"})
        if (!step({"predict", "--config", run.config, "--path", path}) ||
            !step({"evaluate", "--config", run.config, "--path", path}))
            return o;
    if (!step({"predict", "--config", run.config, "--path", "prompt", "--fixtures", (dir.path() / "fixtures").string()}) ||
        !step({"evaluate", "--config", run.config, "--path", "prompt"}))
        return o;
    auto report = [&](const std::string& path) {
        return json::parse(read_file((dir.path() / "reports" / ("predictions_" + path + "_report.json")).string()));
    };
    const auto emb = report("embeddings"), base = report("baseline"), prompt = report("prompt");
    const double emb_acc = emb["overall"]["accuracy_at_k"][0], base_acc = base["overall"]["accuracy_at_k"][0];
    const double emb_brier = emb["overall"]["brier"], prompt_brier = prompt["overall"]["brier"];
    o.require(emb_acc >= base_acc + 0.20, "embeddings accuracy@1 " + fmt(emb_acc) + " vs baseline " + fmt(base_acc));
    o.require(prompt_brier >= 2.0 * emb_brier,
              "prompt brier " + fmt(prompt_brier) + " vs embeddings brier " + fmt(emb_brier));
    if (o.pass)
        o.detail = "accuracy@1 embeddings " + fmt(emb_acc) + " vs baseline " + fmt(base_acc) + "; brier prompt " +
                   fmt(prompt_brier) + " vs embeddings " + fmt(emb_brier);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "cost model reproduction", 1, criterion_cost},
        {2, "capacity reproduction", 1, criterion_capacity},
        {3, "metric oracle equivalence", 60, criterion_metric_oracles},
        {4, "worked relevance example", 1, criterion_example_two},
        {5, "metric laws", 10, criterion_metric_laws},
        {6, "classifier numerics", 60, criterion_classifier},
        {7, "aggregation fidelity", 5, criterion_aggregation},
        {8, "prompt-path robustness", 10, criterion_prompting},
        {9, "calibration harness", 10, criterion_calibration},
        {10, "synthetic end-to-end benchmark", 120, criterion_end_to_end},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs >= c.budget_s) {
            o.pass = false;
            o.detail = "took " + fmt(secs) + " s, budget " + fmt(c.budget_s) + " s";
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
                  << std::fixed << std::setprecision(3) << secs << " s)" << std::defaultfloat << "\n";
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
    return failures ? 1 : 0;
}
