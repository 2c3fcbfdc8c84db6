#include "catbench/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "catbench/bench.hpp"
#include "catbench/classifier.hpp"
#include "catbench/codec.hpp"
#include "catbench/dataset.hpp"
#include "catbench/embeddings.hpp"
#include "catbench/errors.hpp"
#include "catbench/metrics.hpp"
#include "catbench/prediction_file.hpp"
#include "catbench/prompting.hpp"

namespace catbench {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::optional<std::size_t> k_max;
    std::size_t bins = 10;
    bool bins_set = false;
    std::string fixtures;
    std::string path = "embeddings";
    std::string out;
    std::string predictions;
    std::string target = "embeddings-text";
    std::size_t samples = 100;
    std::optional<double> fake_latency;
};

/// Parsed --config document with paths resolved against the config file's directory.
class RunConfig {
public:
    static RunConfig load(const std::string& path) {
        RunConfig c;
        auto raw = read_file(path);
        c.sha256_ = to_hex(sha256(raw));
        try {
            c.doc_ = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ConfigError("config is not valid JSON: " + std::string(e.what()));
        }
        if (!c.doc_.is_object()) throw ConfigError("config must be a JSON object");
        c.base_ = fs::absolute(path).parent_path();
        return c;
    }

    const json& doc() const { return doc_; }
    const std::string& sha256_hex() const { return sha256_; }

    bool has(const std::string& key) const { return doc_.contains(key) && !doc_[key].is_null(); }

    std::string string(const std::string& key) const {
        if (!has(key)) throw ConfigError("config is missing field '" + key + "'");
        if (!doc_[key].is_string()) throw ConfigError("config field '" + key + "' must be a string");
        return doc_[key].get<std::string>();
    }

    std::string path(const std::string& key) const { return resolve(string(key)); }
    std::optional<std::string> optional_path(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return path(key);
    }
    std::string resolve(const std::string& p) const {
        fs::path fp(p);
        return (fp.is_absolute() ? fp : base_ / fp).lexically_normal().string();
    }

    json section(const std::string& key) const {
        if (!has(key)) return json::object();
        if (!doc_[key].is_object()) throw ConfigError("config field '" + key + "' must be an object");
        return doc_[key];
    }

private:
    json doc_;
    std::string sha256_;
    fs::path base_;
};

template <typename T>
T field_or(const json& section, const std::string& name, const std::string& where, T fallback) {
    if (!section.contains(name) || section[name].is_null()) return fallback;
    try {
        return section[name].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + where + "." + name + "' has the wrong type");
    }
}

json meta_block(const RunConfig* cfg, std::uint64_t seed) {
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"config_sha256", cfg ? cfg->sha256_hex() : std::string("none")},
            {"seed", seed}};
}

std::string csv_header(const json& meta) {
    return "# " + meta["tool"].get<std::string>() + " " + meta["version"].get<std::string>() +
           " config_sha256=" + meta["config_sha256"].get<std::string>() + "\n";
}

void write_text(const std::string& path, const std::string& text) { write_file_atomic(path, text); }

std::string reports_dir(const RunConfig& cfg) { return cfg.path("reports_dir"); }

std::string predictions_path(const RunConfig& cfg, const std::string& path_name) {
    auto p = cfg.string("predictions");
    auto pos = p.find("{path}");
    if (pos != std::string::npos) p.replace(pos, 6, path_name);
    return cfg.resolve(p);
}

std::size_t resolve_k_max(const Options& opt, const CategoryTaxonomy& tax, const RunConfig& cfg) {
    auto metrics = cfg.section("metrics");
    std::optional<std::size_t> k = opt.k_max;
    if (!k && metrics.contains("k_max")) k = field_or<std::size_t>(metrics, "k_max", "metrics", 10);
    if (!k) return std::min<std::size_t>(10, tax.size());
    if (*k < 1 || *k > tax.size())
        throw ConfigError("k-max must be in [1, " + std::to_string(tax.size()) + "], got " + std::to_string(*k));
    return *k;
}

std::size_t resolve_bins(const Options& opt, const RunConfig& cfg) {
    if (opt.bins_set) return opt.bins;
    return field_or<std::size_t>(cfg.section("metrics"), "bins", "metrics", opt.bins);
}

std::uint64_t resolve_seed(const Options& opt, const RunConfig& cfg) {
    if (opt.seed_set) return opt.seed;
    return cfg.has("seed") ? field_or<std::uint64_t>(cfg.doc(), "seed", "", 0) : 0;
}

EmbeddingProviderConfig provider_config(const RunConfig& cfg) {
    auto p = cfg.section("provider");
    EmbeddingProviderConfig pc;
    auto mode = field_or<std::string>(p, "mode", "provider", "file-cache");
    if (mode == "file-cache")
        pc.mode = ProviderMode::FileCache;
    else if (mode == "http-service")
        pc.mode = ProviderMode::HttpService;
    else
        throw ConfigError("provider.mode must be 'file-cache' or 'http-service'");
    if (!p.contains("dimension")) throw ConfigError("config is missing field 'provider.dimension'");
    pc.dimension = field_or<std::size_t>(p, "dimension", "provider", 0);
    pc.endpoint = field_or<std::string>(p, "endpoint", "provider", "");
    if (cfg.has("embedding_cache")) pc.cache_path = cfg.path("embedding_cache");
    pc.timeout = std::chrono::milliseconds(field_or<std::int64_t>(p, "timeout_ms", "provider", 10000));
    pc.max_concurrency = field_or<std::size_t>(p, "max_concurrency", "provider", 4);
    pc.validate();
    return pc;
}

Embedder make_embedder(const RunConfig& cfg) {
    auto p = cfg.section("provider");
    AggregationOptions agg;
    agg.text_weight = field_or<double>(p, "text_weight", "provider", 0.5);
    agg.l2_normalize = field_or<bool>(p, "l2_normalize", "provider", false);
    return Embedder(make_provider(provider_config(cfg)), agg);
}

LLMClientConfig llm_config(const RunConfig& cfg) {
    auto l = cfg.section("llm");
    LLMClientConfig c;
    c.endpoint = field_or<std::string>(l, "endpoint", "llm", c.endpoint);
    c.model = field_or<std::string>(l, "model", "llm", c.model);
    c.api_key_env = field_or<std::string>(l, "api_key_env", "llm", c.api_key_env);
    c.timeout = std::chrono::milliseconds(field_or<std::int64_t>(l, "timeout_ms", "llm", c.timeout.count()));
    c.max_retries = field_or<std::size_t>(l, "max_retries", "llm", c.max_retries);
    c.max_images = field_or<std::size_t>(l, "max_images", "llm", c.max_images);
    c.temperature = field_or<double>(l, "temperature", "llm", c.temperature);
    c.validate();
    return c;
}

PromptTemplate prompt_template(const RunConfig& cfg) {
    auto l = cfg.section("llm");
    PromptTemplate t;
    t.variant = prompt_variant_from_string(field_or<std::string>(l, "variant", "llm", "constrained-enum"));
    t.list_length = field_or<std::size_t>(l, "list_length", "llm", 10);
    return t;
}

std::shared_ptr<ChatTransport> make_transport(const RunConfig& cfg, const Options& opt,
                                              std::function<void(double)> latency_sink = {}) {
    if (!opt.fixtures.empty())
        return std::make_shared<ReplayTransport>(FixtureStore::load_dir(cfg.resolve(opt.fixtures)),
                                                 std::move(latency_sink));
    auto llm = llm_config(cfg);
    auto live = make_http_transport(llm);
    auto l = cfg.section("llm");
    if (l.contains("record_fixtures"))
        return std::make_shared<RecordingTransport>(
            live, cfg.resolve(field_or<std::string>(l, "record_fixtures", "llm", "")));
    return live;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    const auto seed = resolve_seed(opt, cfg);
    auto tax = CategoryTaxonomy::load(cfg.path("taxonomy"));
    auto ds = load_dataset(cfg.path("dataset"), tax);

    IngestFilter filter;
    auto f = cfg.section("ingest_filter");
    if (f.contains("max_images")) filter.max_images = field_or<std::size_t>(f, "max_images", "ingest_filter", 0);
    if (f.contains("max_text_chars"))
        filter.max_text_chars = field_or<std::size_t>(f, "max_text_chars", "ingest_filter", 0);
    auto [kept, dropped] = apply_ingest_filter(ds, filter);

    const auto cutoff = parse_rfc3339(cfg.string("cutoff"));
    auto [train, test] = split_temporal(kept, cutoff);

    const auto meta = meta_block(&cfg, seed);
    write_dataset(cfg.path("train"), train, meta.dump());
    write_dataset(cfg.path("test"), test, meta.dump());

    json summary;
    summary["meta"] = meta;
    summary["cutoff"] = format_rfc3339(cutoff);
    summary["records_read"] = ds.size();
    summary["dropped_by_filter"] = dropped;
    auto tc = input_type_counts(train), sc = input_type_counts(test);
    json rows = json::object();
    for (std::size_t t = 0; t < 3; ++t)
        rows[std::string(to_string(kAllInputTypes[t]))] = {{"train", tc[t]}, {"test", sc[t]}};
    rows["total"] = {{"train", train.size()}, {"test", test.size()}};
    summary["counts"] = rows;
    json freq = json::object();
    auto counts = category_frequencies(train);
    for (std::size_t c = 0; c < tax.size(); ++c) freq[tax.name(c)] = counts[c];
    summary["train_category_frequencies"] = freq;

    write_text((fs::path(reports_dir(cfg)) / "ingest_summary.json").string(), summary.dump(2) + "\n");

    out << std::left << std::setw(16) << "" << std::setw(10) << "train" << "test\n";
    for (std::size_t t = 0; t < 3; ++t)
        out << std::setw(16) << to_string(kAllInputTypes[t]) << std::setw(10) << tc[t] << sc[t] << "\n";
    out << std::setw(16) << "total" << std::setw(10) << train.size() << test.size() << "\n";
    if (dropped) out << dropped << " records dropped by ingest filter\n";
    return kExitOk;
}

int cmd_warm_cache(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    auto tax = CategoryTaxonomy::load(cfg.path("taxonomy"));
    auto pc = provider_config(cfg);
    if (pc.mode != ProviderMode::HttpService) throw ConfigError("warm-cache needs provider.mode 'http-service'");
    auto ds = load_dataset(cfg.path("dataset"), tax);
    HttpEmbeddingProvider provider(pc.endpoint, pc.dimension, pc.timeout);
    auto report = warm_cache(ds, provider, cfg.path("embedding_cache"), pc.max_concurrency);
    json j = {{"requested", report.requested},
              {"already_cached", report.already_cached},
              {"fetched", report.fetched},
              {"failed", report.failed}};
    out << j.dump(2) << "\n";
    return report.failed.empty() ? kExitOk : kExitExternal;
}

int cmd_train(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    const auto seed = resolve_seed(opt, cfg);
    auto tax = CategoryTaxonomy::load(cfg.path("taxonomy"));
    auto train_ds = load_dataset(cfg.path("train"), tax);
    if (train_ds.size() == 0) throw ValidationError("training set is empty");
    auto embedder = make_embedder(cfg);

    std::vector<AggregatedInput> inputs;
    std::vector<std::size_t> labels;
    inputs.reserve(train_ds.size());
    for (const auto& ex : train_ds.examples) {
        inputs.push_back(embedder.aggregate(ex.input));
        labels.push_back(ex.label);
    }

    auto t = cfg.section("training");
    TrainConfig tc;
    tc.max_iterations = field_or<std::size_t>(t, "max_iterations", "training", tc.max_iterations);
    tc.gradient_tolerance = field_or<double>(t, "gradient_tolerance", "training", tc.gradient_tolerance);
    tc.seed = seed;
    auto grid = field_or<std::vector<double>>(t, "lambda_grid", "training", kDefaultLambdaGrid);
    const double val_fraction = field_or<double>(t, "validation_fraction", "training", 0.1);

    json log;
    log["meta"] = meta_block(&cfg, seed);
    if (t.contains("l2_lambda") && !t["l2_lambda"].is_null()) {
        tc.l2_lambda = field_or<double>(t, "l2_lambda", "training", tc.l2_lambda);
        log["lambda_selection"] = {{"mode", "fixed"}, {"chosen", tc.l2_lambda}};
    } else {
        // Hold out the most recent examples by timestamp.
        std::vector<std::size_t> order(train_ds.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return train_ds.examples[a].input.timestamp() < train_ds.examples[b].input.timestamp();
        });
        const auto n = order.size();
        auto n_val = static_cast<std::size_t>(static_cast<double>(n) * val_fraction);
        n_val = std::clamp<std::size_t>(n_val, n >= 2 ? 1 : 0, n >= 2 ? n - 1 : 0);
        if (n_val == 0) {
            tc.l2_lambda = grid.front();
            log["lambda_selection"] = {{"mode", "default"}, {"chosen", tc.l2_lambda}, {"grid", grid}};
        } else {
            std::vector<AggregatedInput> fit_x, val_x;
            std::vector<std::size_t> fit_y, val_y;
            for (std::size_t i = 0; i < n; ++i) {
                auto idx = order[i];
                if (i < n - n_val) {
                    fit_x.push_back(inputs[idx]);
                    fit_y.push_back(labels[idx]);
                } else {
                    val_x.push_back(inputs[idx]);
                    val_y.push_back(labels[idx]);
                }
            }
            auto sel = select_l2_lambda(fit_x, fit_y, val_x, val_y, tax, tc, grid);
            tc.l2_lambda = sel.best_lambda;
            json trials = json::array();
            for (const auto& tr : sel.trials)
                trials.push_back({{"l2_lambda", tr.l2_lambda},
                                  {"validation_cross_entropy", tr.validation_loss},
                                  {"iterations", tr.iterations}});
            log["lambda_selection"] = {{"mode", "validation"},
                                       {"grid", grid},
                                       {"validation_size", n_val},
                                       {"trials", trials},
                                       {"chosen", tc.l2_lambda}};
        }
    }

    auto fit = train(inputs, labels, tax, tc);
    fit.model.save(cfg.path("model"));

    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (fit.model.predict_topk(inputs[i], 1).front().category == labels[i]) ++correct;
    const double train_acc = static_cast<double>(correct) / static_cast<double>(inputs.size());

    log["examples"] = inputs.size();
    log["dimension"] = fit.model.dimension();
    log["classes"] = tax.size();
    log["l2_lambda"] = tc.l2_lambda;
    log["max_iterations"] = tc.max_iterations;
    log["gradient_tolerance"] = tc.gradient_tolerance;
    log["iterations"] = fit.iterations;
    log["stop_reason"] = to_string(fit.stop_reason);
    log["final_loss"] = fit.final_loss;
    log["final_gradient_max_norm"] = fit.gradient_max_norm;
    log["train_accuracy_at_1"] = train_acc;
    write_text((fs::path(reports_dir(cfg)) / "train_log.json").string(), log.dump(2) + "\n");

    out << "trained on " << inputs.size() << " examples, lambda=" << tc.l2_lambda << ", " << fit.iterations
        << " iterations (" << to_string(fit.stop_reason) << "), train accuracy@1=" << train_acc << "\n";
    return kExitOk;
}

int cmd_predict(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    const auto seed = resolve_seed(opt, cfg);
    auto tax = CategoryTaxonomy::load(cfg.path("taxonomy"));
    auto test = load_dataset(cfg.path("test"), tax);
    const auto k_max = resolve_k_max(opt, tax, cfg);

    std::vector<PredictionRecord> records;
    records.reserve(test.size());
    bool full_probs = true;
    std::size_t failures = 0;

    if (opt.path == "embeddings") {
        auto embedder = make_embedder(cfg);
        auto model = SoftmaxModel::load(cfg.path("model"), tax, embedder.dimension());
        for (const auto& ex : test.examples) {
            PredictionRecord rec;
            rec.obs_id = ex.id;
            rec.input_type = ex.input.input_type();
            rec.prediction = model.predict(embedder.aggregate(ex.input), k_max);
            records.push_back(std::move(rec));
        }
    } else if (opt.path == "baseline") {
        auto train_ds = load_dataset(cfg.path("train"), tax);
        if (train_ds.size() == 0) throw ValidationError("baseline needs a nonempty training set");
        auto counts = category_frequencies(train_ds);
        std::vector<double> prior(counts.size());
        for (std::size_t c = 0; c < counts.size(); ++c)
            prior[c] = static_cast<double>(counts[c]) / static_cast<double>(train_ds.size());
        auto ranked = rank_categories(prior, k_max);
        for (const auto& ex : test.examples) {
            PredictionRecord rec;
            rec.obs_id = ex.id;
            rec.input_type = ex.input.input_type();
            rec.prediction.probs = prior;
            rec.prediction.ranked = ranked;
            records.push_back(std::move(rec));
        }
    } else if (opt.path == "prompt") {
        full_probs = false;
        std::function<std::string(const std::string&)> loader = [&cfg](const std::string& ref) {
            return file_image_loader(cfg.resolve(ref));
        };
        PromptClassifier clf(tax, prompt_template(cfg), llm_config(cfg), make_transport(cfg, opt), loader);
        for (const auto& ex : test.examples) {
            try {
                auto res = clf.classify(ex.input);
                PredictionRecord rec;
                rec.obs_id = ex.id;
                rec.input_type = ex.input.input_type();
                rec.prediction = normalize_scores(res.response, tax);
                rec.llm = {{"predictions", res.response.predictions},
                           {"scores", res.response.scores},
                           {"ties", res.response.has_ties},
                           {"top_score_probability", top_score_probability(res.response)},
                           {"attempts", res.attempts},
                           {"latency_ms", res.latency_ms}};
                records.push_back(std::move(rec));
            } catch (const MalformedResponseError& e) {
                records.push_back(failed_record(ex.id, ex.input.input_type(), tax.size(), e.what()));
                ++failures;
            } catch (const ContractViolationError& e) {
                records.push_back(failed_record(ex.id, ex.input.input_type(), tax.size(), e.what()));
                ++failures;
            }
        }
    } else {
        throw ArgumentError("--path must be embeddings, prompt or baseline");
    }

    const auto target = opt.out.empty() ? predictions_path(cfg, opt.path) : cfg.resolve(opt.out);
    write_text(target, serialize_predictions(records, tax, full_probs, meta_block(&cfg, seed).dump()));
    out << "wrote " << records.size() << " " << opt.path << " predictions to " << target;
    if (failures) out << " (" << failures << " failed after retries)";
    out << "\n";
    return kExitOk;
}

json section_json(const MetricSection& s) {
    json cal = json::array();
    for (const auto& b : s.calibration)
        cal.push_back({{"mean_top_probability", b.mean_top_probability},
                       {"mean_relative_accuracy_at_1", b.mean_relative_accuracy},
                       {"count", b.count}});
    return {{"n", s.n},
            {"accuracy_at_k", s.accuracy},
            {"relative_accuracy_at_k", s.relative_accuracy},
            {"brier", s.brier},
            {"calibration", cal},
            {"top_probability_histogram", s.histogram}};
}

std::string accuracy_csv(const json& meta, const MetricSection& s) {
    std::ostringstream o;
    o << csv_header(meta) << "k,accuracy,relative_accuracy\n" << std::setprecision(17);
    for (std::size_t k = 0; k < s.accuracy.size(); ++k)
        o << (k + 1) << ',' << s.accuracy[k] << ',' << s.relative_accuracy[k] << '\n';
    return o.str();
}

std::string calibration_csv(const json& meta, const std::vector<CalibrationBin>& bins) {
    std::ostringstream o;
    o << csv_header(meta) << "bin,mean_top_probability,mean_relative_accuracy_at_1,count\n" << std::setprecision(17);
    for (std::size_t b = 0; b < bins.size(); ++b)
        o << b << ',' << bins[b].mean_top_probability << ',' << bins[b].mean_relative_accuracy << ','
          << bins[b].count << '\n';
    return o.str();
}

int cmd_evaluate(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    const auto seed = resolve_seed(opt, cfg);
    auto tax = CategoryTaxonomy::load(cfg.path("taxonomy"));
    auto test = load_dataset(cfg.path("test"), tax);
    const auto k_max = resolve_k_max(opt, tax, cfg);
    const auto bins = resolve_bins(opt, cfg);

    const auto pred_path = opt.predictions.empty() ? predictions_path(cfg, opt.path) : cfg.resolve(opt.predictions);
    auto records = load_predictions(pred_path, tax);
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (!by_id.emplace(records[i].obs_id, i).second)
            throw ValidationError("duplicate prediction for obs_id '" + records[i].obs_id + "'");
    if (records.size() != test.size())
        throw ValidationError("predictions file has " + std::to_string(records.size()) + " records for " +
                              std::to_string(test.size()) + " test observations");

    std::vector<Prediction> preds;
    std::vector<std::size_t> truths;
    std::vector<InputType> types;
    std::vector<const PredictionRecord*> aligned;
    for (const auto& ex : test.examples) {
        auto it = by_id.find(ex.id);
        if (it == by_id.end()) throw ValidationError("no prediction for test observation '" + ex.id + "'");
        aligned.push_back(&records[it->second]);
        preds.push_back(records[it->second].prediction);
        truths.push_back(ex.label);
        types.push_back(ex.input.input_type());
    }

    std::optional<RelevanceMatrix> rel;
    if (auto portfolio = cfg.optional_path("portfolio"))
        rel = relevance_matrix(load_portfolio(*portfolio, tax), tax.size());
    else
        rel = RelevanceMatrix::identity(tax.size());

    auto report = evaluate(preds, truths, types, *rel, k_max, bins);
    const auto meta = meta_block(&cfg, seed);

    json j;
    j["meta"] = meta;
    j["predictions_file"] = fs::path(pred_path).filename().string();
    j["k_max"] = k_max;
    j["bins"] = bins;
    j["relevance"] = cfg.has("portfolio") ? "portfolio" : "identity";
    json unsupported = json::array();
    for (auto c : report.unsupported_categories) unsupported.push_back(tax.name(c));
    j["categories_without_professionals"] = unsupported;
    j["overall"] = section_json(report.overall);
    json groups = json::object();
    for (std::size_t t = 0; t < 3; ++t) {
        const auto name = std::string(to_string(kAllInputTypes[t]));
        if (report.by_input_type[t])
            groups[name] = section_json(*report.by_input_type[t]);
        else
            groups[name] = {{"n", 0}, {"empty", true}};
    }
    j["by_input_type"] = groups;
    std::size_t failed = 0;
    for (const auto* r : aligned) failed += r->failed ? 1 : 0;
    j["failed_observations"] = failed;

    // Calibration with the top score over 10 instead of the sum-normalized top probability.
    bool have_top_score = !aligned.empty();
    for (const auto* r : aligned) have_top_score = have_top_score && (r->failed || r->top_score_probability());
    std::vector<CalibrationBin> top_score_curve;
    if (have_top_score && preds.size() >= bins) {
        std::vector<Prediction> alt = preds;
        for (std::size_t i = 0; i < alt.size(); ++i)
            if (auto s = aligned[i]->top_score_probability(); s && !alt[i].ranked.empty()) alt[i].ranked.front().prob = *s;
        top_score_curve = calibration_curve(alt, truths, *rel, bins);
        json cal = json::array();
        for (const auto& b : top_score_curve)
            cal.push_back({{"mean_top_probability", b.mean_top_probability},
                           {"mean_relative_accuracy_at_1", b.mean_relative_accuracy},
                           {"count", b.count}});
        j["calibration_top_score_over_10"] = cal;
    }

    json per_obs = json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::size_t rank = 0;
        for (std::size_t r = 0; r < preds[i].ranked.size(); ++r)
            if (preds[i].ranked[r].category == truths[i]) {
                rank = r + 1;
                break;
            }
        std::vector<double> rel_hits;
        for (std::size_t k = 1; k <= k_max; ++k) rel_hits.push_back(relative_hit(preds[i], truths[i], *rel, k));
        double brier = preds[i].other_prob * preds[i].other_prob;
        for (std::size_t c = 0; c < tax.size(); ++c) {
            double d = preds[i].probs[c] - (c == truths[i] ? 1.0 : 0.0);
            brier += d * d;
        }
        per_obs.push_back({{"obs_id", test.examples[i].id},
                           {"truth", tax.name(truths[i])},
                           {"input_type", to_string(types[i])},
                           {"top_probability", preds[i].top_probability()},
                           {"truth_rank", rank},
                           {"relative_hit_at_k", rel_hits},
                           {"brier", brier},
                           {"failed", aligned[i]->failed}});
    }
    j["observations"] = per_obs;

    const auto dir = fs::path(reports_dir(cfg));
    const auto stem = fs::path(pred_path).stem().string();
    write_text((dir / (stem + "_report.json")).string(), j.dump(2) + "\n");
    write_text((dir / (stem + "_accuracy.csv")).string(), accuracy_csv(meta, report.overall));
    write_text((dir / (stem + "_calibration.csv")).string(), calibration_csv(meta, report.overall.calibration));
    if (!top_score_curve.empty())
        write_text((dir / (stem + "_calibration_top_score.csv")).string(), calibration_csv(meta, top_score_curve));
    {
        std::ostringstream o;
        o << csv_header(meta) << "bin_low,bin_high,count\n";
        const auto& h = report.overall.histogram;
        for (std::size_t b = 0; b < h.size(); ++b)
            o << static_cast<double>(b) / h.size() << ',' << static_cast<double>(b + 1) / h.size() << ',' << h[b] << '\n';
        write_text((dir / (stem + "_histogram.csv")).string(), o.str());
    }
    for (std::size_t t = 0; t < 3; ++t) {
        if (!report.by_input_type[t]) continue;
        std::string name(to_string(kAllInputTypes[t]));
        std::replace(name.begin(), name.end(), '+', '_');
        write_text((dir / (stem + "_breakdown_" + name + ".csv")).string(),
                   accuracy_csv(meta, *report.by_input_type[t]));
    }

    out << std::fixed << std::setprecision(4);
    out << "n=" << report.overall.n << " brier=" << report.overall.brier << "\n";
    for (std::size_t k = 0; k < k_max; ++k)
        out << "k=" << (k + 1) << " accuracy=" << report.overall.accuracy[k]
            << " relative_accuracy=" << report.overall.relative_accuracy[k] << "\n";
    return kExitOk;
}

int cmd_bench(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    const auto seed = resolve_seed(opt, cfg);
    auto tax = CategoryTaxonomy::load(cfg.path("taxonomy"));
    auto test = load_dataset(cfg.path("test"), tax);
    const auto target = latency_path_from_string(opt.target);
    const bool image_target = target == LatencyPath::EmbeddingsImage || target == LatencyPath::PromptImage;

    std::vector<ProblemDescription> pool;
    for (const auto& ex : test.examples) {
        const auto& in = ex.input;
        if (image_target && !in.image_refs().empty())
            pool.emplace_back(std::nullopt, in.image_refs(), in.timestamp());
        else if (!image_target && in.text())
            pool.emplace_back(in.text(), std::vector<std::string>{}, in.timestamp());
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(order.size(), opt.samples));
    if (order.size() < 2) throw ValidationError("bench needs at least 2 matching test observations");

    ManualClock manual;
    SteadyClock steady;
    Clock* clock = &steady;
    std::function<void(std::size_t)> call;

    std::optional<Embedder> embedder;
    std::optional<SoftmaxModel> model;
    std::optional<PromptClassifier> prompt;

    if (target == LatencyPath::EmbeddingsText || target == LatencyPath::EmbeddingsImage) {
        embedder.emplace(make_embedder(cfg));
        model.emplace(SoftmaxModel::load(cfg.path("model"), tax, embedder->dimension()));
        call = [&](std::size_t i) { (void)model->predict_proba(embedder->aggregate(pool[order[i]])); };
    } else {
        std::function<void(double)> sink;
        if (!opt.fixtures.empty() && !opt.fake_latency) {
            clock = &manual;
            sink = [&manual](double ms) { manual.advance(ms / 1000.0); };
        }
        std::function<std::string(const std::string&)> loader = [&cfg](const std::string& ref) {
            return file_image_loader(cfg.resolve(ref));
        };
        prompt.emplace(tax, prompt_template(cfg), llm_config(cfg), make_transport(cfg, opt, sink), loader);
        call = [&](std::size_t i) { (void)prompt->classify(pool[order[i]]); };
    }
    if (opt.fake_latency) {
        clock = &manual;
        auto inner = call;
        const double dt = *opt.fake_latency;
        call = [inner, dt, &manual](std::size_t i) {
            inner(i);
            manual.advance(dt);
        };
    }

    auto report = measure_latency(target, order.size(), call, *clock);
    json j = to_json(report);
    j["meta"] = meta_block(&cfg, seed);
    j["clock"] = clock == &steady ? "steady" : "manual";
    const auto dest = opt.out.empty() ? (fs::path(reports_dir(cfg)) / ("bench_" + opt.target + ".json")).string()
                                      : cfg.resolve(opt.out);
    write_text(dest, j.dump(2) + "\n");
    out << std::setprecision(6) << opt.target << ": n=" << report.n << " mean=" << report.mean << "s 95% CI ["
        << report.ci_low << ", " << report.ci_high << "]";
    if (report.failures) out << " failures=" << report.failures;
    out << "\n";
    return kExitOk;
}

int cmd_cost(const Options& opt, std::ostream& out) {
    auto cfg = RunConfig::load(opt.config);
    const auto& doc = cfg.doc();
    const json& inputs_json = doc.contains("cost") ? doc["cost"] : doc;
    auto inputs = cost_inputs_from_json(inputs_json);
    auto report = cost_report(inputs);
    report["meta"] = meta_block(&cfg, resolve_seed(opt, cfg));
    report["notes"] = {
        "money is computed in integer micro-dollars; 'exact' keeps cents, 'rounded' is whole dollars",
        "utilization below 1 models an under-used deployment"};
    if (!opt.out.empty())
        write_text(cfg.resolve(opt.out), report.dump(2) + "\n");
    else if (cfg.has("reports_dir"))
        write_text((fs::path(reports_dir(cfg)) / "cost_report.json").string(), report.dump(2) + "\n");

    out << "per-node capacity: " << report["capacity"]["per_node_per_day"] << "/day, "
        << report["capacity"]["per_node_per_year"] << "/year\n";
    out << "embeddings: " << report["embeddings"]["nodes"] << " nodes, "
        << report["embeddings"]["annual"]["exact"].get<std::string>() << "/year\n";
    out << "api: image " << report["api"]["image"]["exact"].get<std::string>() << " + tokens "
        << report["api"]["tokens"]["exact"].get<std::string>() << " = "
        << report["api"]["total"]["exact"].get<std::string>() << "/year\n";
    out << std::setprecision(4) << "api/embeddings ratio: " << report["api_to_embeddings_ratio"].get<double>() << "\n";
    return kExitOk;
}

int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Usage: return kExitUsage;
        case ErrorKind::Data: return kExitData;
        case ErrorKind::External: return kExitExternal;
        case ErrorKind::Numerical: return kExitNumerical;
    }
    return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Embeddings vs. prompting benchmark harness for multiclass category prediction", kToolName};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Options opt;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Run configuration (JSON)")->required();
        sub->add_option("--seed", opt.seed, "Seed for workload sampling")->each([&](const std::string&) {
            opt.seed_set = true;
        });
    };

    auto* ingest = app.add_subcommand("ingest", "Validate the dataset and split it by time");
    common(ingest);
    auto* warm = app.add_subcommand("warm-cache", "Fill the embedding cache from the embedding service");
    common(warm);
    auto* trn = app.add_subcommand("train", "Fit the softmax classifier on pooled embeddings");
    common(trn);
    auto* predict = app.add_subcommand("predict", "Write a predictions file for the test split");
    common(predict);
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a predictions file");
    common(evaluate_cmd);
    auto* bench = app.add_subcommand("bench", "Measure per-request latency");
    common(bench);
    auto* cost = app.add_subcommand("cost", "Evaluate the annual deployment cost model");
    common(cost);

    for (auto* sub : {predict, evaluate_cmd}) {
        sub->add_option("--path", opt.path, "embeddings | prompt | baseline")
            ->check(CLI::IsMember({"embeddings", "prompt", "baseline"}));
        sub->add_option("--k-max", opt.k_max, "Largest k to report (default 10)");
    }
    for (auto* sub : {predict, bench}) sub->add_option("--fixtures", opt.fixtures, "Replay recorded LLM calls from DIR");
    evaluate_cmd->add_option("--bins", opt.bins, "Calibration quantile bins (default 10)")->each([&](const std::string&) {
        opt.bins_set = true;
    });
    evaluate_cmd->add_option("--predictions", opt.predictions, "Predictions file (default from config)");
    for (auto* sub : {predict, bench, cost}) sub->add_option("--out", opt.out, "Output file");
    bench->add_option("--target", opt.target, "embeddings-text | embeddings-image | prompt-text | prompt-image")
        ->check(CLI::IsMember({"embeddings-text", "embeddings-image", "prompt-text", "prompt-image"}));
    bench->add_option("--n", opt.samples, "Sample size (default 100)");
    bench->add_option("--fake-latency", opt.fake_latency, "Simulate every call taking SECONDS");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(opt, out);
        if (warm->parsed()) return cmd_warm_cache(opt, out);
        if (trn->parsed()) return cmd_train(opt, out);
        if (predict->parsed()) return cmd_predict(opt, out);
        if (evaluate_cmd->parsed()) return cmd_evaluate(opt, out);
        if (bench->parsed()) return cmd_bench(opt, out);
        if (cost->parsed()) return cmd_cost(opt, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const json::exception& e) {
        err << "error: configuration: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}

}  // namespace catbench
