#include "catbench/bench.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "catbench/errors.hpp"

namespace catbench {

using json = nlohmann::json;

double SteadyClock::now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string_view to_string(LatencyPath p) {
    switch (p) {
        case LatencyPath::EmbeddingsText: return "embeddings-text";
        case LatencyPath::EmbeddingsImage: return "embeddings-image";
        case LatencyPath::PromptText: return "prompt-text";
        case LatencyPath::PromptImage: return "prompt-image";
    }
    return "unknown";
}

LatencyPath latency_path_from_string(std::string_view s) {
    for (auto p : {LatencyPath::EmbeddingsText, LatencyPath::EmbeddingsImage, LatencyPath::PromptText,
                   LatencyPath::PromptImage})
        if (to_string(p) == s) return p;
    throw ArgumentError("unknown latency target: " + std::string(s));
}

double student_t_quantile(double p, double degrees_of_freedom) {
    boost::math::students_t dist(degrees_of_freedom);
    return boost::math::quantile(dist, p);
}

LatencyReport summarize_latency(LatencyPath path, std::vector<double> samples, std::size_t failures) {
    if (samples.size() < 2) throw BenchmarkError("latency summary needs at least 2 successful samples");
    LatencyReport r;
    r.path = path;
    r.n = samples.size();
    r.failures = failures;
    const double n = static_cast<double>(r.n);
    r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : samples) ss += (s - r.mean) * (s - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
    const double half = student_t_quantile(0.975, n - 1.0) * r.stddev / std::sqrt(n);
    r.ci_low = r.mean - half;
    r.ci_high = r.mean + half;
    r.samples = std::move(samples);
    return r;
}

LatencyReport measure_latency(LatencyPath path, std::size_t workload_size, const std::function<void(std::size_t)>& call,
                              Clock& clock) {
    if (workload_size == 0) throw ArgumentError("latency workload is empty");
    try {
        call(0);
    } catch (const std::exception&) {
        // warm-up failures are not samples
    }
    std::vector<double> samples;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < workload_size; ++i) {
        const double start = clock.now_seconds();
        try {
            call(i);
        } catch (const std::exception&) {
            ++failures;
            continue;
        }
        samples.push_back(clock.now_seconds() - start);
    }
    if (static_cast<double>(failures) > 0.2 * static_cast<double>(workload_size))
        throw BenchmarkError(std::to_string(failures) + " of " + std::to_string(workload_size) +
                             " calls failed (more than 20%)");
    return summarize_latency(path, std::move(samples), failures);
}

json to_json(const LatencyReport& r) {
    return {{"path", to_string(r.path)}, {"n", r.n},           {"failures", r.failures},
            {"mean_s", r.mean},          {"stddev_s", r.stddev}, {"ci95_low_s", r.ci_low},
            {"ci95_high_s", r.ci_high},  {"samples_s", r.samples}};
}

// ---------------------------------------------------------------------------

Micros to_micros(double dollars) { return static_cast<Micros>(std::llround(dollars * 1e6)); }

std::string format_dollars(Micros amount, int decimals) {
    const bool negative = amount < 0;
    std::uint64_t a = negative ? static_cast<std::uint64_t>(-amount) : static_cast<std::uint64_t>(amount);
    std::uint64_t unit = 1;
    for (int i = decimals; i < 6; ++i) unit *= 10;
    a = (a + unit / 2) / unit;  // now in units of 10^-decimals dollars
    std::uint64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    auto whole = std::to_string(a / scale);
    std::string grouped;
    for (std::size_t i = 0; i < whole.size(); ++i) {
        if (i && (whole.size() - i) % 3 == 0) grouped += ',';
        grouped += whole[i];
    }
    std::string out = (negative ? "-$" : "$") + grouped;
    if (decimals > 0) {
        auto frac = std::to_string(a % scale);
        out += '.' + std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
    }
    return out;
}

void CostModelInputs::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be a nonnegative number");
    };
    nonneg(node_annual_price, "node_annual_price");
    nonneg(throughput_rps, "throughput_rps");
    nonneg(api_image_cost, "api_image_cost");
    nonneg(token_price_per_million, "token_price_per_million");
    if (!(utilization > 0.0 && utilization <= 1.0)) throw ConfigError("utilization must be in (0, 1]");
    if (node_redundancy < 1) throw ConfigError("node_redundancy must be >= 1");
}

CostModelInputs cost_inputs_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("cost config must be a JSON object");
    auto number = [&](const char* name) {
        if (!j.contains(name)) throw ConfigError(std::string("cost config is missing field '") + name + "'");
        if (!j[name].is_number()) throw ConfigError(std::string("cost config field '") + name + "' must be a number");
        return j[name].get<double>();
    };
    auto count = [&](const char* name) {
        if (!j.contains(name)) throw ConfigError(std::string("cost config is missing field '") + name + "'");
        if (!j[name].is_number_unsigned() && !(j[name].is_number_integer() && j[name].get<std::int64_t>() >= 0))
            throw ConfigError(std::string("cost config field '") + name + "' must be a nonnegative integer");
        return j[name].get<std::uint64_t>();
    };
    CostModelInputs in;
    in.node_annual_price = number("node_annual_price");
    in.node_redundancy = count("node_redundancy");
    in.throughput_rps = number("throughput_rps");
    in.utilization = j.contains("utilization") ? number("utilization") : 1.0;
    in.api_image_cost = number("api_image_cost");
    in.prompt_tokens = count("prompt_tokens");
    in.token_price_per_million = number("token_price_per_million");
    in.annual_volume = count("annual_volume");
    in.validate();
    return in;
}

json to_json(const CostModelInputs& in) {
    return {{"node_annual_price", in.node_annual_price},
            {"node_redundancy", in.node_redundancy},
            {"throughput_rps", in.throughput_rps},
            {"utilization", in.utilization},
            {"api_image_cost", in.api_image_cost},
            {"prompt_tokens", in.prompt_tokens},
            {"token_price_per_million", in.token_price_per_million},
            {"annual_volume", in.annual_volume}};
}

namespace {

// Tolerates representation error in products such as 86400 * 0.3, never rounding up a real shortfall.
std::uint64_t floor_requests(double x) { return static_cast<std::uint64_t>(std::floor(x + 1e-6)); }

}  // namespace

std::uint64_t daily_capacity(const CostModelInputs& in) {
    in.validate();
    return floor_requests(86400.0 * in.throughput_rps * in.utilization);
}

std::uint64_t annual_capacity(const CostModelInputs& in) {
    in.validate();
    return floor_requests(86400.0 * 365.0 * in.throughput_rps * in.utilization);
}

EmbeddingsCost embeddings_annual_cost(const CostModelInputs& in) {
    EmbeddingsCost c;
    c.capacity_per_node = annual_capacity(in);
    if (c.capacity_per_node == 0) {
        if (in.annual_volume > 0) throw ConfigError("per-node capacity is zero but annual_volume is positive");
        c.deployments = 1;
    } else {
        c.deployments = std::max<std::uint64_t>(1, (in.annual_volume + c.capacity_per_node - 1) / c.capacity_per_node);
    }
    c.nodes = c.deployments * in.node_redundancy;
    c.annual = to_micros(in.node_annual_price) * static_cast<Micros>(c.nodes);
    return c;
}

ApiCost api_annual_cost(const CostModelInputs& in) {
    in.validate();
    ApiCost c;
    const auto volume = static_cast<__int128>(in.annual_volume);
    c.image = static_cast<Micros>(volume * to_micros(in.api_image_cost));
    const __int128 token_numerator = volume * static_cast<__int128>(in.prompt_tokens) * to_micros(in.token_price_per_million);
    c.tokens = static_cast<Micros>((token_numerator + 500000) / 1000000);
    c.total = c.image + c.tokens;
    return c;
}

json cost_report(const CostModelInputs& in) {
    auto emb = embeddings_annual_cost(in);
    auto api = api_annual_cost(in);
    auto money = [](Micros m) {
        return json{{"micros", m}, {"exact", format_dollars(m, 2)}, {"rounded", format_dollars(m, 0)}};
    };
    json out;
    out["inputs"] = to_json(in);
    out["capacity"] = {{"per_node_per_day", daily_capacity(in)}, {"per_node_per_year", emb.capacity_per_node}};
    out["embeddings"] = {{"deployments", emb.deployments}, {"nodes", emb.nodes}, {"annual", money(emb.annual)}};
    out["api"] = {{"image", money(api.image)}, {"tokens", money(api.tokens)}, {"total", money(api.total)}};
    out["api_to_embeddings_ratio"] =
        emb.annual > 0 ? static_cast<double>(api.total) / static_cast<double>(emb.annual) : 0.0;
    return out;
}

}  // namespace catbench
