#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace catbench {

class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_seconds() = 0;
};

class SteadyClock final : public Clock {
public:
    double now_seconds() override;
};

/// Time only moves when advanced; used for replayed and simulated runs.
class ManualClock final : public Clock {
public:
    double now_seconds() override { return now_; }
    void advance(double seconds) { now_ += seconds; }

private:
    double now_ = 0.0;
};

enum class LatencyPath { EmbeddingsText, EmbeddingsImage, PromptText, PromptImage };
std::string_view to_string(LatencyPath p);
LatencyPath latency_path_from_string(std::string_view s);

struct LatencyReport {
    LatencyPath path;
    std::size_t n = 0;
    std::size_t failures = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<double> samples;  // seconds
};

/// Two-sided Student-t quantile, e.g. p = 0.975.
double student_t_quantile(double p, double degrees_of_freedom);

/// Mean and 95% interval mean +/- t(0.975, n-1) * s / sqrt(n). Needs n >= 2.
LatencyReport summarize_latency(LatencyPath path, std::vector<double> samples, std::size_t failures = 0);

/// Calls `call(i)` for every workload index, strictly one after another, after
/// one untimed warm-up call on index 0. Throwing calls are dropped from the
/// samples and counted; more than 20% failures raise BenchmarkError.
LatencyReport measure_latency(LatencyPath path, std::size_t workload_size, const std::function<void(std::size_t)>& call,
                              Clock& clock);

nlohmann::json to_json(const LatencyReport& r);

// ---------------------------------------------------------------------------
// Cost model. Money is carried as integer micro-dollars.

using Micros = std::int64_t;

Micros to_micros(double dollars);
/// "$9,179.08" (decimals = 2) or "$9,179" (decimals = 0), rounding half away from zero.
std::string format_dollars(Micros amount, int decimals = 2);

struct CostModelInputs {
    double node_annual_price = 0.0;      // dollars per node per year
    std::uint64_t node_redundancy = 1;   // nodes per deployment (2 for blue/green)
    double throughput_rps = 0.0;         // requests per second per node
    double utilization = 1.0;            // (0, 1]
    double api_image_cost = 0.0;         // dollars per request
    std::uint64_t prompt_tokens = 0;     // tokens per request
    double token_price_per_million = 0.0;
    std::uint64_t annual_volume = 0;     // requests per year

    void validate() const;
};

/// Throws ConfigError naming the first missing or ill-typed field.
CostModelInputs cost_inputs_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CostModelInputs& in);

std::uint64_t daily_capacity(const CostModelInputs& in);
std::uint64_t annual_capacity(const CostModelInputs& in);

struct EmbeddingsCost {
    std::uint64_t capacity_per_node = 0;
    std::uint64_t deployments = 0;  // redundant node groups, at least one
    std::uint64_t nodes = 0;
    Micros annual = 0;
};

struct ApiCost {
    Micros image = 0;
    Micros tokens = 0;
    Micros total = 0;
};

/// redundancy x node price x max(1, ceil(volume / per-node capacity)).
EmbeddingsCost embeddings_annual_cost(const CostModelInputs& in);
/// volume x image cost + volume x tokens x token price / 1e6.
ApiCost api_annual_cost(const CostModelInputs& in);

nlohmann::json cost_report(const CostModelInputs& in);

}  // namespace catbench
