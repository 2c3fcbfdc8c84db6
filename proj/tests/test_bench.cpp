#include <doctest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "catbench/bench.hpp"
#include "catbench/codec.hpp"
#include "catbench/errors.hpp"
#include "test_support.hpp"

using namespace catbench;
using json = nlohmann::json;

namespace {

CostModelInputs reference_inputs() { return cost_inputs_from_json(json::parse(read_file(testing::fixture("cost/reference_inputs.json")))); }

}  // namespace

TEST_CASE("constant fake clock gives a zero-width interval") {
    ManualClock clock;
    auto r = measure_latency(LatencyPath::EmbeddingsImage, 50, [&](std::size_t) { clock.advance(0.3); }, clock);
    CHECK(r.n == 50);
    CHECK(r.mean == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(r.ci_high - r.ci_low == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.stddev == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("interval for samples 1, 2, 3") {
    // Two degrees of freedom has a closed-form quantile: (2p - 1) * sqrt(2 / (4p(1 - p))).
    const double pr = 0.975;
    const double t = (2 * pr - 1) * std::sqrt(2.0 / (4 * pr * (1 - pr)));
    auto r = summarize_latency(LatencyPath::PromptText, {1.0, 2.0, 3.0});
    CHECK(r.mean == 2.0);
    CHECK(r.stddev == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(r.ci_low - (2.0 - t / std::sqrt(3.0))) < 1e-12);
    CHECK(std::abs(r.ci_high - (2.0 + t / std::sqrt(3.0))) < 1e-12);
    CHECK(std::abs(student_t_quantile(0.975, 9) - 2.2621571628540993) < 1e-9);
    CHECK_THROWS_AS(summarize_latency(LatencyPath::PromptText, {1.0}), BenchmarkError);
}

TEST_CASE("warm-up call is excluded and failures are counted") {
    ManualClock clock;
    int calls = 0;
    auto r = measure_latency(LatencyPath::PromptImage, 10, [&](std::size_t i) {
        ++calls;
        clock.advance(calls == 1 ? 100.0 : 1.0 + 0.1 * static_cast<double>(i));
        if (calls == 5) throw TransportError("flaky");
    }, clock);
    CHECK(calls == 11);
    CHECK(r.n == 9);
    CHECK(r.failures == 1);
    CHECK(r.mean < 2.0);

    std::size_t n = 0;
    CHECK_THROWS_AS(measure_latency(LatencyPath::PromptImage, 10, [&](std::size_t) {
        if (++n % 3 == 0) throw TransportError("down");
        clock.advance(1.0);
    }, clock), BenchmarkError);
}

TEST_CASE("dollar formatting") {
    CHECK(format_dollars(9179080000) == "$9,179.08");
    CHECK(format_dollars(9179080000, 0) == "$9,179");
    CHECK(format_dollars(12001500000, 0) == "$12,002");
    CHECK(format_dollars(0) == "$0.00");
    CHECK(format_dollars(999) == "$0.00");
    CHECK(format_dollars(5000) == "$0.01");
    CHECK(format_dollars(-1500000) == "-$1.50");
}

TEST_CASE("capacity arithmetic") {
    auto in = reference_inputs();
    CHECK(daily_capacity(in) == 172800);
    CHECK(annual_capacity(in) == 63072000);
    in.throughput_rps = 1;
    in.utilization = 0.5;
    CHECK(annual_capacity(in) == 15768000);

    // Second-by-second accumulation over one day.
    in.throughput_rps = 3;
    in.utilization = 0.3;
    double served = 0;
    std::uint64_t whole = 0;
    for (int s = 0; s < 86400; ++s) {
        served += in.throughput_rps * in.utilization;
        while (served >= 1.0 - 1e-9) {
            served -= 1.0;
            ++whole;
        }
    }
    CHECK(daily_capacity(in) == whole);
}

TEST_CASE("reference deployment cost figures") {
    auto in = reference_inputs();
    auto emb = embeddings_annual_cost(in);
    CHECK(emb.deployments == 1);
    CHECK(emb.nodes == 2);
    CHECK(emb.annual == 9179080000);
    auto api = api_annual_cost(in);
    CHECK(api.image == 80325000000);
    CHECK(api.tokens == 12001500000);
    CHECK(api.total == 92326500000);
    CHECK(format_dollars(emb.annual, 0) == "$9,179");
    CHECK(format_dollars(api.image, 0) == "$80,325");
    auto rep = cost_report(in);
    CHECK(rep["api_to_embeddings_ratio"].get<double>() == doctest::Approx(10.06).epsilon(1e-3));
}

TEST_CASE("deployment floor and ceiling") {
    auto in = reference_inputs();
    in.annual_volume = 0;
    CHECK(embeddings_annual_cost(in).annual == 9179080000);
    CHECK(api_annual_cost(in).total == 0);
    in.annual_volume = 2 * 63072000;
    CHECK(embeddings_annual_cost(in).annual == 18358160000);
    in.annual_volume = 2 * 63072000 + 1;
    CHECK(embeddings_annual_cost(in).deployments == 3);
}

TEST_CASE("cost config validation names the field") {
    auto j = json::parse(read_file(testing::fixture("cost/reference_inputs.json")));
    j.erase("prompt_tokens");
    try {
        cost_inputs_from_json(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("prompt_tokens") != std::string::npos);
    }
    j = json::parse(read_file(testing::fixture("cost/reference_inputs.json")));
    j["utilization"] = 1.5;
    CHECK_THROWS_AS(cost_inputs_from_json(j), ConfigError);
    j.erase("utilization");
    CHECK(cost_inputs_from_json(j).utilization == 1.0);
}
