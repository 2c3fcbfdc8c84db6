#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbench/dataset.hpp"
#include "catbench/prediction.hpp"

namespace catbench {

/// One line of a predictions file.
///
/// {"obs_id", "input_type", "ranked": [{"category", "prob"}], "full_probs"?, "failed"?, "error"?, "llm"?}
/// Without "full_probs" the distribution is the ranked probabilities with every
/// unlisted category at 0. A failed observation carries all of its mass on the
/// "Other" sink, so it counts as a miss everywhere.
struct PredictionRecord {
    std::string obs_id;
    InputType input_type = InputType::TextOnly;
    Prediction prediction;
    bool failed = false;
    std::string error;
    /// Prompt-path extras (raw scores, top score over 10, attempts, latency).
    nlohmann::json llm;

    std::optional<double> top_score_probability() const;
};

PredictionRecord failed_record(std::string obs_id, InputType type, std::size_t num_classes, std::string error);

std::string serialize_prediction(const PredictionRecord& rec, const CategoryTaxonomy& taxonomy, bool full_probs);
std::string serialize_predictions(const std::vector<PredictionRecord>& records, const CategoryTaxonomy& taxonomy,
                                  bool full_probs, std::string_view meta_json = {});

/// Parses and validates every line (distribution sums to 1 within 1e-6, ranking rule).
std::vector<PredictionRecord> parse_predictions(std::string_view contents, const CategoryTaxonomy& taxonomy);
std::vector<PredictionRecord> load_predictions(const std::string& path, const CategoryTaxonomy& taxonomy);

}  // namespace catbench
