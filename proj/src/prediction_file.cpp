#include "catbench/prediction_file.hpp"

#include "catbench/errors.hpp"
#include "catbench/prompting.hpp"

namespace catbench {

using json = nlohmann::json;

std::optional<double> PredictionRecord::top_score_probability() const {
    if (llm.is_object() && llm.contains("top_score_probability") && llm["top_score_probability"].is_number())
        return llm["top_score_probability"].get<double>();
    return std::nullopt;
}

PredictionRecord failed_record(std::string obs_id, InputType type, std::size_t num_classes, std::string error) {
    PredictionRecord r;
    r.obs_id = std::move(obs_id);
    r.input_type = type;
    r.prediction.probs.assign(num_classes, 0.0);
    r.prediction.other_prob = 1.0;
    r.failed = true;
    r.error = std::move(error);
    return r;
}

std::string serialize_prediction(const PredictionRecord& rec, const CategoryTaxonomy& taxonomy, bool full_probs) {
    json j = json::object();
    j["obs_id"] = rec.obs_id;
    j["input_type"] = to_string(rec.input_type);
    json ranked = json::array();
    for (const auto& r : rec.prediction.ranked) {
        const std::string name = r.category == kOtherCategory ? std::string(kOtherName) : taxonomy.name(r.category);
        ranked.push_back({{"category", name}, {"prob", r.prob}});
    }
    j["ranked"] = std::move(ranked);
    if (full_probs && !rec.failed) j["full_probs"] = rec.prediction.probs;
    if (rec.failed) {
        j["failed"] = true;
        j["error"] = rec.error;
    }
    if (!rec.llm.is_null()) j["llm"] = rec.llm;
    return j.dump();
}

std::string serialize_predictions(const std::vector<PredictionRecord>& records, const CategoryTaxonomy& taxonomy,
                                  bool full_probs, std::string_view meta_json) {
    std::string out;
    if (!meta_json.empty()) {
        out += R"({"_meta":)";
        out += meta_json;
        out += "}\n";
    }
    for (const auto& r : records) {
        out += serialize_prediction(r, taxonomy, full_probs);
        out += '\n';
    }
    return out;
}

std::vector<PredictionRecord> parse_predictions(std::string_view contents, const CategoryTaxonomy& taxonomy) {
    std::vector<PredictionRecord> out;
    std::size_t line_no = 0, start = 0;
    const auto c = taxonomy.size();
    while (start < contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string_view::npos) end = contents.size();
        auto line = contents.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!j.is_object()) throw ParseError("prediction record is not an object", line_no);
        if (j.size() == 1 && j.contains("_meta")) continue;
        try {
            if (!j.contains("obs_id") || !j["obs_id"].is_string()) throw ParseError("missing string 'obs_id'", line_no);
            if (!j.contains("ranked") || !j["ranked"].is_array()) throw ParseError("missing 'ranked' array", line_no);
            auto type = input_type_from_string(j.value("input_type", std::string("text-only")));

            if (j.value("failed", false)) {
                out.push_back(failed_record(j["obs_id"].get<std::string>(), type, c, j.value("error", std::string())));
                continue;
            }

            PredictionRecord rec;
            rec.obs_id = j["obs_id"].get<std::string>();
            rec.input_type = type;
            auto& p = rec.prediction;
            p.probs.assign(c, 0.0);
            for (const auto& r : j["ranked"]) {
                if (!r.is_object() || !r.contains("category") || !r["category"].is_string() || !r.contains("prob") ||
                    !r["prob"].is_number())
                    throw ParseError("ranked entries need 'category' and 'prob'", line_no);
                const auto name = r["category"].get<std::string>();
                const double prob = r["prob"].get<double>();
                auto idx = taxonomy.index_of(name);
                if (!idx && name != kOtherName) throw ValidationError("unknown category '" + name + "'");
                const std::size_t cat = idx ? *idx : kOtherCategory;
                p.ranked.push_back({cat, prob});
                if (cat == kOtherCategory)
                    p.other_prob = prob;
                else
                    p.probs[cat] = prob;
            }
            if (j.contains("full_probs")) {
                const auto& fp = j["full_probs"];
                if (!fp.is_array() || fp.size() != c)
                    throw ValidationError("'full_probs' must have " + std::to_string(c) + " entries");
                for (std::size_t i = 0; i < c; ++i) {
                    if (!fp[i].is_number()) throw ValidationError("'full_probs' entries must be numbers");
                    p.probs[i] = fp[i].get<double>();
                }
            }
            if (j.contains("llm")) rec.llm = j["llm"];
            validate_prediction(p, c, 1e-6);
            out.push_back(std::move(rec));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<PredictionRecord> load_predictions(const std::string& path, const CategoryTaxonomy& taxonomy) {
    return parse_predictions(read_file(path), taxonomy);
}

}  // namespace catbench
