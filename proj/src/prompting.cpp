#include "catbench/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "catbench/codec.hpp"
#include "catbench/errors.hpp"
#include "http_util.hpp"

namespace catbench {

using json = nlohmann::json;

namespace {

std::string ordinal(std::size_t n) {
    const char* suffix = "th";
    if (n % 100 < 11 || n % 100 > 13) {
        switch (n % 10) {
            case 1: suffix = "st"; break;
            case 2: suffix = "nd"; break;
            case 3: suffix = "rd"; break;
            default: break;
        }
    }
    return std::to_string(n) + suffix;
}

std::string freeform_text(const std::vector<std::string>& names_with_other, std::size_t k) {
    std::string s;
    s += "Your goal is to identify the type of problem that a customer describes based on their description and any "
         "image(s) the customer shares. The type of the problem can be one of the following:  ";
    s += python_list_literal(names_with_other);
    s += " You will output a json object containing the " + std::to_string(k) +
         " most likely types of problems given the user's input, in the following form:";
    s += "{ 1st type of problem: float, 2nd type of problem: float,..., " + ordinal(k) +
         " type of problem: float }. The predicted scores should sum to 1.0, such that the most likely problem has a "
         "higher score than the second most likely problem, which should have a higher score than he third most "
         "likely problem, etc. Important: the most likely problems must be chosen from the " +
         std::to_string(names_with_other.size()) + " problems listed in single quotes and separated by commas above.";
    return s;
}

std::string constrained_text(const std::vector<std::string>& names, std::size_t k) {
    std::string s;
    s += "Your goal is to identify the type of problem that a customer faces based on the customer's text description "
         "and any image(s) the customer shares. The type of the problem must be a member of the ServiceCategory "
         "enumeration class. You will output the " +
         std::to_string(k) +
         " most likely ServiceCategory enumeration members given the user's input along with their likelihood "
         "scores. The likelihood scores should be in a scale from 1 to 10, and they should represent your confidence "
         "such that the most likely ServiceCategory enumeration member has a higher integer score than the second "
         "most likely, which should have a higher score than the third most likely, etc. \n";
    s += "\nServiceCategory enumeration members: " + python_list_literal(names);
    return s;
}

[[noreturn]] void malformed(const std::string& why, const std::string& raw) {
    throw MalformedResponseError("malformed LLM response: " + why, raw);
}

LLMResponse parse_constrained(const std::string& content, const PromptTemplate& tpl, const CategoryTaxonomy& taxonomy) {
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error&) {
        malformed("content is not JSON", content);
    }
    if (!j.is_object()) malformed("content is not a JSON object", content);
    if (!j.contains("predictions") || !j["predictions"].is_array()) malformed("missing 'predictions' array", content);
    if (!j.contains("scores") || !j["scores"].is_array()) malformed("missing 'scores' array", content);
    const auto& preds = j["predictions"];
    const auto& scores = j["scores"];
    if (preds.size() != scores.size()) malformed("'predictions' and 'scores' differ in length", content);
    if (preds.empty()) malformed("empty prediction list", content);
    if (preds.size() > tpl.list_length) malformed("more than " + std::to_string(tpl.list_length) + " predictions", content);

    LLMResponse out;
    out.variant = PromptVariant::ConstrainedEnum;
    std::set<std::string> seen;
    std::string unknown;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i].is_string()) malformed("prediction is not a string", content);
        auto name = preds[i].get<std::string>();
        if (!seen.insert(name).second) malformed("duplicate category '" + name + "'", content);
        if (!taxonomy.index_of(name) && unknown.empty()) unknown = name;
        if (!scores[i].is_number_integer()) malformed("score is not an integer", content);
        auto score = scores[i].get<std::int64_t>();
        if (score < kMinScore || score > kMaxScore)
            malformed("score " + std::to_string(score) + " outside [1, 10]", content);
        if (i > 0) {
            if (static_cast<double>(score) > out.scores.back()) malformed("scores increase with rank", content);
            if (static_cast<double>(score) == out.scores.back()) out.has_ties = true;
        }
        out.predictions.push_back(std::move(name));
        out.scores.push_back(static_cast<double>(score));
    }
    if (!unknown.empty())
        throw ContractViolationError("LLM named a category outside the enumeration: '" + unknown + "'", content);
    return out;
}

LLMResponse parse_freeform(const std::string& content, const PromptTemplate& tpl, const CategoryTaxonomy& taxonomy) {
    std::set<std::string> keys;
    bool duplicate = false;
    std::string dup_key;
    nlohmann::ordered_json::parser_callback_t cb = [&](int depth, nlohmann::ordered_json::parse_event_t event,
                                                       nlohmann::ordered_json& parsed) {
        if (depth == 1 && event == nlohmann::ordered_json::parse_event_t::key) {
            auto k = parsed.get<std::string>();
            if (!keys.insert(k).second && !duplicate) {
                duplicate = true;
                dup_key = k;
            }
        }
        return true;
    };
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(content, cb);
    } catch (const nlohmann::ordered_json::parse_error&) {
        malformed("content is not JSON", content);
    }
    if (!j.is_object()) malformed("content is not a JSON object", content);
    if (duplicate) malformed("duplicate category '" + dup_key + "'", content);
    if (j.empty()) malformed("empty prediction object", content);
    if (j.size() > tpl.list_length) malformed("more than " + std::to_string(tpl.list_length) + " predictions", content);

    LLMResponse out;
    out.variant = PromptVariant::FreeformJson;
    double total = 0.0;
    for (const auto& [name, value] : j.items()) {
        if (name != kOtherName && !taxonomy.index_of(name)) malformed("unknown category '" + name + "'", content);
        if (!value.is_number()) malformed("score for '" + name + "' is not a number", content);
        double score = value.get<double>();
        if (!std::isfinite(score) || score < 0.0 || score > 1.0) malformed("score outside [0, 1]", content);
        if (!out.scores.empty()) {
            if (score > out.scores.back()) malformed("scores increase with rank", content);
            if (score == out.scores.back()) out.has_ties = true;
        }
        out.predictions.push_back(name);
        out.scores.push_back(score);
        total += score;
    }
    if (std::abs(total - 1.0) > 0.05) malformed("scores sum to " + std::to_string(total) + ", expected 1.0", content);
    for (auto& s : out.scores) s /= total;
    return out;
}

std::string mime_for(const std::string& ref) {
    auto ext = std::filesystem::path(ref).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") return "image/png";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    return "image/jpeg";
}

}  // namespace

std::string_view to_string(PromptVariant v) {
    return v == PromptVariant::FreeformJson ? "freeform-json" : "constrained-enum";
}

PromptVariant prompt_variant_from_string(std::string_view s) {
    if (s == "freeform-json") return PromptVariant::FreeformJson;
    if (s == "constrained-enum") return PromptVariant::ConstrainedEnum;
    throw ConfigError("unknown prompt variant: " + std::string(s));
}

std::string python_list_literal(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        const auto& s = items[i];
        const bool use_double = s.find('\'') != std::string::npos && s.find('"') == std::string::npos;
        const char q = use_double ? '"' : '\'';
        out += q;
        for (char c : s) {
            if (c == '\\' || c == q) out += '\\';
            out += c;
        }
        out += q;
    }
    out += "]";
    return out;
}

RenderedPrompt render_prompt(const PromptTemplate& tpl, const CategoryTaxonomy& taxonomy) {
    if (tpl.list_length < 1 || tpl.list_length > static_cast<std::size_t>(kMaxScore))
        throw ArgumentError("list_length must be in [1, 10]");
    RenderedPrompt out;
    if (tpl.variant == PromptVariant::FreeformJson) {
        out.allowed_names = taxonomy.names();
        out.allowed_names.emplace_back(kOtherName);
        out.text = freeform_text(out.allowed_names, tpl.list_length);
        out.response_format = {{"type", "json_object"}};
    } else {
        out.allowed_names = taxonomy.names();
        out.text = constrained_text(out.allowed_names, tpl.list_length);
        json schema = {
            {"type", "object"},
            {"properties",
             {{"predictions", {{"type", "array"}, {"items", {{"type", "string"}, {"enum", out.allowed_names}}}}},
              {"scores", {{"type", "array"}, {"items", {{"type", "integer"}}}}}}},
            {"required", {"predictions", "scores"}},
            {"additionalProperties", false},
        };
        out.response_format = {
            {"type", "json_schema"},
            {"json_schema", {{"name", "ServiceCategoryPrediction"}, {"strict", true}, {"schema", schema}}},
        };
    }
    return out;
}

std::string extract_message_content(const std::string& response_body) {
    json body;
    try {
        body = json::parse(response_body);
    } catch (const json::parse_error&) {
        malformed("response body is not JSON", response_body);
    }
    if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        malformed("response has no choices", response_body);
    const auto& choice = body["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object())
        malformed("choice has no message", response_body);
    const auto& msg = choice["message"];
    if (msg.contains("refusal") && msg["refusal"].is_string()) malformed("model refused to answer", response_body);
    if (!msg.contains("content") || !msg["content"].is_string()) malformed("message has no text content", response_body);
    return msg["content"].get<std::string>();
}

LLMResponse parse_llm_content(const std::string& content, const PromptTemplate& tpl, const CategoryTaxonomy& taxonomy) {
    return tpl.variant == PromptVariant::ConstrainedEnum ? parse_constrained(content, tpl, taxonomy)
                                                         : parse_freeform(content, tpl, taxonomy);
}

Prediction normalize_scores(const LLMResponse& resp, const CategoryTaxonomy& taxonomy) {
    if (resp.predictions.empty() || resp.predictions.size() != resp.scores.size())
        throw ArgumentError("normalize_scores needs a validated response");
    double total = 0.0;
    for (double s : resp.scores) total += s;
    if (!(total > 0.0)) throw ArgumentError("scores sum to zero");

    Prediction p;
    p.probs.assign(taxonomy.size(), 0.0);
    std::vector<RankedCategory> ranked;
    for (std::size_t i = 0; i < resp.predictions.size(); ++i) {
        const double prob = resp.scores[i] / total;
        if (resp.predictions[i] == kOtherName && !taxonomy.index_of(kOtherName)) {
            p.other_prob = prob;
            ranked.push_back({kOtherCategory, prob});
        } else {
            auto idx = taxonomy.index_of(resp.predictions[i]);
            if (!idx) throw ArgumentError("unknown category in response: " + resp.predictions[i]);
            p.probs[*idx] = prob;
            ranked.push_back({*idx, prob});
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedCategory& a, const RankedCategory& b) {
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.category < b.category;
    });
    p.ranked = std::move(ranked);
    return p;
}

double top_score_probability(const LLMResponse& resp) {
    if (resp.scores.empty()) throw ArgumentError("top_score_probability needs a validated response");
    if (resp.variant == PromptVariant::ConstrainedEnum) return resp.scores.front() / static_cast<double>(kMaxScore);
    return resp.scores.front();
}

// ---------------------------------------------------------------------------
// Transports

HttpChatTransport::HttpChatTransport(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_(timeout) {
    detail::split_url(endpoint_);
}

TransportReply HttpChatTransport::post(const std::string& request_body) {
    auto url = detail::split_url(endpoint_);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url.path_prefix + "/v1/chat/completions", headers, request_body, "application/json");
    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!res) throw TransportError("chat endpoint unreachable: " + httplib::to_string(res.error()));
    return {res->status, res->body, elapsed};
}

std::string request_hash(const std::string& request_body) {
    auto d = sha256(request_body);
    return to_hex(d);
}

json to_json(const RecordedCall& call) {
    return {{"request_hash", call.request_hash},
            {"response_body", call.response_body},
            {"latency_ms", call.latency_ms},
            {"status", call.status}};
}

RecordedCall recorded_call_from_json(const json& j) {
    if (!j.is_object() || !j.contains("request_hash") || !j.contains("response_body") || !j.contains("latency_ms"))
        throw ValidationError("fixture record needs request_hash, response_body and latency_ms");
    RecordedCall c;
    c.request_hash = j.at("request_hash").get<std::string>();
    c.response_body = j.at("response_body").get<std::string>();
    c.latency_ms = j.at("latency_ms").get<double>();
    c.status = j.value("status", 200);
    return c;
}

FixtureStore FixtureStore::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ArgumentError("fixture directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    FixtureStore store;
    for (const auto& f : files) {
        std::istringstream in(read_file(f.string()));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                store.add(recorded_call_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw ParseError(f.filename().string() + ": " + e.what(), line_no);
            }
        }
    }
    return store;
}

void FixtureStore::add(RecordedCall call) {
    auto key = call.request_hash;
    calls_[key].push_back(std::move(call));
}

const std::vector<RecordedCall>* FixtureStore::find(const std::string& hash) const {
    auto it = calls_.find(hash);
    return it == calls_.end() ? nullptr : &it->second;
}

std::size_t FixtureStore::size() const {
    std::size_t n = 0;
    for (const auto& [k, v] : calls_) n += v.size();
    return n;
}

ReplayTransport::ReplayTransport(FixtureStore store, std::function<void(double)> latency_sink)
    : store_(std::move(store)), latency_sink_(std::move(latency_sink)) {}

TransportReply ReplayTransport::post(const std::string& request_body) {
    auto hash = request_hash(request_body);
    const auto* calls = store_.find(hash);
    if (!calls || calls->empty()) throw TransportError("no recorded fixture for request " + hash);
    RecordedCall call;
    {
        std::lock_guard lock(mu_);
        auto& pos = cursor_[hash];
        call = (*calls)[std::min(pos, calls->size() - 1)];
        ++pos;
    }
    if (latency_sink_) latency_sink_(call.latency_ms);
    return {call.status, call.response_body, call.latency_ms};
}

RecordingTransport::RecordingTransport(std::shared_ptr<ChatTransport> inner, std::string fixture_path)
    : inner_(std::move(inner)), path_(std::move(fixture_path)) {}

TransportReply RecordingTransport::post(const std::string& request_body) {
    auto reply = inner_->post(request_body);
    RecordedCall call{request_hash(request_body), reply.body, reply.latency_ms, reply.status};
    std::lock_guard lock(mu_);
    std::filesystem::path p(path_);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw ArgumentError("cannot append to fixture file: " + path_);
    out << to_json(call).dump() << '\n';
    return reply;
}

// ---------------------------------------------------------------------------
// Client

void LLMClientConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("llm endpoint is empty");
    if (model.empty()) throw ConfigError("llm model name is empty");
    if (timeout.count() <= 0) throw ConfigError("llm timeout must be positive");
}

std::shared_ptr<ChatTransport> make_http_transport(const LLMClientConfig& cfg) {
    cfg.validate();
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key || !*key) throw ConfigError("environment variable " + cfg.api_key_env + " holding the API key is not set");
    return std::make_shared<HttpChatTransport>(cfg.endpoint, key, cfg.timeout);
}

std::string file_image_loader(const std::string& image_ref) {
    std::string bytes;
    try {
        bytes = read_file(image_ref);
    } catch (const ArgumentError&) {
        throw ValidationError("cannot read image: " + image_ref);
    }
    return "data:" + mime_for(image_ref) + ";base64," + base64_encode(bytes);
}

json build_chat_request(const ProblemDescription& input, const LLMClientConfig& cfg, const RenderedPrompt& prompt,
                        const ImageLoader& load_image) {
    json content = json::array();
    if (input.text()) content.push_back({{"type", "text"}, {"text", *input.text()}});
    const auto& images = input.image_refs();
    const std::size_t n_images = std::min(images.size(), cfg.max_images);
    for (std::size_t i = 0; i < n_images; ++i)
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", load_image(images[i])}}}});
    if (content.empty()) throw ArgumentError("request would carry neither text nor images");

    return {
        {"model", cfg.model},
        {"temperature", cfg.temperature},
        {"messages",
         {{{"role", "system"}, {"content", prompt.text}}, {{"role", "user"}, {"content", content}}}},
        {"response_format", prompt.response_format},
    };
}

PromptClassifier::PromptClassifier(CategoryTaxonomy taxonomy, PromptTemplate tpl, LLMClientConfig cfg,
                                   std::shared_ptr<ChatTransport> transport, ImageLoader load_image)
    : taxonomy_(std::move(taxonomy)),
      tpl_(tpl),
      cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      load_image_(std::move(load_image)),
      prompt_(render_prompt(tpl_, taxonomy_)) {
    cfg_.validate();
    if (!transport_) throw ArgumentError("prompt classifier needs a transport");
}

std::string PromptClassifier::request_body(const ProblemDescription& input) const {
    return build_chat_request(input, cfg_, prompt_, load_image_).dump();
}

ClassifyResult PromptClassifier::classify(const ProblemDescription& input) const {
    const auto body = request_body(input);
    ClassifyResult result;
    for (std::size_t attempt = 0;; ++attempt) {
        auto reply = transport_->post(body);
        result.latency_ms += reply.latency_ms;
        result.attempts = attempt + 1;
        if (reply.status != 200)
            throw TransportError("chat endpoint returned HTTP " + std::to_string(reply.status));
        try {
            result.raw_content = reply.body;
            auto content = extract_message_content(reply.body);
            result.raw_content = content;
            result.response = parse_llm_content(content, tpl_, taxonomy_);
            return result;
        } catch (const MalformedResponseError&) {
            if (attempt >= cfg_.max_retries) throw;
        } catch (const ContractViolationError&) {
            if (attempt >= cfg_.max_retries) throw;
        }
    }
}

}  // namespace catbench
