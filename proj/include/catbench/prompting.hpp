#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catbench/dataset.hpp"
#include "catbench/prediction.hpp"

namespace catbench {

enum class PromptVariant {
    FreeformJson,     // category list in text, {name: float} object, "Other" allowed
    ConstrainedEnum,  // structured output: enum-constrained names, integer scores 1..10
};

std::string_view to_string(PromptVariant v);
PromptVariant prompt_variant_from_string(std::string_view s);

struct PromptTemplate {
    PromptVariant variant = PromptVariant::ConstrainedEnum;
    std::size_t list_length = 10;
};

inline constexpr std::string_view kOtherName = "Other";
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

struct RenderedPrompt {
    std::string text;
    /// OpenAI `response_format` object.
    nlohmann::json response_format;
    /// Names the model may answer with (taxonomy, plus "Other" for freeform).
    std::vector<std::string> allowed_names;
};

RenderedPrompt render_prompt(const PromptTemplate& tpl, const CategoryTaxonomy& taxonomy);

/// Python-style list literal, e.g. ['Appliance Installation', 'Other'].
std::string python_list_literal(const std::vector<std::string>& items);

/// A validated model answer.
struct LLMResponse {
    PromptVariant variant = PromptVariant::ConstrainedEnum;
    std::vector<std::string> predictions;
    /// Integers 1..10 (constrained) or renormalized floats summing to 1 (freeform).
    std::vector<double> scores;
    /// Adjacent equal scores were present. Accepted, but flagged.
    bool has_ties = false;

    bool operator==(const LLMResponse&) const = default;
};

/// Pulls choices[0].message.content out of a chat-completions body.
std::string extract_message_content(const std::string& response_body);

/// Validates the assistant message for the template's variant. Throws
/// MalformedResponseError (unparseable, duplicates, bad scores, length) or
/// ContractViolationError (constrained mode naming a non-member).
LLMResponse parse_llm_content(const std::string& content, const PromptTemplate& tpl, const CategoryTaxonomy& taxonomy);

/// Sum-normalized scores; unlisted categories get 0, "Other" goes to the sink.
Prediction normalize_scores(const LLMResponse& resp, const CategoryTaxonomy& taxonomy);

/// Top score over the scale maximum (constrained); the top normalized score for freeform.
double top_score_probability(const LLMResponse& resp);

// ---------------------------------------------------------------------------
// Transport

struct TransportReply {
    int status = 0;
    std::string body;
    double latency_ms = 0.0;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual TransportReply post(const std::string& request_body) = 0;
};

/// Live OpenAI-compatible endpoint; POSTs to <endpoint>/v1/chat/completions.
class HttpChatTransport final : public ChatTransport {
public:
    HttpChatTransport(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout);
    TransportReply post(const std::string& request_body) override;

private:
    std::string endpoint_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

/// Hex SHA-256 of the exact request body.
std::string request_hash(const std::string& request_body);

struct RecordedCall {
    std::string request_hash;
    std::string response_body;
    double latency_ms = 0.0;
    int status = 200;
};

nlohmann::json to_json(const RecordedCall& call);
RecordedCall recorded_call_from_json(const nlohmann::json& j);

/// Recorded calls grouped by request hash, in recording order.
class FixtureStore {
public:
    /// Reads every *.jsonl file in `dir` (sorted by name), one recorded call per line.
    static FixtureStore load_dir(const std::string& dir);

    void add(RecordedCall call);
    const std::vector<RecordedCall>* find(const std::string& hash) const;
    std::size_t size() const;

private:
    std::map<std::string, std::vector<RecordedCall>> calls_;
};

/// Serves recorded calls. Repeated identical requests walk through the calls
/// recorded for that hash and stick on the last one.
class ReplayTransport final : public ChatTransport {
public:
    explicit ReplayTransport(FixtureStore store, std::function<void(double)> latency_sink = {});
    TransportReply post(const std::string& request_body) override;

private:
    FixtureStore store_;
    std::map<std::string, std::size_t> cursor_;
    std::function<void(double)> latency_sink_;
    std::mutex mu_;
};

/// Forwards to another transport and appends each call to a fixture file.
class RecordingTransport final : public ChatTransport {
public:
    RecordingTransport(std::shared_ptr<ChatTransport> inner, std::string fixture_path);
    TransportReply post(const std::string& request_body) override;

private:
    std::shared_ptr<ChatTransport> inner_;
    std::string path_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Client

struct LLMClientConfig {
    std::string endpoint = "https://api.openai.com";
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{60000};
    std::size_t max_retries = 2;
    std::size_t max_images = 2;
    double temperature = 0.0;

    void validate() const;
};

/// Reads the API key from the configured environment variable.
std::shared_ptr<ChatTransport> make_http_transport(const LLMClientConfig& cfg);

/// Resolves an image reference to a data URL.
using ImageLoader = std::function<std::string(const std::string& image_ref)>;
/// Reads the referenced file and base64-encodes it; MIME type from the extension.
std::string file_image_loader(const std::string& image_ref);

nlohmann::json build_chat_request(const ProblemDescription& input, const LLMClientConfig& cfg,
                                  const RenderedPrompt& prompt, const ImageLoader& load_image);

struct ClassifyResult {
    LLMResponse response;
    std::string raw_content;
    /// Sum over all attempts.
    double latency_ms = 0.0;
    std::size_t attempts = 0;
};

class PromptClassifier {
public:
    PromptClassifier(CategoryTaxonomy taxonomy, PromptTemplate tpl, LLMClientConfig cfg,
                     std::shared_ptr<ChatTransport> transport, ImageLoader load_image = file_image_loader);

    const RenderedPrompt& prompt() const { return prompt_; }
    std::string request_body(const ProblemDescription& input) const;

    /// Sends the request, re-sending it unchanged up to max_retries times while
    /// the answer fails validation.
    ClassifyResult classify(const ProblemDescription& input) const;

private:
    CategoryTaxonomy taxonomy_;
    PromptTemplate tpl_;
    LLMClientConfig cfg_;
    std::shared_ptr<ChatTransport> transport_;
    ImageLoader load_image_;
    RenderedPrompt prompt_;
};

}  // namespace catbench
