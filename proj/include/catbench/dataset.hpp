#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "catbench/codec.hpp"

namespace catbench {

using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

/// Parses an RFC 3339 date-time ("2024-09-01T12:30:00Z", optional fraction and offset).
Timestamp parse_rfc3339(std::string_view s);
/// UTC rendering with 'Z'; fractional seconds printed only when nonzero.
std::string format_rfc3339(Timestamp ts);

/// Ordered, unique set of category names. Position defines the canonical class index.
class CategoryTaxonomy {
public:
    explicit CategoryTaxonomy(std::vector<std::string> names);

    /// One name per line; blank lines are ignored, order is significant.
    static CategoryTaxonomy load(const std::string& path);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> index_of(std::string_view name) const;

    /// SHA-256 over the newline-joined names; changes when names or order change.
    Digest digest() const;

    bool operator==(const CategoryTaxonomy& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class InputType { TextOnly, ImageOnly, TextAndImage };

inline constexpr InputType kAllInputTypes[] = {InputType::TextOnly, InputType::ImageOnly,
                                               InputType::TextAndImage};

std::string_view to_string(InputType t);
InputType input_type_from_string(std::string_view s);

/// Customer input: text, images, or both.
class ProblemDescription {
public:
    ProblemDescription(std::optional<std::string> text, std::vector<std::string> image_refs, Timestamp ts);

    const std::optional<std::string>& text() const { return text_; }
    const std::vector<std::string>& image_refs() const { return image_refs_; }
    Timestamp timestamp() const { return timestamp_; }
    InputType input_type() const;

    bool operator==(const ProblemDescription&) const = default;

private:
    std::optional<std::string> text_;
    std::vector<std::string> image_refs_;
    Timestamp timestamp_;
};

struct LabeledExample {
    std::string id;
    ProblemDescription input;
    std::size_t label;

    bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
    CategoryTaxonomy taxonomy;
    std::vector<LabeledExample> examples;

    std::size_t size() const { return examples.size(); }
    bool operator==(const Dataset&) const = default;
};

/// Reads line-delimited JSON records: {"id"?, "text", "images", "label", "ts"}.
/// Records without an "id" get their 1-based line number. Lines holding only a
/// "_meta" object are skipped.
Dataset load_dataset(const std::string& path, const CategoryTaxonomy& taxonomy);
Dataset parse_dataset(std::string_view contents, const CategoryTaxonomy& taxonomy);

std::string serialize_dataset(const Dataset& ds, std::string_view meta_json = {});
void write_dataset(const std::string& path, const Dataset& ds, std::string_view meta_json = {});

/// Optional ingest thresholds (image count, text length in characters).
struct IngestFilter {
    std::optional<std::size_t> max_images;
    std::optional<std::size_t> max_text_chars;
};

/// Returns the kept examples and the number dropped.
std::pair<Dataset, std::size_t> apply_ingest_filter(const Dataset& ds, const IngestFilter& filter);

/// train: timestamp < cutoff; test: everything else. Input order is kept on both sides.
std::pair<Dataset, Dataset> split_temporal(const Dataset& ds, Timestamp cutoff);

std::vector<std::size_t> category_frequencies(const Dataset& ds);

/// k most frequent training categories; ties go to the lower canonical index.
std::vector<std::size_t> majority_topk(const Dataset& train, std::size_t k);

/// Number of examples of each input type, indexed like kAllInputTypes.
std::array<std::size_t, 3> input_type_counts(const Dataset& ds);

}  // namespace catbench
