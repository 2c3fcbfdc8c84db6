#include "catbench/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catbench/errors.hpp"

namespace catbench {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

int parse_digits(std::string_view s, std::size_t pos, std::size_t n, std::string_view whole) {
    if (pos + n > s.size()) throw ParseError("bad timestamp: " + std::string(whole), 0);
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) throw ParseError("bad timestamp: " + std::string(whole), 0);
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace

Timestamp parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
    if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':')
        throw ParseError("bad timestamp: " + std::string(s), 0);
    int y = parse_digits(s, 0, 4, s);
    int mo = parse_digits(s, 5, 2, s);
    int d = parse_digits(s, 8, 2, s);
    int h = parse_digits(s, 11, 2, s);
    int mi = parse_digits(s, 14, 2, s);
    int sec = parse_digits(s, 17, 2, s);
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw ParseError("bad timestamp: " + std::string(s), 0);

    std::size_t pos = 19;
    std::int64_t micros = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t start = pos;
        std::int64_t scale = 100000;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            micros += (s[pos] - '0') * scale;
            scale /= 10;
            ++pos;
        }
        if (pos == start) throw ParseError("bad timestamp: " + std::string(s), 0);
    }
    if (pos >= s.size()) throw ParseError("timestamp missing offset: " + std::string(s), 0);
    int offset_minutes = 0;
    if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        int sign = s[pos] == '+' ? 1 : -1;
        if (pos + 6 != s.size() || s[pos + 3] != ':') throw ParseError("bad timestamp offset: " + std::string(s), 0);
        offset_minutes = sign * (parse_digits(s, pos + 1, 2, s) * 60 + parse_digits(s, pos + 4, 2, s));
        pos += 6;
    } else {
        throw ParseError("bad timestamp offset: " + std::string(s), 0);
    }
    if (pos != s.size()) throw ParseError("trailing characters in timestamp: " + std::string(s), 0);

    auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
    return time_point_cast<microseconds>(tp) + microseconds{micros};
}

std::string format_rfc3339(Timestamp ts) {
    using namespace std::chrono;
    auto day_start = floor<days>(ts);
    year_month_day ymd{day_start};
    auto rem = ts - day_start;
    auto h = duration_cast<hours>(rem);
    rem -= h;
    auto m = duration_cast<minutes>(rem);
    rem -= m;
    auto s = duration_cast<seconds>(rem);
    rem -= s;
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                          static_cast<int>(h.count()), static_cast<int>(m.count()), static_cast<int>(s.count()));
    std::string out(buf, static_cast<std::size_t>(n));
    if (rem.count() != 0) {
        std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(rem.count()));
        out += buf;
    }
    out += 'Z';
    return out;
}

// ---------------------------------------------------------------------------

CategoryTaxonomy::CategoryTaxonomy(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw ValidationError("taxonomy needs at least 2 categories");
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (trim(names_[i]).empty()) throw ValidationError("empty category name at position " + std::to_string(i));
        if (!index_.emplace(names_[i], i).second) throw ValidationError("duplicate category name: " + names_[i]);
    }
}

CategoryTaxonomy CategoryTaxonomy::load(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        names.push_back(line);
    }
    return CategoryTaxonomy(std::move(names));
}

std::optional<std::size_t> CategoryTaxonomy::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Digest CategoryTaxonomy::digest() const {
    std::string joined;
    for (const auto& n : names_) {
        joined += n;
        joined += '\n';
    }
    return sha256(joined);
}

std::string_view to_string(InputType t) {
    switch (t) {
        case InputType::TextOnly: return "text-only";
        case InputType::ImageOnly: return "image-only";
        case InputType::TextAndImage: return "text+image";
    }
    return "unknown";
}

InputType input_type_from_string(std::string_view s) {
    for (auto t : kAllInputTypes)
        if (to_string(t) == s) return t;
    throw ValidationError("unknown input type: " + std::string(s));
}

ProblemDescription::ProblemDescription(std::optional<std::string> text, std::vector<std::string> image_refs,
                                       Timestamp ts)
    : text_(std::move(text)), image_refs_(std::move(image_refs)), timestamp_(ts) {
    if (text_ && trim(*text_).empty()) throw ValidationError("text must be non-empty when present");
    if (!text_ && image_refs_.empty()) throw ValidationError("problem description has neither text nor images");
    for (const auto& ref : image_refs_)
        if (ref.empty()) throw ValidationError("empty image reference");
}

InputType ProblemDescription::input_type() const {
    if (!text_) return InputType::ImageOnly;
    return image_refs_.empty() ? InputType::TextOnly : InputType::TextAndImage;
}

// ---------------------------------------------------------------------------

Dataset parse_dataset(std::string_view contents, const CategoryTaxonomy& taxonomy) {
    Dataset ds{taxonomy, {}};
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string_view::npos) end = contents.size();
        auto line = trim(contents.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!rec.is_object()) throw ParseError("record is not a JSON object", line_no);
        if (rec.size() == 1 && rec.contains("_meta")) continue;

        try {
            std::optional<std::string> text;
            if (rec.contains("text") && !rec["text"].is_null()) {
                if (!rec["text"].is_string()) throw ParseError("field 'text' must be a string or null", line_no);
                auto t = rec["text"].get<std::string>();
                if (!trim(t).empty()) text = std::move(t);
            }
            std::vector<std::string> images;
            if (rec.contains("images") && !rec["images"].is_null()) {
                if (!rec["images"].is_array()) throw ParseError("field 'images' must be an array", line_no);
                for (const auto& im : rec["images"]) {
                    if (!im.is_string()) throw ParseError("image references must be strings", line_no);
                    images.push_back(im.get<std::string>());
                }
            }
            if (!rec.contains("label") || !rec["label"].is_string())
                throw ParseError("missing string field 'label'", line_no);
            if (!rec.contains("ts") || !rec["ts"].is_string()) throw ParseError("missing string field 'ts'", line_no);

            auto label_name = rec["label"].get<std::string>();
            auto label = taxonomy.index_of(label_name);
            if (!label) throw ValidationError("line " + std::to_string(line_no) + ": unknown label '" + label_name + "'");

            Timestamp ts;
            try {
                ts = parse_rfc3339(rec["ts"].get<std::string>());
            } catch (const ParseError& e) {
                throw ParseError(e.what(), line_no);
            }

            std::string id = std::to_string(line_no);
            if (rec.contains("id")) {
                if (!rec["id"].is_string()) throw ParseError("field 'id' must be a string", line_no);
                id = rec["id"].get<std::string>();
            }
            if (!text && images.empty())
                throw ValidationError("line " + std::to_string(line_no) + ": record has neither text nor images");
            ds.examples.push_back({std::move(id), ProblemDescription(std::move(text), std::move(images), ts), *label});
        } catch (const ValidationError& e) {
            std::string msg = e.what();
            if (msg.rfind("line ", 0) != 0) msg = "line " + std::to_string(line_no) + ": " + msg;
            throw ValidationError(msg);
        }
    }
    return ds;
}

Dataset load_dataset(const std::string& path, const CategoryTaxonomy& taxonomy) {
    return parse_dataset(read_file(path), taxonomy);
}

std::string serialize_dataset(const Dataset& ds, std::string_view meta_json) {
    std::string out;
    if (!meta_json.empty()) {
        out += R"({"_meta":)";
        out += meta_json;
        out += "}\n";
    }
    for (const auto& ex : ds.examples) {
        json rec = json::object();
        rec["id"] = ex.id;
        rec["text"] = ex.input.text() ? json(*ex.input.text()) : json(nullptr);
        rec["images"] = ex.input.image_refs();
        rec["label"] = ds.taxonomy.name(ex.label);
        rec["ts"] = format_rfc3339(ex.input.timestamp());
        out += rec.dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const std::string& path, const Dataset& ds, std::string_view meta_json) {
    write_file_atomic(path, serialize_dataset(ds, meta_json));
}

std::pair<Dataset, std::size_t> apply_ingest_filter(const Dataset& ds, const IngestFilter& filter) {
    Dataset kept{ds.taxonomy, {}};
    std::size_t dropped = 0;
    for (const auto& ex : ds.examples) {
        bool ok = true;
        if (filter.max_images && ex.input.image_refs().size() > *filter.max_images) ok = false;
        if (filter.max_text_chars && ex.input.text() && utf8_length(*ex.input.text()) > *filter.max_text_chars)
            ok = false;
        if (ok)
            kept.examples.push_back(ex);
        else
            ++dropped;
    }
    return {std::move(kept), dropped};
}

std::pair<Dataset, Dataset> split_temporal(const Dataset& ds, Timestamp cutoff) {
    Dataset train{ds.taxonomy, {}};
    Dataset test{ds.taxonomy, {}};
    for (const auto& ex : ds.examples) {
        if (ex.input.timestamp() < cutoff)
            train.examples.push_back(ex);
        else
            test.examples.push_back(ex);
    }
    return {std::move(train), std::move(test)};
}

std::vector<std::size_t> category_frequencies(const Dataset& ds) {
    std::vector<std::size_t> counts(ds.taxonomy.size(), 0);
    for (const auto& ex : ds.examples) ++counts.at(ex.label);
    return counts;
}

std::vector<std::size_t> majority_topk(const Dataset& train, std::size_t k) {
    const auto c = train.taxonomy.size();
    if (k < 1 || k > c) throw ArgumentError("k must be in [1, " + std::to_string(c) + "], got " + std::to_string(k));
    auto counts = category_frequencies(train);
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    order.resize(k);
    return order;
}

std::array<std::size_t, 3> input_type_counts(const Dataset& ds) {
    std::array<std::size_t, 3> counts{};
    for (const auto& ex : ds.examples) ++counts[static_cast<std::size_t>(ex.input.input_type())];
    return counts;
}

}  // namespace catbench
