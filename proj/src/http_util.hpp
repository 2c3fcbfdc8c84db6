#pragma once

#include <chrono>
#include <string>

#include "catbench/errors.hpp"

namespace catbench::detail {

/// "https://host:port/prefix" -> {"https://host:port", "/prefix"}.
struct SplitUrl {
    std::string origin;
    std::string path_prefix;
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

}  // namespace catbench::detail
