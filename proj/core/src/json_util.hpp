#pragma once

// Internal helpers for strict JSON handling. Not installed; nlohmann::json
// stays out of public headers.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plastinet/error.hpp"

namespace plastinet::jsonu {

using nlohmann::json;

inline json parse_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(origin + ": JSON parse error at byte " + std::to_string(e.byte) + ": " +
                          e.what(),
                      static_cast<long long>(e.byte));
    }
}

inline json load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_text(text, path);
}

inline void save_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

inline const json& require(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(ctx + ": missing required field '" + key + "'");
    return *it;
}

/// Unknown fields are rejected so config typos fail loudly.
inline void check_fields(const json& j, const std::string& ctx,
                         const std::vector<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& a : allowed) {
            if (it.key() == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(ctx + ": unknown field '" + it.key() + "'");
    }
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& ctx) {
    try {
        return require(j, key, ctx).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(ctx + ": field '" + key + "' has the wrong type: " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(ctx + ": field '" + key + "' has the wrong type: " + e.what());
    }
}

} // namespace plastinet::jsonu
