#pragma once

// Strict lookup for enum fields: nlohmann's enum mapping silently falls back
// to the first entry on an unknown string, which would hide config typos.

#include <string>

#include <json.hpp>

#include "aec/error.hpp"

namespace aec {

template <class E>
E enum_value(const nlohmann::json& j, const char* key, E fallback) {
    if (!j.contains(key)) return fallback;
    const auto& raw = j.at(key);
    const E v = raw.get<E>();
    if (nlohmann::json(v) != raw) throw ParseError("unknown " + std::string(key) + " " + raw.dump());
    return v;
}

}  // namespace aec
