#include "abwave/jsonutil.hpp"

#include <algorithm>

#include "abwave/errors.hpp"

namespace abwave::cfg {

void check_keys(const nlohmann::json& j, const std::string& path, std::initializer_list<const char*> allowed,
                std::initializer_list<const char*> required) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
        if (!ok) throw ConfigError(path + "/" + it.key() + ": unknown key");
    }
    for (const char* r : required)
        if (!j.contains(r)) throw ConfigError(path + "/" + r + ": required key missing");
}

double number(const nlohmann::json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(path + "/" + key + ": required key missing");
    if (!j[key].is_number()) throw ConfigError(path + "/" + key + ": expected a number");
    return j[key].get<double>();
}

double number_or(const nlohmann::json& j, const std::string& path, const char* key, double fallback) {
    return j.contains(key) ? number(j, path, key) : fallback;
}

int integer(const nlohmann::json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(path + "/" + key + ": required key missing");
    if (!j[key].is_number_integer()) throw ConfigError(path + "/" + key + ": expected an integer");
    return j[key].get<int>();
}

Vec2 point(const nlohmann::json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(path + "/" + key + ": required key missing");
    const auto& a = j[key];
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ConfigError(path + "/" + key + ": expected [x, y]");
    return {a[0].get<double>(), a[1].get<double>()};
}

std::string text(const nlohmann::json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(path + "/" + key + ": required key missing");
    if (!j[key].is_string()) throw ConfigError(path + "/" + key + ": expected a string");
    return j[key].get<std::string>();
}

}  // namespace abwave::cfg
