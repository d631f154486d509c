#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "abwave/geometry.hpp"

namespace abwave::cfg {

// Rejects keys outside `allowed` and reports missing `required` keys, naming the JSON path.
void check_keys(const nlohmann::json& j, const std::string& path, std::initializer_list<const char*> allowed,
                std::initializer_list<const char*> required);

double number(const nlohmann::json& j, const std::string& path, const char* key);
double number_or(const nlohmann::json& j, const std::string& path, const char* key, double fallback);
int integer(const nlohmann::json& j, const std::string& path, const char* key);
Vec2 point(const nlohmann::json& j, const std::string& path, const char* key);
std::string text(const nlohmann::json& j, const std::string& path, const char* key);

}  // namespace abwave::cfg
