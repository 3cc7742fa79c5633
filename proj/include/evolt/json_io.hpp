#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>

#include "json.hpp"

#include "evolt/ecm.hpp"
#include "evolt/features.hpp"

// JSON (de)serialization for the domain types plus the strict-schema helpers
// shared by the config loader and the weight-file reader. Unknown keys are
// always rejected with the offending path named.
namespace evolt::jsonio {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path);
const json& require(const json& obj, const char* key, const std::string& path);

double get_num(const json& obj, const char* key, const std::string& path);
double get_num_or(const json& obj, const char* key, const std::string& path, double def);
std::int64_t get_int(const json& obj, const char* key, const std::string& path);
std::int64_t get_int_or(const json& obj, const char* key, const std::string& path,
                        std::int64_t def);
std::uint64_t get_u64_or(const json& obj, const char* key, const std::string& path,
                         std::uint64_t def);
bool get_bool_or(const json& obj, const char* key, const std::string& path, bool def);
std::string get_str(const json& obj, const char* key, const std::string& path);
std::string get_str_or(const json& obj, const char* key, const std::string& path,
                       const std::string& def);

json to_json(const ecm::OcvCurve& curve);
ecm::OcvCurve ocv_from_json(const json& j, const std::string& path);

json to_json(const ecm::EcmParams& params);
ecm::EcmParams ecm_from_json(const json& j, const std::string& path);

json to_json(const features::Normalizer& norm);
features::Normalizer normalizer_from_json(const json& j, const std::string& path);

}  // namespace evolt::jsonio
