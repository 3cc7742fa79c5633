#include "evolt/json_io.hpp"

#include <cmath>

#include "evolt/errors.hpp"

namespace evolt::jsonio {

namespace {

std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

}  // namespace

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("unknown key '" + join(path, key.c_str()) + "'");
    }
}

const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing key '" + join(path, key) + "'");
    return *it;
}

double get_num(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number()) throw ConfigError("'" + join(path, key) + "' must be a number");
    return v.get<double>();
}

double get_num_or(const json& obj, const char* key, const std::string& path, double def) {
    if (!obj.contains(key)) return def;
    return get_num(obj, key, path);
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer()) throw ConfigError("'" + join(path, key) + "' must be an integer");
    return v.get<std::int64_t>();
}

std::int64_t get_int_or(const json& obj, const char* key, const std::string& path,
                        std::int64_t def) {
    if (!obj.contains(key)) return def;
    return get_int(obj, key, path);
}

std::uint64_t get_u64_or(const json& obj, const char* key, const std::string& path,
                         std::uint64_t def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("'" + join(path, key) + "' must be an integer");
    return v.get<std::uint64_t>();
}

bool get_bool_or(const json& obj, const char* key, const std::string& path, bool def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError("'" + join(path, key) + "' must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_string()) throw ConfigError("'" + join(path, key) + "' must be a string");
    return v.get<std::string>();
}

std::string get_str_or(const json& obj, const char* key, const std::string& path,
                       const std::string& def) {
    if (!obj.contains(key)) return def;
    return get_str(obj, key, path);
}

json to_json(const ecm::OcvCurve& curve) {
    json knots = json::array();
    for (const auto& [soc, v] : curve.knots) knots.push_back(json::array({soc, v}));
    return knots;
}

ecm::OcvCurve ocv_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path + ": expected an array of [soc, volts] pairs");
    ecm::OcvCurve curve;
    for (const auto& k : j) {
        if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
            throw ConfigError(path + ": each knot must be a [soc, volts] number pair");
        curve.knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    curve.validate();
    return curve;
}

json to_json(const ecm::EcmParams& params) {
    json branches = json::array();
    for (const auto& b : params.branches)
        branches.push_back(json{{"r", b.r_ohm}, {"tau", b.tau_s}});
    return json{
        {"r0", params.r0_ohm},
        {"branches", branches},
        {"capacity_ah", params.capacity_ah},
        {"ocv_knots", to_json(params.ocv)},
    };
}

ecm::EcmParams ecm_from_json(const json& j, const std::string& path) {
    check_keys(j, {"r0", "branches", "capacity_ah", "ocv_knots"}, path);
    ecm::EcmParams params;
    params.r0_ohm = get_num(j, "r0", path);
    params.capacity_ah = get_num(j, "capacity_ah", path);
    const json& branches = require(j, "branches", path);
    if (!branches.is_array() || branches.size() != 2)
        throw ConfigError(path + ".branches: exactly two RC branches required");
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string bpath = path + ".branches[" + std::to_string(i) + "]";
        check_keys(branches[i], {"r", "tau"}, bpath);
        params.branches[i].r_ohm = get_num(branches[i], "r", bpath);
        params.branches[i].tau_s = get_num(branches[i], "tau", bpath);
    }
    params.ocv = ocv_from_json(require(j, "ocv_knots", path), path + ".ocv_knots");
    params.validate();
    return params;
}

json to_json(const features::Normalizer& norm) {
    return json{
        {"scheme", norm.scheme == features::Scheme::zscore ? "zscore" : "minmax"},
        {"feature_offset", norm.offset},
        {"feature_scale", norm.scale},
        {"target_offset", norm.target_offset},
        {"target_scale", norm.target_scale},
        {"has_target_stats", norm.has_target_stats},
    };
}

features::Normalizer normalizer_from_json(const json& j, const std::string& path) {
    check_keys(j,
               {"scheme", "feature_offset", "feature_scale", "target_offset", "target_scale",
                "has_target_stats"},
               path);
    features::Normalizer norm;
    const std::string scheme = get_str(j, "scheme", path);
    if (scheme == "zscore")
        norm.scheme = features::Scheme::zscore;
    else if (scheme == "minmax")
        norm.scheme = features::Scheme::minmax;
    else
        throw ConfigError(path + ".scheme: expected zscore or minmax");
    norm.offset = require(j, "feature_offset", path).get<std::vector<double>>();
    norm.scale = require(j, "feature_scale", path).get<std::vector<double>>();
    if (norm.offset.size() != norm.scale.size() || norm.offset.empty())
        throw ConfigError(path + ": feature_offset/feature_scale size mismatch");
    for (double s : norm.scale)
        if (!(s > 0.0)) throw ConfigError(path + ": feature_scale entries must be > 0");
    norm.target_offset = get_num(j, "target_offset", path);
    norm.target_scale = get_num(j, "target_scale", path);
    norm.has_target_stats = get_bool_or(j, "has_target_stats", path, true);
    if (!(norm.target_scale > 0.0))
        throw ConfigError(path + ": target_scale must be > 0");
    return norm;
}

}  // namespace evolt::jsonio
