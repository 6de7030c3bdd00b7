#pragma once

// JSON view of filter configuration, shared by manifests and sidecars.
// Readers report the offending field as a dotted path.

#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "cdbm3d.hpp"
#include "ccf.hpp"
#include "synth.hpp"

namespace hscube {

using json = nlohmann::json;

[[nodiscard]] inline HosvdVariant parse_variant(const std::string& name) {
    if (name == "complex3d") return HosvdVariant::Complex3D;
    if (name == "imre4d") return HosvdVariant::ImRe4D;
    throw Error(ErrorCode::InvalidConfig, "unknown HOSVD variant '" + name + "'");
}

[[nodiscard]] inline FilterStages parse_stages(const std::string& name) {
    if (name == "threshold") return FilterStages::ThresholdOnly;
    if (name == "threshold+wiener") return FilterStages::ThresholdPlusWiener;
    throw Error(ErrorCode::InvalidConfig, "unknown filter stages '" + name + "'");
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
        schema_error(path + "." + key, "missing");
    }
    return obj.at(key);
}

inline std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        schema_error(path, "expected a nonnegative integer");
    }
    return v.get<std::size_t>();
}

inline double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) {
        schema_error(path, "expected a number");
    }
    return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) {
        schema_error(path, "expected a string");
    }
    return v.get<std::string>();
}

template<typename Parse>
auto as_enum(const json& v, const std::string& path, Parse parse) {
    const std::string s = as_string(v, path);
    try {
        return parse(s);
    } catch (const Error& e) {
        schema_error(path, e.what());
    }
}

} // namespace detail

/// An infinite match threshold is written as null.
[[nodiscard]] inline json to_json(const DenoiseConfig& cfg) {
    return json{
        {"patch_rows", cfg.patch_rows},
        {"patch_cols", cfg.patch_cols},
        {"patch_step", cfg.patch_step},
        {"search_radius", cfg.search_radius},
        {"max_group_size", cfg.max_group_size},
        {"match_threshold", std::isfinite(cfg.match_threshold) ? json(cfg.match_threshold) : json(nullptr)},
        {"hard_threshold_factor", cfg.hard_threshold_factor},
        {"sigma", cfg.sigma},
        {"variant", to_string(cfg.variant)},
        {"stages", to_string(cfg.stages)},
    };
}

/// Overlays the fields present in `j` onto `base`; unknown keys are errors.
[[nodiscard]] inline DenoiseConfig denoise_config_from_json(const json& j, const std::string& path, DenoiseConfig base = {}) {
    if (!j.is_object()) {
        detail::schema_error(path, "expected an object");
    }
    for (const auto& [key, v] : j.items()) {
        const std::string p = path + "." + key;
        if (key == "patch_rows") base.patch_rows = detail::as_count(v, p);
        else if (key == "patch_cols") base.patch_cols = detail::as_count(v, p);
        else if (key == "patch_step") base.patch_step = detail::as_count(v, p);
        else if (key == "search_radius") base.search_radius = detail::as_count(v, p);
        else if (key == "max_group_size") base.max_group_size = detail::as_count(v, p);
        else if (key == "match_threshold") base.match_threshold = v.is_null() ? std::numeric_limits<double>::infinity() : detail::as_real(v, p);
        else if (key == "hard_threshold_factor") base.hard_threshold_factor = detail::as_real(v, p);
        else if (key == "sigma") base.sigma = detail::as_real(v, p);
        else if (key == "variant") base.variant = detail::as_enum(v, p, parse_variant);
        else if (key == "stages") base.stages = detail::as_enum(v, p, parse_stages);
        else detail::schema_error(p, "unknown field");
    }
    return base;
}

[[nodiscard]] inline json to_json(const DispersionModel& m) { return json{{"a0", m.a0}, {"b0", m.b0}, {"c0", m.c0}}; }

[[nodiscard]] inline DispersionModel dispersion_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) {
        detail::schema_error(path, "expected an object");
    }
    DispersionModel m;
    for (const auto& [key, v] : j.items()) {
        const std::string p = path + "." + key;
        if (key == "a0") m.a0 = detail::as_real(v, p);
        else if (key == "b0") m.b0 = detail::as_real(v, p);
        else if (key == "c0") m.c0 = detail::as_real(v, p);
        else detail::schema_error(p, "unknown field");
    }
    return m;
}

[[nodiscard]] inline json to_json(const WindowRun& run) {
    return json{{"center", run.center},           {"first_band", run.first_band},   {"n_bands", run.n_bands},
                {"owned_first", run.owned_first}, {"owned_count", run.owned_count}, {"p", run.p},
                {"eigen_sigma", run.eigen_sigma}, {"seconds", run.seconds}};
}

} // namespace hscube
