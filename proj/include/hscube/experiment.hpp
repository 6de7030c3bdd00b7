#pragma once

// Experiment harness: manifests describing (object, sigma, seed, method)
// sweeps, per-combination metric reports, and the metrics CSV.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "ccf.hpp"
#include "config_json.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "synth.hpp"

namespace hscube {

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr const char* kCsvHeader =
    "object,method,sigma,seed,band_index,wavelength_nm,rrmse_phase,rrmse_amp,snr_db,p_selected,window,step,seconds";

/// One CSV line. Summary rows carry band_index == -1 and wavelength 0.
struct CsvRow {
    std::string   object;
    std::string   method;
    double        sigma         = 0.0;
    std::uint64_t seed          = 0;
    long long     band_index    = -1;
    double        wavelength_nm = 0.0;
    double        rrmse_phase   = 0.0;
    double        rrmse_amp     = 0.0;
    double        snr_db        = 0.0;
    std::size_t   p_selected    = 0;
    std::size_t   window        = 0;
    std::size_t   step          = 0;
    double        seconds       = 0.0;

    bool operator==(const CsvRow&) const = default;
};

namespace detail {

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_real(const std::string& s, std::size_t line) {
    char*        end = nullptr;
    const double v   = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw Error(ErrorCode::SchemaViolation, "csv line " + std::to_string(line) + ": '" + s + "' is not a number");
    }
    return v;
}

inline long long parse_integer(const std::string& s, std::size_t line) {
    char*           end = nullptr;
    const long long v   = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw Error(ErrorCode::SchemaViolation, "csv line " + std::to_string(line) + ": '" + s + "' is not an integer");
    }
    return v;
}

} // namespace detail

[[nodiscard]] inline std::string format_csv_row(const CsvRow& r) {
    using detail::format_real;
    std::ostringstream os;
    os << r.object << ',' << r.method << ',' << format_real(r.sigma) << ',' << r.seed << ',' << r.band_index << ','
       << format_real(r.wavelength_nm) << ',' << format_real(r.rrmse_phase) << ',' << format_real(r.rrmse_amp) << ','
       << format_real(r.snr_db) << ',' << r.p_selected << ',' << r.window << ',' << r.step << ',' << format_real(r.seconds);
    return os.str();
}

[[nodiscard]] inline std::string format_csv(const std::vector<CsvRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += format_csv_row(r) + "\n";
    }
    return out;
}

/// Parses text produced by format_csv; the header must match exactly.
[[nodiscard]] inline std::vector<CsvRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string        line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw Error(ErrorCode::SchemaViolation, "csv header does not match the metrics schema");
    }
    std::vector<CsvRow> rows;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream       ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            f.push_back(cell);
        }
        if (f.size() != 13) {
            throw Error(ErrorCode::SchemaViolation, "csv line " + std::to_string(n) + " has " + std::to_string(f.size()) + " fields, expected 13");
        }
        CsvRow r;
        r.object        = f[0];
        r.method        = f[1];
        r.sigma         = detail::parse_real(f[2], n);
        r.seed          = static_cast<std::uint64_t>(std::strtoull(f[3].c_str(), nullptr, 10));
        r.band_index    = detail::parse_integer(f[4], n);
        r.wavelength_nm = detail::parse_real(f[5], n);
        r.rrmse_phase   = detail::parse_real(f[6], n);
        r.rrmse_amp     = detail::parse_real(f[7], n);
        r.snr_db        = detail::parse_real(f[8], n);
        r.p_selected    = static_cast<std::size_t>(detail::parse_integer(f[9], n));
        r.window        = static_cast<std::size_t>(detail::parse_integer(f[10], n));
        r.step          = static_cast<std::size_t>(detail::parse_integer(f[11], n));
        r.seconds       = detail::parse_real(f[12], n);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Reports

/// Metrics of one method on one noisy cube. `bands` lists the evaluated band
/// indices (every band, or only the centre band in window studies).
struct MetricsReport {
    std::string              object;
    std::string              method;
    double                   sigma  = 0.0;
    std::uint64_t            seed   = 0;
    std::size_t              window = 0;
    std::size_t              step   = 0;
    std::vector<std::size_t> bands;
    std::vector<double>      wavelengths;
    std::vector<double>      rrmse_phase;
    std::vector<double>      rrmse_amp;
    std::vector<double>      band_snr_db;
    std::vector<std::size_t> p_selected;
    double                   mean_rrmse_phase = 0.0;
    double                   mean_rrmse_amp   = 0.0;
    double                   snr_db           = 0.0; // of the noisy input, whole cube
    double                   seconds          = 0.0;
    json                     config;
    std::string              error; // nonempty when the combination failed

    [[nodiscard]] bool ok() const noexcept { return error.empty(); }
};

/// Fills the per-band metrics of `est` over `bands`.
inline void score(MetricsReport& rep, const ComplexCube& est, const ComplexCube& noisy, const ComplexCube& truth,
                  const std::vector<std::size_t>& bands, const std::vector<std::size_t>& p_per_band) {
    rep.bands = bands;
    rep.wavelengths.clear();
    rep.rrmse_phase.clear();
    rep.rrmse_amp.clear();
    rep.band_snr_db.clear();
    rep.p_selected.clear();
    for (std::size_t b : bands) {
        rep.wavelengths.push_back(truth.wavelengths()[b]);
        rep.rrmse_phase.push_back(rrmse_phase(est, truth, b));
        rep.rrmse_amp.push_back(rrmse_amplitude(est, truth, b));
        rep.band_snr_db.push_back(snr_db(noisy, truth, b));
        rep.p_selected.push_back(p_per_band.empty() ? 0 : p_per_band[b]);
    }
    rep.mean_rrmse_phase = mean(rep.rrmse_phase);
    rep.mean_rrmse_amp   = mean(rep.rrmse_amp);
    rep.snr_db           = snr_db(noisy, truth);
}

[[nodiscard]] inline std::vector<CsvRow> to_rows(const MetricsReport& rep) {
    std::vector<CsvRow> rows;
    if (!rep.ok()) {
        return rows;
    }
    CsvRow base{rep.object, rep.method, rep.sigma, rep.seed, -1, 0.0, 0.0, 0.0, 0.0, 0, rep.window, rep.step, rep.seconds};
    std::size_t p_max = 0;
    for (std::size_t i = 0; i < rep.bands.size(); ++i) {
        CsvRow r        = base;
        r.band_index    = static_cast<long long>(rep.bands[i]);
        r.wavelength_nm = rep.wavelengths[i];
        r.rrmse_phase   = rep.rrmse_phase[i];
        r.rrmse_amp     = rep.rrmse_amp[i];
        r.snr_db        = rep.band_snr_db[i];
        r.p_selected    = rep.p_selected[i];
        p_max           = std::max(p_max, r.p_selected);
        rows.push_back(r);
    }
    base.rrmse_phase = rep.mean_rrmse_phase;
    base.rrmse_amp   = rep.mean_rrmse_amp;
    base.snr_db      = rep.snr_db;
    base.p_selected  = p_max;
    rows.push_back(base);
    return rows;
}

// ---------------------------------------------------------------------------
// Manifest

inline constexpr int kManifestSchemaVersion = 1;

struct ObjectEntry {
    PhaseObjectKind kind = PhaseObjectKind::TwoPeak;
    std::size_t     rows = 64, cols = 64, bands = 60;
    double          lambda_first = 400.0, lambda_last = 798.0;
    double          max_phase_400 = kDefaultInterferometricPeak;
};

/// Method names: identity, ccf, ccf-sliding, ccf-centered, cdbm3d-slice,
/// separate, average. `windows` x `steps` expand into separate combinations.
struct MethodEntry {
    std::string              name;
    std::vector<std::size_t> windows;
    std::vector<std::size_t> steps;
    double                   center_nm = 0.0;
    AverageMode              mode      = AverageMode::Global;
    DenoiseConfig            cfg;
};

struct Manifest {
    int                        schema_version = kManifestSchemaVersion;
    DispersionModel            dispersion;
    std::vector<ObjectEntry>   objects;
    std::vector<double>        sigmas;
    std::vector<std::uint64_t> seeds;
    std::vector<MethodEntry>   methods;
    std::string                output; // CSV path, may be empty
    unsigned                   threads = 0;
};

namespace detail {

inline const std::map<std::string, bool>& method_names() {
    // name -> whether it takes a window grid
    static const std::map<std::string, bool> names{{"identity", false},    {"ccf", false},      {"ccf-sliding", true}, {"ccf-centered", true},
                                                   {"cdbm3d-slice", false}, {"separate", false}, {"average", false}};
    return names;
}

template<typename T, typename Conv>
std::vector<T> list_of(const json& v, const std::string& path, Conv conv) {
    if (!v.is_array()) {
        schema_error(path, "expected an array");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(static_cast<T>(conv(v[i], path + "[" + std::to_string(i) + "]")));
    }
    return out;
}

inline ObjectEntry object_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) {
        schema_error(path, "expected an object");
    }
    ObjectEntry o;
    o.kind          = as_enum(require(j, "kind", path), path + ".kind", parse_object_kind);
    o.max_phase_400 = default_peak_phase(o.kind);
    for (const auto& [key, v] : j.items()) {
        const std::string p = path + "." + key;
        if (key == "kind") continue;
        if (key == "size") {
            const auto s = list_of<std::size_t>(v, p, as_count);
            if (s.size() != 3 || s[0] == 0 || s[1] == 0 || s[2] == 0) schema_error(p, "expected three positive integers [rows, cols, bands]");
            o.rows = s[0], o.cols = s[1], o.bands = s[2];
        } else if (key == "lambda") {
            const auto l = list_of<double>(v, p, as_real);
            if (l.size() != 2 || !(l[0] > 0.0) || !(l[1] > l[0])) schema_error(p, "expected [first_nm, last_nm] with 0 < first < last");
            o.lambda_first = l[0], o.lambda_last = l[1];
        } else if (key == "max_phase_400") {
            o.max_phase_400 = as_real(v, p);
        } else {
            schema_error(p, "unknown field");
        }
    }
    return o;
}

inline MethodEntry method_from_json(const json& j, const std::string& path, const DenoiseConfig& defaults) {
    if (!j.is_object()) {
        schema_error(path, "expected an object");
    }
    MethodEntry m;
    m.cfg  = defaults;
    m.name = as_string(require(j, "name", path), path + ".name");
    const auto it = method_names().find(m.name);
    if (it == method_names().end()) {
        schema_error(path + ".name", "unknown method '" + m.name + "'");
    }
    for (const auto& [key, v] : j.items()) {
        const std::string p = path + "." + key;
        if (key == "name") continue;
        if (key == "windows") m.windows = list_of<std::size_t>(v, p, as_count);
        else if (key == "steps") m.steps = list_of<std::size_t>(v, p, as_count);
        else if (key == "center_nm") m.center_nm = as_real(v, p);
        else if (key == "mode") m.mode = as_enum(v, p, parse_average_mode);
        else if (key == "denoise") m.cfg = denoise_config_from_json(v, p, defaults);
        else schema_error(p, "unknown field");
    }
    if (m.name == "ccf-sliding") {
        if (m.windows.empty()) m.windows = {WindowSpec{}.width};
        if (m.steps.empty()) m.steps = {WindowSpec{}.step};
    }
    if (m.name == "ccf-centered") {
        if (m.windows.empty()) schema_error(path + ".windows", "ccf-centered needs a window list");
        if (!(m.center_nm > 0.0)) schema_error(path + ".center_nm", "ccf-centered needs a positive centre wavelength");
    }
    for (std::size_t i = 0; i < m.windows.size(); ++i) {
        if (m.windows[i] == 0) schema_error(path + ".windows[" + std::to_string(i) + "]", "window must be at least 1");
    }
    for (std::size_t i = 0; i < m.steps.size(); ++i) {
        if (m.steps[i] == 0) schema_error(path + ".steps[" + std::to_string(i) + "]", "step must be at least 1");
    }
    return m;
}

} // namespace detail

[[nodiscard]] inline Manifest manifest_from_json(const json& j) {
    using namespace detail;
    if (!j.is_object()) {
        schema_error("$", "manifest must be an object");
    }
    Manifest m;
    const json& ver = require(j, "schema_version", "$");
    if (!ver.is_number_integer() || ver.get<int>() != kManifestSchemaVersion) {
        schema_error("$.schema_version", "expected " + std::to_string(kManifestSchemaVersion));
    }
    DenoiseConfig defaults;
    if (j.contains("denoise")) {
        defaults = denoise_config_from_json(j.at("denoise"), "$.denoise");
    }
    for (const auto& [key, v] : j.items()) {
        const std::string p = "$." + key;
        if (key == "schema_version" || key == "denoise") continue;
        if (key == "dispersion") m.dispersion = dispersion_from_json(v, p);
        else if (key == "objects") m.objects = list_of<ObjectEntry>(v, p, object_from_json);
        else if (key == "sigmas") m.sigmas = list_of<double>(v, p, as_real);
        else if (key == "seeds") m.seeds = list_of<std::uint64_t>(v, p, as_count);
        else if (key == "methods") m.methods = list_of<MethodEntry>(v, p, [&](const json& e, const std::string& ep) { return method_from_json(e, ep, defaults); });
        else if (key == "output") m.output = as_string(v, p);
        else if (key == "threads") m.threads = static_cast<unsigned>(as_count(v, p));
        else schema_error(p, "unknown field");
    }
    for (std::size_t i = 0; i < m.sigmas.size(); ++i) {
        if (!(m.sigmas[i] >= 0.0) || !std::isfinite(m.sigmas[i])) schema_error("$.sigmas[" + std::to_string(i) + "]", "sigma must be finite and nonnegative");
    }
    if (m.seeds.empty()) {
        m.seeds = {1};
    }
    return m;
}

[[nodiscard]] inline Manifest parse_manifest(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("$: not valid JSON: ") + e.what());
    }
    return manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// Running

struct ExperimentOptions {
    bool     timing  = true; // false zeroes every seconds field
    unsigned threads = 0;    // concurrent combinations; 0 defers to the manifest, then HSCUBE_THREADS
};

struct ExperimentResult {
    std::vector<MetricsReport> reports; // manifest order
    std::vector<CsvRow>        rows;

    [[nodiscard]] std::size_t failures() const {
        return static_cast<std::size_t>(std::ranges::count_if(reports, [](const MetricsReport& r) { return !r.ok(); }));
    }
};

namespace detail {

struct Combination {
    std::size_t   object = 0, method = 0;
    double        sigma  = 0.0;
    std::uint64_t seed   = 0;
    std::size_t   window = 0, step = 0;
};

inline std::size_t nearest_band(const std::vector<double>& wavelengths, double nm) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < wavelengths.size(); ++b) {
        if (std::abs(wavelengths[b] - nm) < std::abs(wavelengths[best] - nm)) best = b;
    }
    return best;
}

inline std::vector<std::size_t> all_bands(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

} // namespace detail

/// Runs one method on one noisy cube. The filters are given the true noise
/// sigma; the cube filter replaces it per eigenimage with its own estimate.
[[nodiscard]] inline MetricsReport run_method(const MethodEntry& method, const ComplexCube& noisy, const ComplexCube& truth,
                                              const DispersionModel& dispersion, double sigma, std::size_t window, std::size_t step) {
    MetricsReport rep;
    rep.method = method.name == "average" ? "average-" + to_string(method.mode) : method.name;
    rep.sigma  = sigma;
    rep.window = window;
    rep.step   = step;

    DenoiseConfig cfg = method.cfg;
    cfg.sigma         = sigma;
    rep.config        = to_json(cfg);

    const auto               start = std::chrono::steady_clock::now();
    ComplexCube              est;
    std::vector<std::size_t> bands = detail::all_bands(truth.n_bands());
    std::vector<std::size_t> p(truth.n_bands(), 0);
    auto                     record_p = [&](const std::vector<WindowRun>& runs) {
        for (const auto& run : runs) {
            for (std::size_t b = run.owned_first; b < run.owned_first + run.owned_count; ++b) p[b] = run.p;
        }
    };

    if (method.name == "identity") {
        est = noisy;
    } else if (method.name == "ccf") {
        auto r = ccf_denoise_detailed(noisy, cfg);
        record_p(r.windows);
        est = std::move(r.cube);
    } else if (method.name == "ccf-sliding") {
        auto r = ccf_sliding(noisy, cfg, {window, step});
        record_p(r.windows);
        est = std::move(r.cube);
    } else if (method.name == "ccf-centered") {
        const std::size_t center = detail::nearest_band(truth.wavelengths(), method.center_nm);
        auto              r      = ccf_window(noisy, cfg, center, window);
        const auto&       run    = r.windows.front();
        // Embed the window's output so band indices stay cube-global.
        est = noisy;
        for (std::size_t b = 0; b < run.n_bands; ++b) {
            std::ranges::copy(r.cube.band(b), est.band(run.first_band + b).begin());
        }
        p[center] = run.p;
        bands     = {center};
    } else if (method.name == "cdbm3d-slice") {
        est = cdbm3d_per_slice(noisy, cfg);
    } else if (method.name == "separate") {
        est = baseline_separate(noisy, cfg);
    } else if (method.name == "average") {
        est = baseline_average(noisy, dispersion, method.mode);
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown method '" + method.name + "'");
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    score(rep, est, noisy, truth, bands, p);
    return rep;
}

/// Runs every (object, sigma, seed, method, window, step) combination. A
/// failing combination is reported with its error; the rest still run.
[[nodiscard]] inline ExperimentResult run_experiment(const Manifest& manifest, const ExperimentOptions& opts = {}) {
    std::vector<detail::Combination> combos;
    for (std::size_t o = 0; o < manifest.objects.size(); ++o) {
        for (double sigma : manifest.sigmas) {
            for (std::uint64_t seed : manifest.seeds) {
                for (std::size_t m = 0; m < manifest.methods.size(); ++m) {
                    const auto& me      = manifest.methods[m];
                    const auto  windows = me.windows.empty() ? std::vector<std::size_t>{0} : me.windows;
                    const auto  steps   = me.steps.empty() ? std::vector<std::size_t>{0} : me.steps;
                    for (std::size_t w : windows) {
                        for (std::size_t s : steps) {
                            combos.push_back({o, m, sigma, seed, w, s});
                        }
                    }
                }
            }
        }
    }

    // Truth cubes are shared by every combination of an object.
    std::vector<std::optional<ComplexCube>> truths(manifest.objects.size());
    std::vector<std::string>                truth_errors(manifest.objects.size());
    for (std::size_t o = 0; o < manifest.objects.size(); ++o) {
        const auto& e = manifest.objects[o];
        try {
            const auto spec = make_object(e.kind, e.rows, e.cols, manifest.dispersion, e.max_phase_400);
            truths[o] = generate_truth(spec, manifest.dispersion, e.rows, e.cols, uniform_wavelengths(e.lambda_first, e.lambda_last, e.bands));
        } catch (const std::exception& ex) {
            truth_errors[o] = ex.what();
        }
    }

    ExperimentResult result;
    result.reports.resize(combos.size());
    const unsigned workers = resolve_threads(opts.threads > 0 ? opts.threads : manifest.threads);
    parallel_for(combos.size(), workers, [&](std::size_t i) {
        const auto&   c = combos[i];
        const auto&   o = manifest.objects[c.object];
        MethodEntry   method = manifest.methods[c.method];
        method.cfg.threads   = 1;
        MetricsReport rep;
        try {
            if (!truths[c.object]) {
                throw Error(ErrorCode::InvalidConfig, truth_errors[c.object]);
            }
            const ComplexCube noisy = add_noise(*truths[c.object], {c.sigma, c.seed});
            rep = run_method(method, noisy, *truths[c.object], manifest.dispersion, c.sigma, c.window, c.step);
        } catch (const std::exception& ex) {
            rep.method = method.name;
            rep.sigma  = c.sigma;
            rep.window = c.window;
            rep.step   = c.step;
            rep.error  = ex.what();
        }
        rep.object = to_string(o.kind);
        rep.seed   = c.seed;
        if (!opts.timing) {
            rep.seconds = 0.0;
        }
        result.reports[i] = std::move(rep);
    });
    for (const auto& rep : result.reports) {
        auto rows = to_rows(rep);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    }
    return result;
}

/// Human-readable identification of a combination, for error messages.
[[nodiscard]] inline std::string describe(const MetricsReport& rep) {
    std::ostringstream os;
    os << "object=" << rep.object << " method=" << rep.method << " sigma=" << rep.sigma << " seed=" << rep.seed;
    if (rep.window > 0) os << " window=" << rep.window;
    if (rep.step > 0) os << " step=" << rep.step;
    return os.str();
}

} // namespace hscube
