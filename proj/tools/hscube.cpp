// hscube: synthesise, denoise, score and sweep complex hyperspectral cubes.
//
// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or schema error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <hscube/baselines.hpp>
#include <hscube/ccf.hpp>
#include <hscube/chsc.hpp>
#include <hscube/config_json.hpp>
#include <hscube/experiment.hpp>
#include <hscube/metrics.hpp>
#include <hscube/synth.hpp>

namespace fs = std::filesystem;
using namespace hscube;

namespace {

constexpr int kExitOk      = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage   = 2;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::SchemaViolation:
    case ErrorCode::InvalidConfig:
    case ErrorCode::DispersionRequired:
    case ErrorCode::DimensionMismatch: return kExitUsage;
    default: return kExitRuntime;
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Removes the listed files unless disarmed; keeps failed runs from leaving
// half-written outputs behind.
struct OutputGuard {
    std::vector<fs::path> paths;
    bool                  armed = true;
    ~OutputGuard() {
        if (!armed) return;
        for (const auto& p : paths) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }
};

struct FilterFlags {
    DenoiseConfig cfg;
    std::string   variant = "imre4d";
    std::string   stages  = "threshold+wiener";

    void attach(CLI::App& app) {
        app.add_option("--patch-rows", cfg.patch_rows, "Patch height in pixels")->capture_default_str();
        app.add_option("--patch-cols", cfg.patch_cols, "Patch width in pixels")->capture_default_str();
        app.add_option("--patch-step", cfg.patch_step, "Stride of the reference-patch grid")->capture_default_str();
        app.add_option("--search-radius", cfg.search_radius, "Block-matching search radius")->capture_default_str();
        app.add_option("--group-size", cfg.max_group_size, "Maximum patches per group (K)")->capture_default_str();
        app.add_option("--match-threshold", cfg.match_threshold, "Largest accepted mean squared patch distance")->capture_default_str();
        app.add_option("--tau", cfg.hard_threshold_factor, "Hard-threshold factor: coefficients below tau*sigma are zeroed")->capture_default_str();
        app.add_option("--variant", variant, "HOSVD variant")->check(CLI::IsMember({"complex3d", "imre4d"}))->capture_default_str();
        app.add_option("--stages", stages, "Filter stages")->check(CLI::IsMember({"threshold", "threshold+wiener"}))->capture_default_str();
        app.add_option("--threads", cfg.threads, "Worker threads (0: HSCUBE_THREADS, else 1)")->capture_default_str();
    }

    DenoiseConfig resolve() const {
        DenoiseConfig out = cfg;
        out.variant       = parse_variant(variant);
        out.stages        = parse_stages(stages);
        return out;
    }
};

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string              object = "two-peak";
    std::vector<std::size_t> size{64, 64, 60};
    std::vector<double>      lambda{400.0, 798.0};
    std::vector<double>      dispersion;
    double                   sigma = 0.0;
    std::uint64_t            seed  = 1;
    std::optional<double>    max_phase;
    std::string              truth_path;
    std::string              noisy_path;
};

int run_synth(const SynthArgs& a) {
    DispersionModel model;
    if (!a.dispersion.empty()) {
        model = {a.dispersion[0], a.dispersion[1], a.dispersion.size() > 2 ? a.dispersion[2] : 0.0};
    }
    const auto kind = parse_object_kind(a.object);
    const auto spec = make_object(kind, a.size[0], a.size[1], model, a.max_phase.value_or(default_peak_phase(kind)));
    const auto truth = generate_truth(spec, model, a.size[0], a.size[1], uniform_wavelengths(a.lambda[0], a.lambda[1], a.size[2]));

    OutputGuard guard;
    guard.paths.push_back(a.truth_path);
    chsc::write_cube(truth, a.truth_path);
    if (!a.noisy_path.empty()) {
        guard.paths.push_back(a.noisy_path);
        const auto noisy = add_noise(truth, {a.sigma, a.seed});
        chsc::write_cube(noisy, a.noisy_path);
        std::cout << "snr_db " << detail::format_real(snr_db(noisy, truth)) << "\n";
    }
    guard.armed = false;
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
    std::string         input;
    std::string         output;
    std::string         sidecar;
    std::string         method = "ccf-sliding";
    WindowSpec          window;
    std::optional<double> sigma;
    std::vector<double> dispersion;
    std::string         average_mode = "global";
    bool                no_timing    = false;
    FilterFlags         filter;
};

// Median over bands of the per-band MAD estimate.
double estimate_cube_sigma(const ComplexCube& cube) {
    std::vector<double> s;
    for (std::size_t b = 0; b < cube.n_bands(); ++b) {
        s.push_back(estimate_sigma(cube.slice(b)));
    }
    auto mid = s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2);
    std::nth_element(s.begin(), mid, s.end());
    return *mid;
}

int run_denoise(const DenoiseArgs& a) {
    const fs::path sidecar_path = a.sidecar.empty() ? fs::path(a.output + ".json") : fs::path(a.sidecar);
    OutputGuard    guard;
    guard.paths = {a.output, sidecar_path};

    const ComplexCube noisy = chsc::read_cube(a.input);
    DenoiseConfig     cfg   = a.filter.resolve();

    std::optional<DispersionModel> model;
    if (!a.dispersion.empty()) {
        model = DispersionModel{a.dispersion[0], a.dispersion[1], a.dispersion.size() > 2 ? a.dispersion[2] : 0.0};
    }
    std::string sigma_source = "eigenimage";
    if (a.method == "cdbm3d-slice" || a.method == "separate") {
        if (a.sigma) {
            cfg.sigma    = *a.sigma;
            sigma_source = "flag";
        } else {
            cfg.sigma    = estimate_cube_sigma(noisy);
            sigma_source = "mad";
        }
    } else if (a.method == "average") {
        sigma_source = "none";
    }

    const auto             start = std::chrono::steady_clock::now();
    ComplexCube            out;
    std::vector<WindowRun> runs;
    if (a.method == "ccf") {
        auto r = ccf_denoise_detailed(noisy, cfg);
        out    = std::move(r.cube);
        runs   = std::move(r.windows);
    } else if (a.method == "ccf-sliding") {
        auto r = ccf_sliding(noisy, cfg, a.window);
        out    = std::move(r.cube);
        runs   = std::move(r.windows);
    } else if (a.method == "cdbm3d-slice") {
        out = cdbm3d_per_slice(noisy, cfg);
    } else if (a.method == "separate") {
        out = baseline_separate(noisy, cfg);
    } else {
        out = baseline_average(noisy, model, parse_average_mode(a.average_mode));
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (a.no_timing) {
        seconds = 0.0;
        for (auto& r : runs) r.seconds = 0.0;
    }

    json side{{"method", a.method},
              {"input", a.input},
              {"output", a.output},
              {"shape", {noisy.n_rows(), noisy.n_cols(), noisy.n_bands()}},
              {"config", to_json(cfg)},
              {"sigma_source", sigma_source},
              {"seconds", seconds}};
    if (a.method == "ccf-sliding") {
        side["window"] = {{"width", a.window.width}, {"step", a.window.step}};
    }
    if (a.method == "average") {
        side["average_mode"] = a.average_mode;
        side["dispersion"]   = to_json(*model);
    }
    side["windows"] = json::array();
    for (const auto& r : runs) {
        side["windows"].push_back(to_json(r));
    }

    chsc::write_cube(out, a.output);
    write_text(sidecar_path, side.dump(2) + "\n");
    guard.armed = false;
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
    std::string   estimate;
    std::string   truth;
    std::string   noisy;
    std::string   out;
    std::string   object = "unknown";
    std::string   method = "unknown";
    double        sigma  = 0.0;
    std::uint64_t seed   = 0;
};

int run_metrics(const MetricsArgs& a) {
    const ComplexCube est   = chsc::read_cube(a.estimate);
    const ComplexCube truth = chsc::read_cube(a.truth);
    const ComplexCube noisy = a.noisy.empty() ? est : chsc::read_cube(a.noisy);
    if (est.n_rows() != truth.n_rows() || est.n_cols() != truth.n_cols() || est.n_bands() != truth.n_bands()) {
        throw Error(ErrorCode::DimensionMismatch, "estimate is " + est.shape_string() + " but truth is " + truth.shape_string());
    }
    MetricsReport rep;
    rep.object = a.object;
    rep.method = a.method;
    rep.sigma  = a.sigma;
    rep.seed   = a.seed;
    std::vector<std::size_t> bands(truth.n_bands());
    std::iota(bands.begin(), bands.end(), std::size_t{0});
    score(rep, est, noisy, truth, bands, {});
    const std::string csv = format_csv(to_rows(rep));
    if (a.out.empty()) {
        std::cout << csv;
    } else {
        write_text(a.out, csv);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string manifest;
    std::string out;
    unsigned    threads   = 0;
    bool        no_timing = false;
};

int run_sweep(const SweepArgs& a) {
    const Manifest manifest = parse_manifest(read_text(a.manifest));
    const auto     result   = run_experiment(manifest, {.timing = !a.no_timing, .threads = a.threads});
    const auto     csv      = format_csv(result.rows);
    const auto     target   = a.out.empty() ? manifest.output : a.out;
    if (target.empty()) {
        std::cout << csv;
    } else {
        write_text(target, csv);
    }
    for (const auto& rep : result.reports) {
        if (!rep.ok()) {
            std::cerr << "hscube sweep: failed " << describe(rep) << ": " << rep.error << "\n";
        }
    }
    return result.failures() == 0 ? kExitOk : kExitRuntime;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complex-domain hyperspectral cube synthesis, filtering and evaluation"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto*     s = app.add_subcommand("synth", "Write a synthetic truth cube and optionally a noisy copy");
    s->add_option("--object", synth.object, "Phase object")->check(CLI::IsMember({"two-peak", "compound", "wrapped"}))->capture_default_str();
    s->add_option("--size", synth.size, "Rows, columns and bands")->expected(3)->capture_default_str();
    s->add_option("--lambda", synth.lambda, "First and last wavelength in nm")->expected(2)->capture_default_str();
    s->add_option("--dispersion", synth.dispersion, "Cauchy coefficients A0 B0 [C0] (um^2, um^4); default BK7")->expected(2, 3);
    s->add_option("--sigma", synth.sigma, "Total std of the complex noise")->check(CLI::NonNegativeNumber)->capture_default_str();
    s->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
    s->add_option("--max-phase-400", synth.max_phase, "Peak phase at 400 nm in radians");
    s->add_option("--truth", synth.truth_path, "Output path of the noiseless cube")->required();
    s->add_option("--noisy", synth.noisy_path, "Output path of the noisy cube");

    DenoiseArgs den;
    auto*       d = app.add_subcommand("denoise", "Filter a cube");
    d->add_option("input", den.input, "Noisy CHSC cube")->required()->check(CLI::ExistingFile);
    d->add_option("output", den.output, "Filtered CHSC cube")->required();
    d->add_option("--method", den.method, "Filter")
        ->check(CLI::IsMember({"ccf", "ccf-sliding", "cdbm3d-slice", "separate", "average"}))
        ->capture_default_str();
    d->add_option("--window", den.window.width, "Sliding window width in bands")->check(CLI::PositiveNumber)->capture_default_str();
    d->add_option("--step", den.window.step, "Sliding window step in bands")->check(CLI::PositiveNumber)->capture_default_str();
    d->add_option("--sigma", den.sigma, "Noise std for cdbm3d-slice and separate (default: MAD estimate)")->check(CLI::NonNegativeNumber);
    d->add_option("--dispersion", den.dispersion, "Cauchy coefficients A0 B0 [C0], required by average")->expected(2, 3);
    d->add_option("--average-mode", den.average_mode, "Thickness averaging mode")->check(CLI::IsMember({"global", "pairwise"}))->capture_default_str();
    d->add_option("--sidecar", den.sidecar, "JSON sidecar path (default: OUTPUT.json)");
    d->add_flag("--no-timing", den.no_timing, "Write zero timings so reruns are byte-identical");
    den.filter.attach(*d);

    MetricsArgs met;
    auto*       m = app.add_subcommand("metrics", "Per-band and summary RRMSE of an estimate against the truth");
    m->add_option("estimate", met.estimate, "Estimated CHSC cube")->required()->check(CLI::ExistingFile);
    m->add_option("truth", met.truth, "Noiseless CHSC cube")->required()->check(CLI::ExistingFile);
    m->add_option("--noisy", met.noisy, "Noisy input, for the SNR column (default: the estimate)")->check(CLI::ExistingFile);
    m->add_option("--out", met.out, "CSV path (default: stdout)");
    m->add_option("--object", met.object, "Label for the object column")->capture_default_str();
    m->add_option("--method", met.method, "Label for the method column")->capture_default_str();
    m->add_option("--sigma", met.sigma, "Value for the sigma column")->capture_default_str();
    m->add_option("--seed", met.seed, "Value for the seed column")->capture_default_str();

    SweepArgs sw;
    auto*     w = app.add_subcommand("sweep", "Run every combination of an experiment manifest");
    w->add_option("manifest", sw.manifest, "Manifest file (JSON)")->required()->check(CLI::ExistingFile);
    w->add_option("--out", sw.out, "CSV path (default: the manifest's output, else stdout)");
    w->add_option("--threads", sw.threads, "Concurrent combinations (0: manifest, HSCUBE_THREADS, else 1)")->capture_default_str();
    w->add_flag("--no-timing", sw.no_timing, "Write zero timings so reruns are byte-identical");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*s) return run_synth(synth);
        if (*d) return run_denoise(den);
        if (*m) return run_metrics(met);
        if (*w) return run_sweep(sw);
    } catch (const Error& e) {
        std::cerr << "hscube: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "hscube: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
