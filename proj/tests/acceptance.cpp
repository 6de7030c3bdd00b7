// Acceptance suite: one PASS/FAIL line per criterion plus the real-data
// property check. Exits nonzero if any line fails.
//
//   hscube_acceptance [--real CUBE.chsc] [--only 1,3,...]
//
// Without --real (or HSCUBE_REAL_CUBE) the property check runs on a synthetic
// stand-in and says so.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <CLI11.hpp>

#include <hscube/baselines.hpp>
#include <hscube/ccf.hpp>
#include <hscube/chsc.hpp>
#include <hscube/experiment.hpp>
#include <hscube/hosvd.hpp>
#include <hscube/subspace.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace hscube;
using namespace hscube::testing;

namespace {

struct Verdict {
    bool        pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Manifest load_manifest(const std::string& name) {
    std::ifstream     in(fs::path(HSCUBE_SOURCE_DIR) / "manifests" / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

ExperimentResult run_checked(const Manifest& m, unsigned threads = 1) {
    auto res = run_experiment(m, {false, threads});
    for (const auto& r : res.reports) {
        if (!r.ok()) throw std::runtime_error(describe(r) + ": " + r.error);
    }
    return res;
}

const MetricsReport& find(const ExperimentResult& res, const std::string& object, const std::string& method, double sigma = -1.0,
                          std::size_t window = 0) {
    for (const auto& r : res.reports) {
        if (r.object == object && r.method == method && (sigma < 0.0 || r.sigma == sigma) && (window == 0 || r.window == window)) return r;
    }
    throw std::runtime_error("no report for " + object + "/" + method);
}

int shell(const std::string& cmd) {
    const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream     in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

Verdict exactness() {
    double worst_hosvd = 0.0, worst_unitary = 0.0;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto t  = random_tensor<cdouble, 3>({6, 5, 7}, s);
        const auto h  = hosvd(t);
        const auto rt = hosvd_inverse(h.core, h.factors);
        worst_hosvd   = std::max(worst_hosvd, rel_diff(rt.data(), t.data()));
        for (const auto& u : h.factors) {
            const auto n  = u.cols();
            worst_unitary = std::max(worst_unitary, (u.adjoint() * u - DynMatrix<cdouble>::Identity(n, n)).cwiseAbs().maxCoeff());
        }
        const auto t4 = random_tensor<double, 4>({4, 4, 3, 2}, s);
        const auto h4 = hosvd(t4);
        double     num = 0.0, den = 0.0;
        const auto r4 = hosvd_inverse(h4.core, h4.factors);
        for (std::size_t i = 0; i < t4.size(); ++i) {
            num += std::pow(r4.data()[i] - t4.data()[i], 2);
            den += std::pow(t4.data()[i], 2);
        }
        worst_hosvd = std::max(worst_hosvd, std::sqrt(num / den));
    }
    double worst_e = 0.0;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const auto b = identify_subspace(reshape_to_matrix(add_noise(rank_k_cube(24, 24, 12, 3, s), {0.4, s})));
        const auto p = static_cast<Eigen::Index>(b.p);
        worst_e      = std::max(worst_e, (b.E.adjoint() * b.E - Eigen::MatrixXcd::Identity(p, p)).cwiseAbs().maxCoeff());
    }
    const auto cube     = random_cube(7, 5, 4, 11);
    const bool reshape  = reshape_to_cube(reshape_to_matrix(cube), cube.wavelengths()) == cube;
    const bool chsc_rt  = chsc::decode(chsc::encode(cube)) == cube;
    DenoiseConfig small;
    small.patch_rows = small.patch_cols = 4;
    small.search_radius                 = 5;
    small.max_group_size                = 8;
    double     id_err = 0.0;
    for (auto v : {HosvdVariant::Complex3D, HosvdVariant::ImRe4D}) {
        auto c    = small;
        c.variant = v;
        const auto big = ComplexImage(20, 20, random_complex(400, 5));
        id_err         = std::max(id_err, max_abs_diff(denoise_image(big, c).data(), big.data()));
    }
    double ccf_err = 0.0;
    for (std::size_t k = 1; k <= 4; ++k) {
        const auto c = rank_k_cube(24, 24, 12, k, 100 + k);
        ccf_err      = std::max(ccf_err, rel_diff(ccf_denoise(c, small).data(), c.data()));
    }
    const bool pass = worst_hosvd <= 1e-10 && worst_unitary <= 1e-10 && worst_e <= 1e-10 && reshape && chsc_rt && id_err <= 1e-10 &&
                      ccf_err <= 1e-6;
    return {pass, fmt("hosvd %.1e, UhU-I %.1e, EhE-I %.1e, reshape %s, chsc %s, cdbm3d sigma=0 %.1e, ccf exact-rank %.1e", worst_hosvd,
                      worst_unitary, worst_e, reshape ? "bitwise" : "DIFFERS", chsc_rt ? "bitwise" : "DIFFERS", id_err, ccf_err)};
}

Verdict subspace_oracle() {
    int correct = 0;
    std::string misses;
    for (int i = 0; i < 100; ++i) {
        const std::size_t k = 1 + static_cast<std::size_t>(i % 6);
        const auto        b = identify_subspace(reshape_to_matrix(rank_k_cube(32, 32, 24, k, 1000 + static_cast<std::uint64_t>(i))));
        if (b.p == k) ++correct;
        else misses += fmt(" k=%zu->p=%zu", k, b.p);
    }
    return {correct >= 95, fmt("%d/100 correct (need 95)%s", correct, misses.c_str())};
}

Verdict window_sweep() {
    const auto        res     = run_checked(load_manifest("fig3a.manifest"));
    const std::vector windows = {30u, 50u, 70u, 90u, 110u};
    std::vector<double> mean(windows.size(), 0.0);
    std::vector<int>    count(windows.size(), 0);
    for (const auto& r : res.reports) {
        for (std::size_t i = 0; i < windows.size(); ++i) {
            if (r.window == windows[i]) mean[i] += r.mean_rrmse_phase, ++count[i];
        }
    }
    std::string detail = "mean RRMSE over " + std::to_string(count[0]) + " seeds at 598 nm:";
    std::size_t best   = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        mean[i] /= count[i];
        detail += fmt(" w%u=%.4f", windows[i], mean[i]);
        if (mean[i] < mean[best]) best = i;
    }
    detail += fmt("; minimum at %u", windows[best]);
    return {best != 0 && best != windows.size() - 1, detail};
}

Verdict sliding_vs_single() {
    const auto   res     = run_checked(load_manifest("fig3c.manifest"));
    const double single  = find(res, "two-peak", "ccf").mean_rrmse_phase;
    const double sliding = find(res, "two-peak", "ccf-sliding").mean_rrmse_phase;
    return {sliding <= 0.9 * single, fmt("200 bands, sigma 1.3: sliding 70/12 %.4f vs single %.4f (ratio %.3f, need <= 0.9)", sliding, single,
                                         sliding / single)};
}

Verdict sigma_sweep() {
    const auto res = run_checked(load_manifest("fig3d.manifest"));
    std::vector<std::pair<double, double>> by_sigma;
    std::string detail;
    for (const auto& r : res.reports) {
        by_sigma.emplace_back(r.sigma, r.mean_rrmse_phase);
        detail += fmt(" s%.1f=%.4f", r.sigma, r.mean_rrmse_phase);
    }
    std::ranges::sort(by_sigma);
    bool monotone = true;
    for (std::size_t i = 1; i < by_sigma.size(); ++i) monotone = monotone && by_sigma[i - 1].second <= by_sigma[i].second;
    const auto&  worst = find(res, "two-peak", "ccf", 2.5);
    const double snr   = worst.snr_db;
    const bool   pass  = std::abs(snr + 8.0) <= 1.5 && worst.mean_rrmse_phase <= 0.15 && monotone;
    return {pass, fmt("sigma 2.5: input SNR %.2f dB (need -8 +- 1.5), RRMSE %.4f (need <= 0.15); %s;", snr, worst.mean_rrmse_phase,
                      monotone ? "non-increasing as sigma drops" : "NOT monotone") + detail};
}

Verdict ranking() {
    const auto res = run_checked(load_manifest("methods.manifest"));
    auto       m   = [&](const char* obj, const char* method) { return find(res, obj, method).mean_rrmse_phase; };
    const double tp_slide = m("two-peak", "ccf-sliding"), tp_slice = m("two-peak", "cdbm3d-slice"), tp_sep = m("two-peak", "separate");
    const bool   two_peak = tp_slide < tp_slice && tp_slice < tp_sep;

    const double c_global = m("compound", "average-global");
    const double c_others = std::max({m("compound", "ccf-sliding"), m("compound", "cdbm3d-slice"), m("compound", "separate")});
    const bool   compound = c_global > c_others;

    bool        wrapped = true;
    const double w_slide = m("wrapped", "ccf-sliding");
    for (const auto& r : res.reports) {
        if (r.object == "wrapped" && r.method != "ccf-sliding" && r.method != "identity") wrapped = wrapped && w_slide < r.mean_rrmse_phase;
    }
    std::string detail = fmt("two-peak sliding %.3f < slice %.3f < separate %.3f: %s; compound global average %.3f worst (next %.3f): %s; "
                             "wrapped sliding %.3f best: %s",
                             tp_slide, tp_slice, tp_sep, two_peak ? "yes" : "NO", c_global, c_others, compound ? "yes" : "NO", w_slide,
                             wrapped ? "yes" : "NO");
    return {two_peak && compound && wrapped, detail};
}

Verdict window_count() {
    const std::size_t arithmetic = window_centers(200, 12).size();
    DenoiseConfig     small;
    small.patch_rows = small.patch_cols = 4;
    small.search_radius                 = 3;
    small.max_group_size                = 4;
    const auto cube = add_noise(rank_k_cube(12, 12, 200, 2, 3), {0.1, 1});
    const auto run  = ccf_sliding(cube, small, {70, 12});
    return {arithmetic == 17 && run.windows.size() == 17,
            fmt("200 bands, width 70, step 12: %zu centres, %zu filter invocations (need 17)", arithmetic, run.windows.size())};
}

Verdict determinism() {
    const auto noisy = add_noise(rank_k_cube(32, 32, 20, 3, 5), {0.5, 9});
    DenoiseConfig cfg;
    cfg.patch_rows = cfg.patch_cols = 6;
    cfg.threads                     = 1;
    const auto a1                   = ccf_sliding(noisy, cfg, {8, 5}).cube;
    const auto s1                   = cdbm3d_per_slice(noisy, cfg);
    cfg.threads                     = 4;
    const bool lib = ccf_sliding(noisy, cfg, {8, 5}).cube == a1 && cdbm3d_per_slice(noisy, cfg) == s1;

    auto m = parse_manifest(R"({"schema_version": 1,
        "objects": [{"kind": "two-peak", "size": [24, 24, 10]}, {"kind": "wrapped", "size": [24, 24, 10]}],
        "sigmas": [1.3], "seeds": [1, 2],
        "denoise": {"patch_rows": 6, "patch_cols": 6},
        "methods": [{"name": "ccf-sliding", "windows": [6], "steps": [3]}, {"name": "cdbm3d-slice"}, {"name": "separate"},
                    {"name": "average", "mode": "pairwise"}]})");
    const bool csv = format_csv(run_checked(m, 1).rows) == format_csv(run_checked(m, 3).rows);

    const auto  dir = fs::temp_directory_path() / "hscube_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = HSCUBE_CLI_PATH;
    const auto        p   = [&](const char* n) { return (dir / n).string(); };
    bool              cli_ok =
        shell(cli + " synth --object compound --size 32 32 16 --sigma 1.3 --seed 5 --truth " + p("t.chsc") + " --noisy " + p("n.chsc")) == 0;
    cli_ok = cli_ok && shell(cli + " denoise " + p("n.chsc") + " " + p("a.chsc") + " --window 8 --step 4 --no-timing --threads 1") == 0;
    cli_ok = cli_ok && shell(cli + " denoise " + p("n.chsc") + " " + p("b.chsc") + " --window 8 --step 4 --no-timing --threads 3") == 0;
    const bool cli_cube = cli_ok && slurp(p("a.chsc")) == slurp(p("b.chsc"));
    {
        std::ofstream(p("s.manifest")) << R"({"schema_version": 1,
            "objects": [{"kind": "compound", "size": [24, 24, 8]}], "sigmas": [1.3], "seeds": [3],
            "denoise": {"patch_rows": 6, "patch_cols": 6},
            "methods": [{"name": "ccf-sliding", "windows": [4], "steps": [2]}, {"name": "separate"}]})";
    }
    const bool sweep_ok = shell(cli + " sweep " + p("s.manifest") + " --no-timing --threads 1 --out " + p("a.csv")) == 0 &&
                          shell(cli + " sweep " + p("s.manifest") + " --no-timing --threads 3 --out " + p("b.csv")) == 0 &&
                          slurp(p("a.csv")) == slurp(p("b.csv")) && !slurp(p("a.csv")).empty();
    fs::remove_all(dir);
    const auto yn = [](bool b) { return b ? "identical" : "DIFFER"; };
    return {lib && csv && cli_cube && sweep_ok, fmt("threads 1 vs 3/4: library cubes %s, runner CSV %s, CLI denoise %s, CLI sweep %s", yn(lib),
                                                    yn(csv), yn(cli_cube), yn(sweep_ok))};
}

Verdict real_data(std::string path) {
    const auto dir = fs::temp_directory_path() / "hscube_acceptance_real";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cli = HSCUBE_CLI_PATH;
    std::string       source;
    std::string       extra;
    if (path.empty()) {
        path   = (dir / "standin.chsc").string();
        source = "synthetic stand-in (no external cube supplied)";
        if (shell(cli + " synth --object compound --size 48 40 36 --sigma 1.0 --seed 7 --truth " + (dir / "t.chsc").string() + " --noisy " +
                  path) != 0) {
            return {false, "could not synthesise the stand-in cube"};
        }
        extra = " --window 20 --step 10";
    } else {
        source = "external cube " + path;
    }
    const auto out  = (dir / "out.chsc").string();
    const int  code = shell(cli + " denoise " + path + " " + out + " --method ccf-sliding" + extra);
    if (code != 0) {
        fs::remove_all(dir);
        return {false, source + ": denoise exited " + std::to_string(code)};
    }
    const auto in     = chsc::read_cube(path);
    const auto result = chsc::read_cube(out); // rejects NaN and Inf samples
    const bool shape  = in.shape_string() == result.shape_string() && in.wavelengths() == result.wavelengths();
    const auto side   = json::parse(slurp(out + ".json"));
    std::string missing;
    for (const char* key : {"method", "input", "output", "shape", "config", "sigma_source", "seconds", "window", "windows"}) {
        if (!side.contains(key)) missing += std::string(" ") + key;
    }
    std::size_t owned = 0;
    for (const auto& w : side["windows"]) owned += w.value("owned_count", 0u);
    const bool covered = owned == in.n_bands();
    fs::remove_all(dir);
    return {shape && missing.empty() && covered,
            source + fmt(": %s, no NaN/Inf, shape %s, sidecar %s, %zu windows own %zu/%zu bands", in.shape_string().c_str(),
                         shape ? "preserved" : "CHANGED", missing.empty() ? "complete" : ("missing" + missing).c_str(),
                         side["windows"].size(), owned, in.n_bands())};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App    app{"hscube acceptance suite"};
    std::string real;
    std::string only;
    app.add_option("--real", real, "External CHSC cube for the property check (default: HSCUBE_REAL_CUBE)");
    app.add_option("--only", only, "Comma-separated criteria to run, 'real' for the property check");
    CLI11_PARSE(app, argc, argv);
    if (real.empty()) {
        if (const char* env = std::getenv("HSCUBE_REAL_CUBE")) real = env;
    }
    std::set<std::string> selected;
    for (std::stringstream ss(only); ss.good();) {
        std::string item;
        std::getline(ss, item, ',');
        if (!item.empty()) selected.insert(item);
    }

    const std::vector<std::pair<std::string, std::function<Verdict()>>> checks = {
        {"1", exactness},       {"2", subspace_oracle}, {"3", window_sweep}, {"4", sliding_vs_single}, {"5", sigma_sweep},
        {"6", ranking},         {"7", window_count},    {"8", determinism},  {"real", [&] { return real_data(real); }},
    };
    int failed = 0;
    for (const auto& [id, fn] : checks) {
        if (!selected.empty() && !selected.contains(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict    v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs  = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const auto   label = id == "real" ? std::string("real-data property") : "criterion " + id;
        std::printf("%s: %s (%.1f s) %s\n", label.c_str(), v.pass ? "PASS" : "FAIL", secs, v.detail.c_str());
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
