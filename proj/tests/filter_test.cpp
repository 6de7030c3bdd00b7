// Block matching, group filtering and the cube filter (single run and sliding).

#include <cmath>
#include <numbers>
#include <algorithm>
#include <limits>

#include <gtest/gtest.h>

#include <hscube/ccf.hpp>
#include <hscube/cdbm3d.hpp>
#include <hscube/metrics.hpp>
#include <hscube/synth.hpp>

#include "test_support.hpp"

using namespace hscube;
using namespace hscube::testing;

namespace {

ComplexImage random_image(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    return ComplexImage(rows, cols, random_complex(rows * cols, seed));
}

DenoiseConfig small_config() {
    DenoiseConfig cfg;
    cfg.patch_rows     = 4;
    cfg.patch_cols     = 4;
    cfg.patch_step     = 2;
    cfg.search_radius  = 6;
    cfg.max_group_size = 8;
    return cfg;
}

// TwoPeak truth and a noisy copy, shared by the slice regression tests.
struct TwoPeakSlice {
    ComplexCube truth;
    ComplexCube noisy;
};

TwoPeakSlice two_peak_slice(double sigma, std::uint64_t seed) {
    const DispersionModel model;
    auto truth = generate_truth(make_two_peak(64, 64, model), model, 64, 64, {598.0});
    auto noisy = add_noise(truth, {sigma, seed});
    return {std::move(truth), std::move(noisy)};
}

double slice_rrmse(const ComplexImage& est, const ComplexCube& truth) {
    ComplexCube c(truth.n_rows(), truth.n_cols(), truth.wavelengths());
    c.set_slice(0, est);
    return rrmse_phase(c, truth, 0);
}

} // namespace

// ---------------------------------------------------------------------------
// block matching

TEST(BlockMatch, ConstantImageTakesFirstCandidatesInScanOrder) {
    const ComplexImage img(16, 16, cdouble(2.0, -1.0));
    auto               cfg = small_config();
    const auto         g   = block_match(img, {6, 6}, cfg);
    ASSERT_EQ(g.members.size(), cfg.max_group_size);
    EXPECT_EQ(g.members.front(), (PatchCoord{6, 6}));
    for (double d : g.distances) EXPECT_EQ(d, 0.0);
    // Candidates tie at distance 0, so (row, col) order decides.
    std::vector<PatchCoord> expected;
    for (std::size_t r = 0; r <= 12 && expected.size() < cfg.max_group_size - 1; ++r) {
        for (std::size_t c = 0; c <= 12 && expected.size() < cfg.max_group_size - 1; ++c) {
            if (r == 6 && c == 6) continue;
            expected.push_back({r, c});
        }
    }
    EXPECT_EQ(std::vector<PatchCoord>(g.members.begin() + 1, g.members.end()), expected);
}

TEST(BlockMatch, OnlyReferenceWhenNothingElseIsClose) {
    const auto img = random_image(16, 16, 5);
    auto       cfg = small_config();
    cfg.match_threshold = 1e-6;
    const auto g = block_match(img, {4, 4}, cfg);
    EXPECT_EQ(g.members.size(), 1u);
}

TEST(BlockMatch, ExactCopyIsFoundAtZeroDistance) {
    auto img = random_image(20, 20, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) img(8 + i, 7 + j) = img(3 + i, 2 + j);
    const auto g = block_match(img, {3, 2}, small_config());
    ASSERT_GE(g.members.size(), 2u);
    EXPECT_EQ(g.members[1], (PatchCoord{8, 7}));
    EXPECT_EQ(g.distances[1], 0.0);
}

TEST(BlockMatch, DistancesAreSortedAndMatchDirectComputation) {
    const auto img = random_image(18, 18, 7);
    const auto cfg = small_config();
    const auto g   = block_match(img, {7, 7}, cfg);
    for (std::size_t k = 0; k < g.members.size(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) d += std::norm(img(7 + i, 7 + j) - img(g.members[k].row + i, g.members[k].col + j));
        EXPECT_NEAR(g.distances[k], d / 16.0, 1e-12);
        if (k > 1) {
            EXPECT_LE(g.distances[k - 1], g.distances[k]);
        }
    }
}

TEST(BlockMatch, ReferenceOutsideImageIsRejected) {
    const auto img = random_image(8, 8, 1);
    try {
        (void)block_match(img, {6, 0}, small_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfBounds);
    }
}

TEST(BlockMatch, ReferenceGridReachesEdge) {
    EXPECT_EQ(reference_grid(16, 4, 5), (std::vector<std::size_t>{0, 5, 10, 12}));
    EXPECT_EQ(reference_grid(8, 8, 3), (std::vector<std::size_t>{0}));
}

// ---------------------------------------------------------------------------
// shrinkage

TEST(Shrinkage, HardThresholdKeepsLargestAndNeverGrows) {
    auto       t    = random_tensor<cdouble, 3>({4, 4, 3}, 2);
    const auto orig = t;
    const auto kept = hard_threshold(t, 10.0); // above every magnitude
    EXPECT_EQ(kept, 1u);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_LE(std::abs(t.data()[i]), std::abs(orig.data()[i]));
        nonzero += t.data()[i] != cdouble{} ? 1 : 0;
    }
    EXPECT_EQ(nonzero, 1u);
}

TEST(Shrinkage, WienerFactorsAreBetweenZeroAndOne) {
    auto       t     = random_tensor<cdouble, 3>({4, 4, 3}, 3);
    const auto pilot = random_tensor<cdouble, 3>({4, 4, 3}, 4);
    const auto orig  = t;
    const double sumw2 = wiener_shrink(t, pilot, 0.7);
    double       check = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double p2 = std::norm(pilot.data()[i]);
        const double w  = p2 / (p2 + 0.49);
        EXPECT_NEAR(std::abs(t.data()[i] - w * orig.data()[i]), 0.0, 1e-15);
        EXPECT_LE(std::abs(t.data()[i]), std::abs(orig.data()[i]));
        check += w * w;
    }
    EXPECT_NEAR(sumw2, check, 1e-12);
}

// ---------------------------------------------------------------------------
// denoise_image

TEST(Cdbm3d, ZeroSigmaIsIdentity) {
    const auto img = random_image(20, 18, 9);
    for (auto variant : {HosvdVariant::Complex3D, HosvdVariant::ImRe4D}) {
        auto cfg    = small_config();
        cfg.variant = variant;
        const auto out = denoise_image(img, cfg);
        EXPECT_LT(max_abs_diff(out.data(), img.data()), 1e-10);
        EXPECT_EQ(out.rows(), img.rows());
        EXPECT_EQ(out.cols(), img.cols());
        const auto s1 = threshold_stage(img, cfg);
        EXPECT_LT(max_abs_diff(s1.data(), img.data()), 1e-10);
        EXPECT_LT(max_abs_diff(wiener_stage(img, img, cfg).data(), img.data()), 1e-10);
    }
}

TEST(Cdbm3d, RealImageZeroSigmaIsIdentity) {
    RealImage img(16, 16);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = std::sin(0.37 * static_cast<double>(i));
    const auto out = denoise_image(img, small_config());
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-10);
}

TEST(Cdbm3d, ConstantImageSurvivesThresholdStage) {
    const ComplexImage img(16, 16, cdouble(0.6, -0.8));
    for (double sigma : {0.1, 1.0, 5.0}) {
        auto cfg  = small_config();
        cfg.sigma = sigma;
        const auto out = threshold_stage(img, cfg);
        for (auto v : out.data()) EXPECT_LT(std::abs(v - img(0, 0)), 1e-10);
    }
}

TEST(Cdbm3d, ZeroPilotGivesZero) {
    const auto         img = random_image(16, 16, 2);
    const ComplexImage pilot(16, 16);
    auto               cfg = small_config();
    cfg.sigma              = 0.5;
    const auto out         = wiener_stage(img, pilot, cfg);
    for (auto v : out.data()) EXPECT_EQ(v, cdouble{});
}

TEST(Cdbm3d, ThreadCountDoesNotChangeBits) {
    const auto img = random_image(40, 36, 10);
    auto       cfg = small_config();
    cfg.sigma      = 0.4;
    cfg.threads    = 1;
    const auto a   = denoise_image(img, cfg);
    cfg.threads    = 3;
    const auto b   = denoise_image(img, cfg);
    EXPECT_EQ(a, b);
}

TEST(Cdbm3d, InvalidConfigIsRejected) {
    auto cfg       = small_config();
    cfg.patch_rows = 30;
    try {
        (void)denoise_image(random_image(16, 16, 1), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    }
}

TEST(Cdbm3d, TwoPeakSliceImproves) {
    const auto s   = two_peak_slice(1.3, 1);
    DenoiseConfig cfg;
    cfg.sigma      = 1.3;
    const double noisy = rrmse_phase(s.noisy, s.truth, 0);
    const double both  = slice_rrmse(denoise_image(s.noisy.slice(0), cfg), s.truth);
    cfg.stages         = FilterStages::ThresholdOnly;
    const double first = slice_rrmse(denoise_image(s.noisy.slice(0), cfg), s.truth);
    cfg.stages         = FilterStages::ThresholdPlusWiener;
    cfg.variant        = HosvdVariant::Complex3D;
    const double c3d   = slice_rrmse(denoise_image(s.noisy.slice(0), cfg), s.truth);
    EXPECT_LT(both, noisy);
    EXPECT_LT(c3d, noisy);
    EXPECT_LE(both, first);
}

TEST(Cdbm3d, LessNoiseNeverHurts) {
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {2.5, 1.3, 0.5}) {
        const auto    s = two_peak_slice(sigma, 3);
        DenoiseConfig cfg;
        cfg.sigma      = sigma;
        const double r = slice_rrmse(denoise_image(s.noisy.slice(0), cfg), s.truth);
        EXPECT_LE(r, prev) << "sigma " << sigma;
        prev = r;
    }
}

TEST(Cdbm3d, MadEstimatorRecoversSigma) {
    const ComplexImage flat(128, 128, cdouble(1.0, 0.0));
    ComplexCube        c(128, 128, {500.0});
    c.set_slice(0, flat);
    const auto noisy = add_noise(c, {0.8, 12});
    EXPECT_NEAR(estimate_sigma(noisy.slice(0)), 0.8, 0.05);
}

// ---------------------------------------------------------------------------
// cube filter

TEST(Ccf, ExactRankThreeCubePassesThrough) {
    const auto cube = rank_k_cube(24, 24, 10, 3, 31);
    const auto out  = ccf_denoise(cube, small_config());
    EXPECT_LE(rel_diff(out.data(), cube.data()), 1e-6);
    EXPECT_EQ(out.shape_string(), cube.shape_string());
}

TEST(Ccf, TwoPeakHalvesError) {
    const DispersionModel model;
    const auto truth = generate_truth(make_two_peak(64, 64, model), model, 64, 64, uniform_wavelengths(400.0, 798.0, 60));
    const auto noisy = add_noise(truth, {1.3, 1});
    const auto out   = ccf_denoise(noisy, DenoiseConfig{});
    EXPECT_LE(2.0 * mean_rrmse_phase(out, truth), mean_rrmse_phase(noisy, truth));
}

TEST(Ccf, PhaseEquivariance) {
    const auto    cube = add_noise(rank_k_cube(20, 20, 8, 2, 4), {0.3, 2});
    const cdouble c    = std::polar(1.0, 0.9);
    ComplexCube   rotated(cube.n_rows(), cube.n_cols(), cube.wavelengths());
    for (std::size_t i = 0; i < cube.data().size(); ++i) rotated.data()[i] = c * cube.data()[i];
    const auto a = ccf_denoise(cube, small_config());
    const auto b = ccf_denoise(rotated, small_config());
    double     err = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) err = std::max(err, std::abs(b.data()[i] - c * a.data()[i]));
    EXPECT_LT(err, 1e-8);
}

TEST(Ccf, WindowCentersAndExtents) {
    EXPECT_EQ(window_centers(200, 12).size(), 17u);
    EXPECT_EQ(window_centers(10, 3), (std::vector<std::size_t>{0, 3, 6, 9}));
    EXPECT_EQ(window_extent(100, 50, 11), (std::pair<std::size_t, std::size_t>{45, 11}));
    EXPECT_EQ(window_extent(100, 0, 11), (std::pair<std::size_t, std::size_t>{0, 6}));   // truncated
    EXPECT_EQ(window_extent(100, 99, 11), (std::pair<std::size_t, std::size_t>{94, 6})); // truncated
    EXPECT_EQ(window_extent(100, 99, 100), (std::pair<std::size_t, std::size_t>{0, 100}));
    EXPECT_EQ(window_extent(100, 40, 10), (std::pair<std::size_t, std::size_t>{36, 10}));
}

TEST(Ccf, SlidingPartitionsBands) {
    const auto cube = add_noise(rank_k_cube(16, 16, 23, 2, 6), {0.2, 1});
    const auto r    = ccf_sliding(cube, small_config(), {7, 5});
    ASSERT_EQ(r.windows.size(), 5u);
    std::vector<int> owner(23, 0);
    for (const auto& w : r.windows) {
        EXPECT_LE(w.p, w.n_bands);
        EXPECT_GE(w.owned_first, w.first_band);
        EXPECT_LE(w.owned_first + w.owned_count, w.first_band + w.n_bands);
        for (std::size_t b = w.owned_first; b < w.owned_first + w.owned_count; ++b) {
            ++owner[b];
            // Owned bands are nearest to this centre; ties go to the lower one.
            for (const auto& other : r.windows) {
                const auto d_self  = b > w.center ? b - w.center : w.center - b;
                const auto d_other = b > other.center ? b - other.center : other.center - b;
                EXPECT_TRUE(d_self < d_other || (d_self == d_other && w.center <= other.center));
            }
        }
    }
    EXPECT_TRUE(std::ranges::all_of(owner, [](int n) { return n == 1; }));
}

TEST(Ccf, OneWideWindowEqualsSingleRun) {
    const auto cube = add_noise(rank_k_cube(16, 16, 9, 2, 8), {0.3, 4});
    const auto one  = ccf_denoise(cube, small_config());
    const auto sl   = ccf_sliding(cube, small_config(), {9, 9});
    ASSERT_EQ(sl.windows.size(), 1u);
    EXPECT_EQ(sl.cube, one);
    const auto wide = ccf_sliding(cube, small_config(), {50, 40});
    EXPECT_EQ(wide.cube, one);
}

TEST(Ccf, TooFewBandsIsRejected) {
    try {
        (void)ccf_denoise(random_cube(8, 8, 2, 1), small_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewBands);
    }
}
