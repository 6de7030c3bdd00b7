#pragma once

// Block-matching collaborative filter for complex (or real) 2D images.
//
// Two stages share one skeleton: for every reference patch on a strided grid,
// gather the most similar patches, take the HOSVD of the stacked group, shrink
// the core, invert, and aggregate the member patches with a per-group weight.
// Stage one hard-thresholds the core; stage two uses the stage-one output as
// a pilot for both matching and the transform, and applies Wiener shrinkage.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include "cube.hpp"
#include "hosvd.hpp"
#include "parallel.hpp"

namespace hscube {

enum class HosvdVariant { Complex3D, ImRe4D };
enum class FilterStages { ThresholdOnly, ThresholdPlusWiener };

struct DenoiseConfig {
    std::size_t  patch_rows            = 8;
    std::size_t  patch_cols            = 8;
    std::size_t  patch_step            = 3;
    std::size_t  search_radius         = 19;
    std::size_t  max_group_size        = 32;
    double       match_threshold       = std::numeric_limits<double>::infinity(); // mean squared distance per pixel
    double       hard_threshold_factor = 2.7;
    double       sigma                 = 0.0; // total std of the complex noise (std of the noise for real images)
    HosvdVariant variant               = HosvdVariant::ImRe4D;
    FilterStages stages                = FilterStages::ThresholdPlusWiener;
    unsigned     threads               = 0; // 0: HSCUBE_THREADS or 1

    void validate(std::size_t rows, std::size_t cols) const {
        if (patch_rows == 0 || patch_cols == 0 || patch_rows > rows || patch_cols > cols) {
            throw Error(ErrorCode::InvalidConfig, "patch " + std::to_string(patch_rows) + "x" + std::to_string(patch_cols) +
                                                      " does not fit a " + std::to_string(rows) + "x" + std::to_string(cols) + " image");
        }
        if (patch_step == 0 || max_group_size == 0) {
            throw Error(ErrorCode::InvalidConfig, "patch step and group size must be at least 1");
        }
        if (!(match_threshold >= 0.0) || !(hard_threshold_factor >= 0.0) || !(sigma >= 0.0) || !std::isfinite(sigma)) {
            throw Error(ErrorCode::InvalidConfig, "thresholds and sigma must be nonnegative");
        }
    }
};

struct PatchCoord {
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const PatchCoord&) const = default;
};

/// Matched patches; `members.front()` is the reference itself.
struct PatchGroup {
    PatchCoord              reference;
    std::vector<PatchCoord> members;
    std::vector<double>     distances; // mean squared difference per pixel, parallel to members
};

/// Top-left corners 0, step, 2·step, … with the last one moved to extent − patch
/// so the grid reaches the image edge.
[[nodiscard]] inline std::vector<std::size_t> reference_grid(std::size_t extent, std::size_t patch, std::size_t step) {
    std::vector<std::size_t> grid;
    const std::size_t        last = extent - patch;
    for (std::size_t p = 0; p <= last; p += step) {
        grid.push_back(p);
    }
    if (grid.back() != last) {
        grid.push_back(last);
    }
    return grid;
}

namespace detail {

template<typename Pixel>
double patch_sq_distance(const Image<Pixel>& img, PatchCoord a, PatchCoord b, std::size_t rows, std::size_t cols, double bail) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const Pixel* pa = &img(a.row + i, a.col);
        const Pixel* pb = &img(b.row + i, b.col);
        for (std::size_t j = 0; j < cols; ++j) {
            sum += std::norm(pa[j] - pb[j]);
        }
        if (sum > bail) {
            return sum;
        }
    }
    return sum;
}

} // namespace detail

template<typename Pixel>
[[nodiscard]] PatchGroup block_match(const Image<Pixel>& img, PatchCoord ref, const DenoiseConfig& cfg) {
    if (ref.row + cfg.patch_rows > img.rows() || ref.col + cfg.patch_cols > img.cols()) {
        throw Error(ErrorCode::OutOfBounds, "reference patch at (" + std::to_string(ref.row) + ", " + std::to_string(ref.col) + ") leaves the image");
    }
    const double      area   = static_cast<double>(cfg.patch_rows * cfg.patch_cols);
    const std::size_t r_lo   = ref.row > cfg.search_radius ? ref.row - cfg.search_radius : 0;
    const std::size_t c_lo   = ref.col > cfg.search_radius ? ref.col - cfg.search_radius : 0;
    const std::size_t r_hi   = std::min(img.rows() - cfg.patch_rows, ref.row + cfg.search_radius);
    const std::size_t c_hi   = std::min(img.cols() - cfg.patch_cols, ref.col + cfg.search_radius);
    const std::size_t others = cfg.max_group_size - 1;

    // Max-heap on (distance, row, col) holding the best non-reference candidates.
    using Entry = std::tuple<double, std::size_t, std::size_t>;
    std::priority_queue<Entry> best;
    const double               limit = cfg.match_threshold * area;

    if (others > 0) {
        for (std::size_t r = r_lo; r <= r_hi; ++r) {
            for (std::size_t c = c_lo; c <= c_hi; ++c) {
                if (r == ref.row && c == ref.col) {
                    continue;
                }
                const double bail = best.size() == others ? std::min(limit, std::get<0>(best.top())) : limit;
                const double d    = detail::patch_sq_distance(img, ref, {r, c}, cfg.patch_rows, cfg.patch_cols, bail);
                if (d > limit) {
                    continue;
                }
                Entry e{d, r, c};
                if (best.size() < others) {
                    best.push(e);
                } else if (e < best.top()) {
                    best.pop();
                    best.push(e);
                }
            }
        }
    }

    std::vector<Entry> sorted;
    sorted.reserve(best.size());
    while (!best.empty()) {
        sorted.push_back(best.top());
        best.pop();
    }
    std::ranges::reverse(sorted);

    PatchGroup group{ref, {ref}, {0.0}};
    for (const auto& [d, r, c] : sorted) {
        group.members.push_back({r, c});
        group.distances.push_back(d / area);
    }
    return group;
}

/// Zeroes coefficients with magnitude below `threshold`, always keeping the
/// largest one. Returns how many coefficients were kept.
template<typename S, std::size_t Rank>
std::size_t hard_threshold(Tensor<S, Rank>& core, double threshold) {
    auto        data    = core.data();
    std::size_t largest = 0;
    for (std::size_t i = 1; i < data.size(); ++i) {
        if (std::abs(data[i]) > std::abs(data[largest])) {
            largest = i;
        }
    }
    std::size_t kept = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (i != largest && std::abs(data[i]) < threshold) {
            data[i] = S{};
        } else {
            ++kept;
        }
    }
    return kept;
}

/// Scales each noisy coefficient by |p|²/(|p|² + σ²). Returns Σ w².
template<typename S, std::size_t Rank>
double wiener_shrink(Tensor<S, Rank>& noisy_core, const Tensor<S, Rank>& pilot_core, double sigma) {
    const double var = sigma * sigma;
    auto         out = noisy_core.data();
    auto         pil = pilot_core.data();
    double       sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double p2 = std::norm(pil[i]);
        const double w  = var == 0.0 ? 1.0 : p2 / (p2 + var);
        out[i] *= w;
        sum += w * w;
    }
    return sum;
}

namespace detail {

inline constexpr double kWienerWeightFloor = 1e-12;

template<typename Pixel>
Tensor<Pixel, 3> gather_group(const Image<Pixel>& img, const PatchGroup& group, const DenoiseConfig& cfg) {
    Tensor<Pixel, 3> t({cfg.patch_rows, cfg.patch_cols, group.members.size()});
    for (std::size_t k = 0; k < group.members.size(); ++k) {
        const auto& m = group.members[k];
        for (std::size_t j = 0; j < cfg.patch_cols; ++j) {
            for (std::size_t i = 0; i < cfg.patch_rows; ++i) {
                t(i, j, k) = img(m.row + i, m.col + j);
            }
        }
    }
    return t;
}

inline Tensor<double, 4> split_re_im(const Tensor<cdouble, 3>& t) {
    const auto        d = t.dims();
    Tensor<double, 4> out({d[0], d[1], d[2], 2});
    const std::size_t n = t.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.data()[i]     = t.data()[i].real();
        out.data()[i + n] = t.data()[i].imag();
    }
    return out;
}

inline Tensor<cdouble, 3> merge_re_im(const Tensor<double, 4>& t) {
    const auto         d = t.dims();
    Tensor<cdouble, 3> out({d[0], d[1], d[2]});
    const std::size_t  n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.data()[i] = {t.data()[i], t.data()[i + n]};
    }
    return out;
}

// Filters one group tensor in place; returns its aggregation weight.
template<typename S, std::size_t Rank>
double filter_tensor(Tensor<S, Rank>& noisy, const Tensor<S, Rank>* pilot, const DenoiseConfig& cfg) {
    if (pilot == nullptr) {
        auto              h    = hosvd(noisy);
        const std::size_t kept = hard_threshold(h.core, cfg.hard_threshold_factor * cfg.sigma);
        noisy                  = hosvd_inverse(h.core, h.factors);
        return 1.0 / static_cast<double>(std::max<std::size_t>(1, kept));
    }
    const auto   hp    = hosvd(*pilot);
    auto         core  = hosvd_forward(noisy, hp.factors);
    const double sumw2 = wiener_shrink(core, hp.core, cfg.sigma);
    noisy              = hosvd_inverse(core, hp.factors);
    return 1.0 / (cfg.sigma * cfg.sigma * sumw2 + kWienerWeightFloor);
}

template<typename Pixel>
double filter_group(Tensor<Pixel, 3>& noisy, const Tensor<Pixel, 3>* pilot, const DenoiseConfig& cfg) {
    if constexpr (is_complex_v<Pixel>) {
        if (cfg.variant == HosvdVariant::ImRe4D) {
            auto                             n4 = split_re_im(noisy);
            std::optional<Tensor<double, 4>> p4;
            if (pilot != nullptr) {
                p4 = split_re_im(*pilot);
            }
            const double w = filter_tensor(n4, p4 ? &*p4 : nullptr, cfg);
            noisy          = merge_re_im(n4);
            return w;
        }
    }
    return filter_tensor(noisy, pilot, cfg);
}

// Weighted sums for the pixel rows one reference row can touch.
template<typename Pixel>
struct RowAccumulator {
    std::size_t         first_row = 0;
    std::size_t         n_rows    = 0;
    std::size_t         n_cols    = 0;
    std::vector<Pixel>  num;
    std::vector<double> den;

    void add(const Tensor<Pixel, 3>& t, const std::vector<PatchCoord>& members, double weight) {
        const auto pr = t.dim(0);
        const auto pc = t.dim(1);
        for (std::size_t k = 0; k < members.size(); ++k) {
            for (std::size_t j = 0; j < pc; ++j) {
                for (std::size_t i = 0; i < pr; ++i) {
                    const std::size_t idx = (members[k].row + i - first_row) * n_cols + members[k].col + j;
                    num[idx] += weight * t(i, j, k);
                    den[idx] += weight;
                }
            }
        }
    }
};

template<typename Pixel>
Image<Pixel> run_stage(const Image<Pixel>& noisy, const Image<Pixel>* pilot, const DenoiseConfig& cfg) {
    cfg.validate(noisy.rows(), noisy.cols());
    if (pilot != nullptr && (pilot->rows() != noisy.rows() || pilot->cols() != noisy.cols())) {
        throw Error(ErrorCode::DimensionMismatch, "pilot and noisy image differ in shape");
    }
    const auto          grid_r   = reference_grid(noisy.rows(), cfg.patch_rows, cfg.patch_step);
    const auto          grid_c   = reference_grid(noisy.cols(), cfg.patch_cols, cfg.patch_step);
    const Image<Pixel>& matching = pilot != nullptr ? *pilot : noisy;
    const unsigned      threads  = resolve_threads(cfg.threads);

    std::vector<Pixel>  num(noisy.size(), Pixel{});
    std::vector<double> den(noisy.size(), 0.0);

    auto process_row = [&](std::size_t gi) {
        RowAccumulator<Pixel> acc;
        const std::size_t     ref_row = grid_r[gi];
        acc.first_row                 = ref_row > cfg.search_radius ? ref_row - cfg.search_radius : 0;
        const std::size_t end_row     = std::min(noisy.rows(), ref_row + cfg.search_radius + cfg.patch_rows);
        acc.n_rows                    = end_row - acc.first_row;
        acc.n_cols                    = noisy.cols();
        acc.num.assign(acc.n_rows * acc.n_cols, Pixel{});
        acc.den.assign(acc.n_rows * acc.n_cols, 0.0);
        for (std::size_t col : grid_c) {
            const PatchGroup group = block_match(matching, {ref_row, col}, cfg);
            auto             t     = gather_group(noisy, group, cfg);
            double           w     = 0.0;
            if (pilot != nullptr) {
                const auto tp = gather_group(*pilot, group, cfg);
                w             = filter_group(t, &tp, cfg);
            } else {
                w = filter_group<Pixel>(t, nullptr, cfg);
            }
            acc.add(t, group.members, w);
        }
        return acc;
    };

    // Rows are computed in waves and merged in grid order, so the sums do not
    // depend on the worker count.
    const std::size_t                  wave = std::max<std::size_t>(1, 2 * static_cast<std::size_t>(threads));
    std::vector<RowAccumulator<Pixel>> rows(wave);
    for (std::size_t start = 0; start < grid_r.size(); start += wave) {
        const std::size_t count = std::min(wave, grid_r.size() - start);
        parallel_for(count, threads, [&](std::size_t i) { rows[i] = process_row(start + i); });
        for (std::size_t i = 0; i < count; ++i) {
            const auto& acc = rows[i];
            for (std::size_t r = 0; r < acc.n_rows; ++r) {
                for (std::size_t c = 0; c < acc.n_cols; ++c) {
                    const std::size_t dst = (acc.first_row + r) * noisy.cols() + c;
                    num[dst] += acc.num[r * acc.n_cols + c];
                    den[dst] += acc.den[r * acc.n_cols + c];
                }
            }
        }
    }

    Image<Pixel> out(noisy.rows(), noisy.cols());
    for (std::size_t i = 0; i < num.size(); ++i) {
        out.data()[i] = num[i] / den[i];
    }
    return out;
}

} // namespace detail

/// Stage one: grouping, HOSVD, hard thresholding at τ_h·σ, aggregation.
template<typename Pixel>
[[nodiscard]] Image<Pixel> threshold_stage(const Image<Pixel>& image, const DenoiseConfig& cfg) {
    return detail::run_stage<Pixel>(image, nullptr, cfg);
}

/// Stage two: matching and transforms come from `pilot`; the noisy group is
/// Wiener-shrunk in the pilot's HOSVD basis.
template<typename Pixel>
[[nodiscard]] Image<Pixel> wiener_stage(const Image<Pixel>& image, const Image<Pixel>& pilot, const DenoiseConfig& cfg) {
    return detail::run_stage<Pixel>(image, &pilot, cfg);
}

template<typename Pixel>
[[nodiscard]] Image<Pixel> denoise_image(const Image<Pixel>& image, const DenoiseConfig& cfg) {
    Image<Pixel> pilot = threshold_stage(image, cfg);
    if (cfg.stages == FilterStages::ThresholdOnly) {
        return pilot;
    }
    return wiener_stage(image, pilot, cfg);
}

/// Noise level from the median absolute diagonal Haar detail over disjoint
/// 2x2 blocks. For complex images this is the total std (both components).
template<typename Pixel>
[[nodiscard]] double estimate_sigma(const Image<Pixel>& img) {
    std::vector<double> mags;
    for (std::size_t r = 0; r + 1 < img.rows(); r += 2) {
        for (std::size_t c = 0; c + 1 < img.cols(); c += 2) {
            const Pixel d = (img(r, c) - img(r, c + 1) - img(r + 1, c) + img(r + 1, c + 1)) * 0.5;
            if constexpr (is_complex_v<Pixel>) {
                mags.push_back(std::abs(d.real()));
                mags.push_back(std::abs(d.imag()));
            } else {
                mags.push_back(std::abs(d));
            }
        }
    }
    if (mags.empty()) {
        return 0.0;
    }
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    const double component = *mid / 0.6744897501960817;
    return is_complex_v<Pixel> ? component * std::numbers::sqrt2 : component;
}

[[nodiscard]] inline std::string to_string(HosvdVariant v) { return v == HosvdVariant::Complex3D ? "complex3d" : "imre4d"; }
[[nodiscard]] inline std::string to_string(FilterStages s) {
    return s == FilterStages::ThresholdOnly ? "threshold" : "threshold+wiener";
}

} // namespace hscube
