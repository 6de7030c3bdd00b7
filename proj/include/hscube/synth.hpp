#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cube.hpp"

namespace hscube {

/// Cauchy dispersion n(λ) = A0 + B0/λ² + C0/λ⁴ with λ in micrometres.
/// Defaults are the usual two-term BK7 values.
struct DispersionModel {
    double a0 = 1.5046;
    double b0 = 0.00420; // µm²
    double c0 = 0.0;     // µm⁴
};

[[nodiscard]] inline double refractive_index(const DispersionModel& model, double lambda_nm) {
    if (!(lambda_nm > 0.0)) {
        throw Error(ErrorCode::NonPositiveWavelength, "wavelength must be positive, got " + std::to_string(lambda_nm));
    }
    const double l2 = (lambda_nm * 1e-3) * (lambda_nm * 1e-3);
    return model.a0 + model.b0 / l2 + model.c0 / (l2 * l2);
}

/// Wraps to the half-open interval [-π, π).
[[nodiscard]] inline double wrap_phase(double phi) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double           r      = phi - two_pi * std::floor((phi + std::numbers::pi) / two_pi);
    if (r >= std::numbers::pi) {
        r -= two_pi;
    } else if (r < -std::numbers::pi) {
        r += two_pi;
    }
    return r;
}

enum class PhaseObjectKind { TwoPeak, Compound, WrappedPeak };

/// Thickness maps are in micrometres. TwoPeak and WrappedPeak carry one map;
/// Compound carries three, switched at `section_fractions` of the band axis.
struct PhaseObjectSpec {
    PhaseObjectKind        kind = PhaseObjectKind::TwoPeak;
    std::vector<RealImage> thickness;
    std::array<double, 2>  section_fractions{1.0 / 3.0, 2.0 / 3.0};
    RealImage              amplitude; // empty means unit amplitude

    [[nodiscard]] std::size_t rows() const { return thickness.empty() ? 0 : thickness.front().rows(); }
    [[nodiscard]] std::size_t cols() const { return thickness.empty() ? 0 : thickness.front().cols(); }

    [[nodiscard]] std::size_t section_of(std::size_t band, std::size_t n_bands) const {
        if (kind != PhaseObjectKind::Compound) {
            return 0;
        }
        const double pos = static_cast<double>(band);
        const double n   = static_cast<double>(n_bands);
        if (pos < std::floor(section_fractions[0] * n)) {
            return 0;
        }
        return pos < std::floor(section_fractions[1] * n) ? 1 : 2;
    }

    void validate() const {
        const std::size_t expected = kind == PhaseObjectKind::Compound ? 3 : 1;
        if (thickness.size() != expected) {
            throw Error(ErrorCode::InvalidConfig, "phase object needs " + std::to_string(expected) + " thickness map(s)");
        }
        for (const auto& map : thickness) {
            if (map.rows() != rows() || map.cols() != cols()) {
                throw Error(ErrorCode::DimensionMismatch, "thickness maps differ in shape");
            }
            for (double h : map.data()) {
                if (!std::isfinite(h) || h < 0.0) {
                    throw Error(ErrorCode::InvalidConfig, "thickness must be finite and nonnegative");
                }
            }
        }
        if (!(section_fractions[0] > 0.0 && section_fractions[0] < section_fractions[1] && section_fractions[1] < 1.0)) {
            throw Error(ErrorCode::InvalidConfig, "compound sections must be ordered inside (0, 1)");
        }
        if (amplitude.size() != 0 && (amplitude.rows() != rows() || amplitude.cols() != cols())) {
            throw Error(ErrorCode::DimensionMismatch, "amplitude map shape differs from thickness");
        }
    }
};

/// Absolute phase 2π·h·(n−1)/λ in radians.
[[nodiscard]] inline double phase_at(const PhaseObjectSpec& spec, const DispersionModel& model, std::size_t row, std::size_t col,
                                     double lambda_nm, std::size_t section = 0) {
    if (section >= spec.thickness.size() || row >= spec.rows() || col >= spec.cols()) {
        throw Error(ErrorCode::OutOfBounds, "pixel (" + std::to_string(row) + ", " + std::to_string(col) + ") outside object");
    }
    const double n = refractive_index(model, lambda_nm);
    return 2.0 * std::numbers::pi * spec.thickness[section](row, col) * (n - 1.0) / (lambda_nm * 1e-3);
}

/// Thickness (µm) that produces `phase` radians at `lambda_nm`.
[[nodiscard]] inline double thickness_for_phase(const DispersionModel& model, double phase, double lambda_nm) {
    const double n = refractive_index(model, lambda_nm);
    return phase * (lambda_nm * 1e-3) / (2.0 * std::numbers::pi * (n - 1.0));
}

namespace detail {

inline void scale_to_peak(RealImage& map, double peak) {
    const double mx = *std::ranges::max_element(map.data());
    if (mx > 0.0) {
        for (double& v : map.data()) {
            v *= peak / mx;
        }
    }
}

inline double gauss(double dr, double dc, double width) { return std::exp(-(dr * dr + dc * dc) / (2.0 * width * width)); }

// Three bars along one axis followed by three along the other, at a ladder of
// shrinking scales, in the spirit of a USAF-1951 chart.
inline RealImage usaf_bars(std::size_t rows, std::size_t cols) {
    RealImage   map(rows, cols, 0.0);
    const auto  dim    = static_cast<double>(std::min(rows, cols));
    double      bar    = std::max(1.0, std::floor(dim / 14.0));
    std::size_t r0     = static_cast<std::size_t>(dim / 16.0);
    std::size_t c0     = r0;
    const auto  paint  = [&](std::size_t r, std::size_t c, std::size_t h, std::size_t w) {
        for (std::size_t i = r; i < std::min(rows, r + h); ++i) {
            for (std::size_t j = c; j < std::min(cols, c + w); ++j) {
                map(i, j) = 1.0;
            }
        }
    };
    while (bar >= 1.0) {
        const auto w    = static_cast<std::size_t>(bar);
        const auto span = 5 * w;
        if (c0 + 2 * span + w > cols) {
            c0 = static_cast<std::size_t>(dim / 16.0);
            r0 += span + 2 * w;
        }
        if (r0 + span > rows) {
            break;
        }
        for (std::size_t k = 0; k < 3; ++k) {
            paint(r0, c0 + 2 * k * w, span, w);          // vertical bars
            paint(r0 + 2 * k * w, c0 + span + w, w, span); // horizontal bars
        }
        c0 += 2 * span + 2 * w;
        if (bar == 1.0) {
            break;
        }
        bar = std::max(1.0, std::floor(bar / 1.26));
    }
    return map;
}

} // namespace detail

inline constexpr double kDefaultInterferometricPeak = 0.9 * std::numbers::pi;
inline constexpr double kDefaultWrappedPeak         = 28.9;
inline constexpr double kCalibrationWavelength      = 400.0;

/// Two Gaussian bumps; the summed peak reaches `max_phase_400` radians at 400 nm,
/// which is the largest phase across the visible grid for a normal-dispersion glass.
[[nodiscard]] inline PhaseObjectSpec make_two_peak(std::size_t rows, std::size_t cols, const DispersionModel& model,
                                                   double max_phase_400 = kDefaultInterferometricPeak) {
    RealImage  map(rows, cols);
    const auto dim = static_cast<double>(std::min(rows, cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double y = static_cast<double>(r);
            const double x = static_cast<double>(c);
            map(r, c)      = detail::gauss(y - 0.36 * static_cast<double>(rows), x - 0.34 * static_cast<double>(cols), 0.22 * dim) +
                        0.75 * detail::gauss(y - 0.68 * static_cast<double>(rows), x - 0.66 * static_cast<double>(cols), 0.16 * dim);
        }
    }
    detail::scale_to_peak(map, thickness_for_phase(model, max_phase_400, kCalibrationWavelength));
    return {PhaseObjectKind::TwoPeak, {std::move(map)}, {1.0 / 3.0, 2.0 / 3.0}, {}};
}

/// Truncated Gaussian whose absolute phase reaches `max_phase_400` at 400 nm at
/// the centre pixel; used for the wrapped-phase experiments.
[[nodiscard]] inline PhaseObjectSpec make_wrapped_peak(std::size_t rows, std::size_t cols, const DispersionModel& model,
                                                       double max_phase_400 = kDefaultWrappedPeak) {
    RealImage    map(rows, cols);
    const auto   dim    = static_cast<double>(std::min(rows, cols));
    const double width  = 0.3 * dim;
    const double radius = 0.5 * dim;
    const double floor  = std::exp(-radius * radius / (2.0 * width * width));
    const auto   cr     = static_cast<double>(rows / 2);
    const auto   cc     = static_cast<double>(cols / 2);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double g = detail::gauss(static_cast<double>(r) - cr, static_cast<double>(c) - cc, width);
            map(r, c)      = std::max(0.0, (g - floor) / (1.0 - floor));
        }
    }
    detail::scale_to_peak(map, thickness_for_phase(model, max_phase_400, kCalibrationWavelength));
    return {PhaseObjectKind::WrappedPeak, {std::move(map)}, {1.0 / 3.0, 2.0 / 3.0}, {}};
}

/// Three unrelated interferometric sections along the band axis: a binary bar
/// chart, a Gaussian peak, and a tilted plane with one step discontinuity.
[[nodiscard]] inline PhaseObjectSpec make_compound(std::size_t rows, std::size_t cols, const DispersionModel& model,
                                                   double max_phase_400 = kDefaultInterferometricPeak) {
    const double peak = thickness_for_phase(model, max_phase_400, kCalibrationWavelength);
    const auto   dim  = static_cast<double>(std::min(rows, cols));

    RealImage bars = detail::usaf_bars(rows, cols);
    detail::scale_to_peak(bars, peak);

    RealImage bump(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            bump(r, c) = detail::gauss(static_cast<double>(r) - 0.5 * static_cast<double>(rows),
                                       static_cast<double>(c) - 0.5 * static_cast<double>(cols), 0.2 * dim);
        }
    }
    detail::scale_to_peak(bump, peak);

    RealImage ramp(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double t = (static_cast<double>(r) + static_cast<double>(c)) / static_cast<double>(rows + cols - 2);
            ramp(r, c)     = c < cols / 2 ? t : t - 0.4;
        }
    }
    const double lo = *std::ranges::min_element(ramp.data());
    for (double& v : ramp.data()) {
        v -= lo;
    }
    detail::scale_to_peak(ramp, peak);

    return {PhaseObjectKind::Compound, {std::move(bars), std::move(bump), std::move(ramp)}, {1.0 / 3.0, 2.0 / 3.0}, {}};
}

/// U = A·exp(jφ_λ) on the given wavelength grid.
[[nodiscard]] inline ComplexCube generate_truth(const PhaseObjectSpec& spec, const DispersionModel& model, std::size_t rows, std::size_t cols,
                                                std::vector<double> wavelengths) {
    spec.validate();
    if (rows != spec.rows() || cols != spec.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "requested " + std::to_string(rows) + "x" + std::to_string(cols) + " but object is " +
                                                      std::to_string(spec.rows()) + "x" + std::to_string(spec.cols()));
    }
    ComplexCube       cube(rows, cols, std::move(wavelengths));
    const std::size_t n_bands = cube.n_bands();
    for (std::size_t b = 0; b < n_bands; ++b) {
        const std::size_t section = spec.section_of(b, n_bands);
        const double      lambda  = cube.wavelengths()[b];
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double amp = spec.amplitude.size() == 0 ? 1.0 : spec.amplitude(r, c);
                cube(r, c, b)    = std::polar(amp, phase_at(spec, model, r, c, lambda, section));
            }
        }
    }
    return cube;
}

/// Circular complex Gaussian noise; `sigma` is the total standard deviation,
/// so each of the real and imaginary parts has variance σ²/2.
struct NoiseSpec {
    double        sigma = 0.0;
    std::uint64_t seed  = 0;
};

/// Each band draws from its own stream keyed by (seed, band), so the result
/// does not depend on the order in which bands are generated.
[[nodiscard]] inline ComplexCube add_noise(const ComplexCube& cube, const NoiseSpec& noise) {
    if (!std::isfinite(noise.sigma) || noise.sigma < 0.0) {
        throw Error(ErrorCode::InvalidConfig, "noise sigma must be finite and nonnegative");
    }
    ComplexCube out = cube;
    if (noise.sigma == 0.0) {
        return out;
    }
    const double component_sd = noise.sigma / std::numbers::sqrt2;
    for (std::size_t b = 0; b < out.n_bands(); ++b) {
        std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                          static_cast<std::uint32_t>(b), 0x43485343u};
        std::mt19937_64                  rng(seq);
        std::normal_distribution<double> normal(0.0, component_sd);
        for (auto& v : out.band(b)) {
            const double re = normal(rng);
            const double im = normal(rng);
            v += cdouble(re, im);
        }
    }
    return out;
}

[[nodiscard]] inline std::string to_string(PhaseObjectKind kind) {
    switch (kind) {
    case PhaseObjectKind::TwoPeak: return "two-peak";
    case PhaseObjectKind::Compound: return "compound";
    case PhaseObjectKind::WrappedPeak: return "wrapped";
    }
    return "unknown";
}

[[nodiscard]] inline PhaseObjectKind parse_object_kind(const std::string& name) {
    if (name == "two-peak") return PhaseObjectKind::TwoPeak;
    if (name == "compound") return PhaseObjectKind::Compound;
    if (name == "wrapped") return PhaseObjectKind::WrappedPeak;
    throw Error(ErrorCode::InvalidConfig, "unknown object kind '" + name + "'");
}

[[nodiscard]] inline PhaseObjectSpec make_object(PhaseObjectKind kind, std::size_t rows, std::size_t cols, const DispersionModel& model,
                                                 double max_phase_400) {
    switch (kind) {
    case PhaseObjectKind::TwoPeak: return make_two_peak(rows, cols, model, max_phase_400);
    case PhaseObjectKind::Compound: return make_compound(rows, cols, model, max_phase_400);
    case PhaseObjectKind::WrappedPeak: return make_wrapped_peak(rows, cols, model, max_phase_400);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown object kind");
}

[[nodiscard]] inline double default_peak_phase(PhaseObjectKind kind) {
    return kind == PhaseObjectKind::WrappedPeak ? kDefaultWrappedPeak : kDefaultInterferometricPeak;
}

} // namespace hscube
