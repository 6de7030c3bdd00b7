#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "cube.hpp"
#include "synth.hpp"

namespace hscube {

namespace detail {

inline void require_same_shape(const ComplexCube& a, const ComplexCube& b) {
    if (a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() || a.n_bands() != b.n_bands()) {
        throw Error(ErrorCode::DimensionMismatch, "cube shapes differ: " + a.shape_string() + " vs " + b.shape_string());
    }
}

} // namespace detail

/// ‖φ_est − φ_true‖ / ‖φ_true‖ over one band. Both phases are taken in
/// [−π, π) and their difference is wrapped before the norm.
[[nodiscard]] inline double rrmse_phase(const ComplexCube& est, const ComplexCube& truth, std::size_t band) {
    detail::require_same_shape(est, truth);
    if (band >= truth.n_bands()) {
        throw Error(ErrorCode::OutOfBounds, "band " + std::to_string(band) + " outside cube");
    }
    const auto e   = est.band(band);
    const auto t   = truth.band(band);
    double     err = 0.0;
    double     ref = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double pt = wrap_phase(std::arg(t[i]));
        const double d  = wrap_phase(wrap_phase(std::arg(e[i])) - pt);
        err += d * d;
        ref += pt * pt;
    }
    if (ref == 0.0) {
        throw Error(ErrorCode::ZeroReference, "true phase of band " + std::to_string(band) + " is identically zero");
    }
    return std::sqrt(err) / std::sqrt(ref);
}

[[nodiscard]] inline double rrmse_amplitude(const ComplexCube& est, const ComplexCube& truth, std::size_t band) {
    detail::require_same_shape(est, truth);
    const auto e   = est.band(band);
    const auto t   = truth.band(band);
    double     err = 0.0;
    double     ref = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double d = std::abs(e[i]) - std::abs(t[i]);
        err += d * d;
        ref += std::norm(t[i]);
    }
    if (ref == 0.0) {
        throw Error(ErrorCode::ZeroReference, "true amplitude of band " + std::to_string(band) + " is identically zero");
    }
    return std::sqrt(err) / std::sqrt(ref);
}

[[nodiscard]] inline std::vector<double> rrmse_phase_per_band(const ComplexCube& est, const ComplexCube& truth) {
    std::vector<double> out(truth.n_bands());
    for (std::size_t b = 0; b < out.size(); ++b) {
        out[b] = rrmse_phase(est, truth, b);
    }
    return out;
}

[[nodiscard]] inline double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

[[nodiscard]] inline double mean_rrmse_phase(const ComplexCube& est, const ComplexCube& truth) {
    return mean(rrmse_phase_per_band(est, truth));
}

namespace detail {

inline double snr_of(std::span<const cdouble> noisy, std::span<const cdouble> truth) {
    double signal = 0.0;
    double noise  = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        signal += std::norm(truth[i]);
        noise += std::norm(noisy[i] - truth[i]);
    }
    if (noise == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(signal / noise);
}

} // namespace detail

/// 10·log10(‖truth‖² / ‖noisy − truth‖²) over the whole cube; +∞ when noiseless.
[[nodiscard]] inline double snr_db(const ComplexCube& noisy, const ComplexCube& truth) {
    detail::require_same_shape(noisy, truth);
    return detail::snr_of(noisy.data(), truth.data());
}

[[nodiscard]] inline double snr_db(const ComplexCube& noisy, const ComplexCube& truth, std::size_t band) {
    detail::require_same_shape(noisy, truth);
    return detail::snr_of(noisy.band(band), truth.band(band));
}

} // namespace hscube
