#pragma once

// Comparators for the cube filter: thickness averaging over bands, separate
// amplitude/phase filtering, and the complex block-matching filter applied to
// every band on its own.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cdbm3d.hpp"
#include "cube.hpp"
#include "synth.hpp"

namespace hscube {

enum class AverageMode { Global, Pairwise };

[[nodiscard]] inline std::string to_string(AverageMode m) { return m == AverageMode::Global ? "global" : "pairwise"; }

[[nodiscard]] inline AverageMode parse_average_mode(const std::string& name) {
    if (name == "global") return AverageMode::Global;
    if (name == "pairwise") return AverageMode::Pairwise;
    throw Error(ErrorCode::InvalidConfig, "unknown average mode '" + name + "'");
}

/// Per pixel, converts each band's wrapped phase to thickness, averages the
/// thickness over all bands (global) or over consecutive band pairs
/// (pairwise), and re-synthesises the phases. Amplitudes pass through.
[[nodiscard]] inline ComplexCube baseline_average(const ComplexCube& noisy, const std::optional<DispersionModel>& model, AverageMode mode) {
    if (!model) {
        throw Error(ErrorCode::DispersionRequired, "thickness averaging needs a dispersion model");
    }
    const std::size_t   n_bands = noisy.n_bands();
    std::vector<double> to_thickness(n_bands);
    for (std::size_t b = 0; b < n_bands; ++b) {
        const double lambda_um = noisy.wavelengths()[b] * 1e-3;
        to_thickness[b]        = lambda_um / (2.0 * std::numbers::pi * (refractive_index(*model, noisy.wavelengths()[b]) - 1.0));
    }

    // Groups of bands that share one thickness estimate. An odd trailing band
    // joins the last pair.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    if (mode == AverageMode::Global || n_bands < 2) {
        groups.emplace_back(0, n_bands);
    } else {
        for (std::size_t b = 0; b + 1 < n_bands; b += 2) {
            groups.emplace_back(b, b + 2 + (b + 3 == n_bands ? 1 : 0));
        }
    }

    ComplexCube out(noisy.n_rows(), noisy.n_cols(), noisy.wavelengths());
    for (std::size_t r = 0; r < noisy.n_rows(); ++r) {
        for (std::size_t c = 0; c < noisy.n_cols(); ++c) {
            for (const auto& [first, last] : groups) {
                double h = 0.0;
                for (std::size_t b = first; b < last; ++b) {
                    h += wrap_phase(std::arg(noisy(r, c, b))) * to_thickness[b];
                }
                h /= static_cast<double>(last - first);
                for (std::size_t b = first; b < last; ++b) {
                    out(r, c, b) = std::polar(std::abs(noisy(r, c, b)), h / to_thickness[b]);
                }
            }
        }
    }
    return out;
}

/// Filters amplitude and wrapped phase of every band as two independent real
/// images. `sigma` is the total std of the complex noise; the amplitude sees
/// σ/√2. Wrapped phase noise is far from Gaussian at low SNR, so its level is
/// estimated from the image itself.
[[nodiscard]] inline ComplexCube baseline_separate(const ComplexCube& noisy, const DenoiseConfig& cfg) {
    ComplexCube out(noisy.n_rows(), noisy.n_cols(), noisy.wavelengths());
    for (std::size_t b = 0; b < noisy.n_bands(); ++b) {
        const auto band = noisy.band(b);
        RealImage  amp(noisy.n_rows(), noisy.n_cols());
        RealImage  phase(noisy.n_rows(), noisy.n_cols());
        for (std::size_t i = 0; i < band.size(); ++i) {
            amp.data()[i]   = std::abs(band[i]);
            phase.data()[i] = wrap_phase(std::arg(band[i]));
        }

        DenoiseConfig amp_cfg   = cfg;
        amp_cfg.sigma           = cfg.sigma / std::numbers::sqrt2;
        DenoiseConfig phase_cfg = cfg;
        phase_cfg.sigma         = cfg.sigma == 0.0 ? 0.0 : estimate_sigma(phase);

        const RealImage a = denoise_image(amp, amp_cfg);
        const RealImage p = denoise_image(phase, phase_cfg);
        auto            o = out.band(b);
        for (std::size_t i = 0; i < o.size(); ++i) {
            o[i] = std::polar(std::max(0.0, a.data()[i]), p.data()[i]);
        }
    }
    return out;
}

/// The complex block-matching filter on each band independently.
[[nodiscard]] inline ComplexCube cdbm3d_per_slice(const ComplexCube& noisy, const DenoiseConfig& cfg) {
    ComplexCube out(noisy.n_rows(), noisy.n_cols(), noisy.wavelengths());
    for (std::size_t b = 0; b < noisy.n_bands(); ++b) {
        out.set_slice(b, denoise_image(noisy.slice(b), cfg));
    }
    return out;
}

} // namespace hscube
