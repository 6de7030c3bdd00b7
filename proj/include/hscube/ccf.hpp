#pragma once

// Complex-domain cube filter: reshape to bands x pixels, identify the signal
// subspace, filter each eigenimage with the block-matching filter at its own
// noise level, and map back to every band.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "cdbm3d.hpp"
#include "subspace.hpp"

namespace hscube {

/// Spectral window of `width` bands around a centre band; centres advance by `step`.
struct WindowSpec {
    std::size_t width = 70;
    std::size_t step  = 12;
};

/// Bookkeeping for one CCF invocation.
struct WindowRun {
    std::size_t         center      = 0; // band index
    std::size_t         first_band  = 0; // window extent [first_band, first_band + n_bands)
    std::size_t         n_bands     = 0;
    std::size_t         owned_first = 0; // bands whose output came from this run
    std::size_t         owned_count = 0;
    std::size_t         p           = 0;
    std::vector<double> eigen_sigma;
    double              seconds = 0.0;
};

struct CcfResult {
    ComplexCube            cube;
    std::vector<WindowRun> windows;
};

/// Bands covered by a window of `width` centred on `center`, truncated at the
/// cube edges. A window at least as wide as the cube covers all of it.
[[nodiscard]] inline std::pair<std::size_t, std::size_t> window_extent(std::size_t n_bands, std::size_t center, std::size_t width) {
    if (width == 0 || center >= n_bands) {
        throw Error(ErrorCode::InvalidConfig, "window must be nonempty and centred inside the cube");
    }
    if (width >= n_bands) {
        return {0, n_bands};
    }
    const std::size_t half  = (width - 1) / 2;
    const std::size_t first = center > half ? center - half : 0;
    const std::size_t last  = std::min(n_bands, center + (width - half));
    return {first, last - first};
}

/// Centres 0, step, 2·step, …, one per block of `step` bands.
[[nodiscard]] inline std::vector<std::size_t> window_centers(std::size_t n_bands, std::size_t step) {
    if (step == 0 || n_bands == 0) {
        throw Error(ErrorCode::InvalidConfig, "window step must be at least 1");
    }
    std::vector<std::size_t> centers;
    for (std::size_t c = 0; c < n_bands; c += step) {
        centers.push_back(std::min(c, n_bands - 1));
    }
    return centers;
}

/// Single CCF run over all bands of `cube`.
[[nodiscard]] inline CcfResult ccf_denoise_detailed(const ComplexCube& cube, const DenoiseConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    if (cube.n_bands() < 3) {
        throw Error(ErrorCode::TooFewBands, "CCF needs at least 3 bands, cube is " + cube.shape_string());
    }
    const SpectralMatrix z     = reshape_to_matrix(cube);
    const EigenBasis     basis = identify_subspace(z);
    SpectralMatrix       eig   = project(z, basis);

    WindowRun run;
    run.center  = cube.n_bands() / 2;
    run.n_bands = run.owned_count = cube.n_bands();
    run.p                         = basis.p;
    for (std::size_t i = 0; i < basis.p; ++i) {
        DenoiseConfig local = cfg;
        local.sigma         = std::sqrt(basis.eigenimage_noise_var[i]);
        run.eigen_sigma.push_back(local.sigma);
        eig.set_row_image(i, denoise_image(eig.row_image(i), local));
    }
    CcfResult result{reshape_to_cube(back_project(eig, basis), cube.wavelengths()), {}};
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.windows.push_back(std::move(run));
    return result;
}

[[nodiscard]] inline ComplexCube ccf_denoise(const ComplexCube& cube, const DenoiseConfig& cfg) {
    return ccf_denoise_detailed(cube, cfg).cube;
}

/// CCF over the window centred on `center`; only the centre band is meaningful
/// to callers that study window width.
[[nodiscard]] inline CcfResult ccf_window(const ComplexCube& cube, const DenoiseConfig& cfg, std::size_t center, std::size_t width) {
    const auto [first, count] = window_extent(cube.n_bands(), center, width);
    CcfResult r               = ccf_denoise_detailed(cube.sub_cube(first, count), cfg);
    auto&     run             = r.windows.front();
    run.center                = center;
    run.first_band            = first;
    run.owned_first           = center;
    run.owned_count           = 1;
    return r;
}

/// Sliding-window CCF. Each band is taken from the run whose centre is nearest
/// (ties go to the lower centre), so every band is written exactly once.
[[nodiscard]] inline CcfResult ccf_sliding(const ComplexCube& cube, const DenoiseConfig& cfg, const WindowSpec& window) {
    const std::size_t n_bands = cube.n_bands();
    const auto        centers = window_centers(n_bands, window.step);

    CcfResult out{ComplexCube(cube.n_rows(), cube.n_cols(), cube.wavelengths()), {}};
    for (std::size_t k = 0; k < centers.size(); ++k) {
        const std::size_t owned_first = k == 0 ? 0 : (centers[k - 1] + centers[k]) / 2 + 1;
        const std::size_t owned_end   = k + 1 == centers.size() ? n_bands : (centers[k] + centers[k + 1]) / 2 + 1;

        const auto [first, count] = window_extent(n_bands, centers[k], window.width);
        CcfResult part            = ccf_denoise_detailed(cube.sub_cube(first, count), cfg);
        for (std::size_t b = owned_first; b < owned_end; ++b) {
            const auto src = part.cube.band(b - first);
            std::ranges::copy(src, out.cube.band(b).begin());
        }
        WindowRun run   = std::move(part.windows.front());
        run.center      = centers[k];
        run.first_band  = first;
        run.n_bands     = count;
        run.owned_first = owned_first;
        run.owned_count = owned_end - owned_first;
        out.windows.push_back(std::move(run));
    }
    return out;
}

} // namespace hscube
