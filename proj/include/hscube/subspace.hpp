#pragma once

// Complex-domain signal-subspace identification by minimum error.
//
// Noise is estimated by regressing every band on all others; the eigenvectors
// of the data correlation matrix are then kept or dropped one at a time by
// comparing the signal power an eigen-direction carries against twice the
// noise power it would admit.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cube.hpp"

namespace hscube {

struct NoiseEstimate {
    RowMatrixXcd    noise;      // L x n residuals of the inter-band regression
    Eigen::MatrixXcd noise_corr; // (1/n) W Wᴴ
};

struct EigenBasis {
    Eigen::MatrixXcd    E;               // L x p, orthonormal columns
    std::size_t         p = 0;
    Eigen::MatrixXcd    noise_corr;      // L x L
    std::vector<double> eigen_noise_var; // eᵢᴴ R_n eᵢ, per selected column
    // eᵢᴴ diag(R_n) eᵢ: eigenimage noise under band-uncorrelated noise. The
    // regression residuals cancel along directions the signal dominates, so
    // the full R_n badly underestimates noise in the leading eigenimages.
    std::vector<double> eigenimage_noise_var;
    std::vector<double> signal_power;    // eᵢᴴ R_y eᵢ − eᵢᴴ R_n eᵢ, per selected column
    std::vector<double> eigenvalues;     // of R_y, descending
    // mse_curve[q] is the estimated reconstruction MSE when the q lowest-cost
    // directions are kept; q = 0 (empty subspace) is recorded but never chosen.
    std::vector<double> mse_curve;

    [[nodiscard]] std::size_t n_bands() const noexcept { return static_cast<std::size_t>(E.rows()); }
};

namespace detail {

inline constexpr double kRidgeScale     = 1e-10;
inline constexpr double kFallbackRidge  = 1e-6;

inline Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) { return (m + m.adjoint()) * 0.5; }

inline Eigen::MatrixXcd gram(const RowMatrixXcd& z) { return hermitian_part(z * z.adjoint()); }

inline bool solve_band(const Eigen::MatrixXcd& g, Eigen::Index i, double ridge, Eigen::VectorXcd& beta) {
    const Eigen::Index l = g.rows();
    Eigen::MatrixXcd   a(l - 1, l - 1);
    Eigen::VectorXcd   rhs(l - 1);
    for (Eigen::Index r = 0, rr = 0; r < l; ++r) {
        if (r == i) continue;
        rhs(rr) = g(r, i);
        for (Eigen::Index c = 0, cc = 0; c < l; ++c) {
            if (c == i) continue;
            a(rr, cc++) = g(r, c);
        }
        a(rr, rr) += ridge;
        ++rr;
    }
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        return false;
    }
    beta = ldlt.solve(rhs);
    return ldlt.info() == Eigen::Success && beta.allFinite();
}

} // namespace detail

/// Per-band least-squares regression on the remaining bands (ridge-regularised
/// normal equations). The residuals are the noise estimate.
[[nodiscard]] inline NoiseEstimate estimate_noise(const SpectralMatrix& z) {
    const auto l = static_cast<Eigen::Index>(z.n_bands());
    const auto n = static_cast<Eigen::Index>(z.n_pixels());
    if (l < 3) {
        throw Error(ErrorCode::TooFewBands, "need at least 3 bands, got " + std::to_string(l));
    }
    if (n <= l) {
        throw Error(ErrorCode::TooFewPixels, std::to_string(n) + " pixels cannot support regression on " + std::to_string(l) + " bands");
    }

    const Eigen::MatrixXcd g     = detail::gram(z.entries);
    const double           trace = g.diagonal().real().sum();
    NoiseEstimate          out;
    if (trace == 0.0) {
        out.noise      = RowMatrixXcd::Zero(l, n);
        out.noise_corr = Eigen::MatrixXcd::Zero(l, l);
        return out;
    }

    // Row i of `coef` holds the conjugated regression weights of band i.
    Eigen::MatrixXcd coef = Eigen::MatrixXcd::Zero(l, l);
    for (Eigen::Index i = 0; i < l; ++i) {
        Eigen::VectorXcd beta;
        if (!detail::solve_band(g, i, detail::kRidgeScale * trace / static_cast<double>(l), beta) &&
            !detail::solve_band(g, i, detail::kFallbackRidge * trace / static_cast<double>(l), beta)) {
            throw Error(ErrorCode::SingularRegression, "regression of band " + std::to_string(i) + " is singular");
        }
        for (Eigen::Index j = 0, jj = 0; j < l; ++j) {
            if (j == i) continue;
            coef(i, j) = std::conj(beta(jj++));
        }
    }

    out.noise      = z.entries - coef * z.entries;
    out.noise_corr = detail::gram(out.noise) / static_cast<double>(n);
    return out;
}

[[nodiscard]] inline EigenBasis identify_subspace(const SpectralMatrix& z) {
    const NoiseEstimate noise = estimate_noise(z);
    const auto          l     = static_cast<Eigen::Index>(z.n_bands());
    const auto          n     = static_cast<double>(z.n_pixels());

    const Eigen::MatrixXcd ry = detail::gram(z.entries) / n;
    const Eigen::MatrixXcd rn = noise.noise_corr;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(ry);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::DecompositionFailed, "eigendecomposition of the data correlation failed");
    }
    // Descending eigenvalue order.
    const Eigen::MatrixXcd vecs = eig.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd  vals = eig.eigenvalues().reverse();

    // A small noise floor keeps directions that carry only roundoff out of the subspace.
    const double floor = detail::kRidgeScale * ry.diagonal().real().sum() / static_cast<double>(l);

    std::vector<double> py(static_cast<std::size_t>(l));
    std::vector<double> pn(static_cast<std::size_t>(l));
    std::vector<double> cost(static_cast<std::size_t>(l));
    for (Eigen::Index i = 0; i < l; ++i) {
        const auto e = vecs.col(i);
        const auto k = static_cast<std::size_t>(i);
        py[k]        = (e.adjoint() * ry * e)(0).real();
        pn[k]        = std::max(0.0, (e.adjoint() * rn * e)(0).real());
        cost[k]      = -py[k] + 2.0 * (pn[k] + floor);
    }

    std::vector<std::size_t> order(static_cast<std::size_t>(l));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });

    EigenBasis basis;
    basis.mse_curve.resize(static_cast<std::size_t>(l) + 1);
    double mse = 0.0;
    for (std::size_t k = 0; k < py.size(); ++k) {
        mse += py[k] - pn[k] - floor;
    }
    basis.mse_curve[0] = mse;
    for (std::size_t q = 0; q < order.size(); ++q) {
        mse += cost[order[q]];
        basis.mse_curve[q + 1] = mse;
    }

    const auto negative = static_cast<std::size_t>(std::ranges::count_if(cost, [](double c) { return c < 0.0; }));
    basis.p             = std::max<std::size_t>(1, negative);

    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(basis.p));
    std::ranges::stable_sort(chosen, [&](std::size_t a, std::size_t b) { return py[a] - pn[a] > py[b] - pn[b]; });

    basis.E.resize(l, static_cast<Eigen::Index>(basis.p));
    for (std::size_t c = 0; c < chosen.size(); ++c) {
        basis.E.col(static_cast<Eigen::Index>(c)) = vecs.col(static_cast<Eigen::Index>(chosen[c]));
        basis.eigen_noise_var.push_back(pn[chosen[c]]);
        const auto e = vecs.col(static_cast<Eigen::Index>(chosen[c]));
        basis.eigenimage_noise_var.push_back((e.cwiseAbs2().transpose() * rn.diagonal().real())(0));
        basis.signal_power.push_back(py[chosen[c]] - pn[chosen[c]]);
    }
    basis.noise_corr = rn;
    basis.eigenvalues.assign(vals.data(), vals.data() + vals.size());
    return basis;
}

/// Eᴴ Z: one eigenimage per row.
[[nodiscard]] inline SpectralMatrix project(const SpectralMatrix& z, const EigenBasis& basis) {
    if (z.n_bands() != basis.n_bands()) {
        throw Error(ErrorCode::DimensionMismatch, "matrix has " + std::to_string(z.n_bands()) + " bands, basis expects " +
                                                      std::to_string(basis.n_bands()));
    }
    return {z.n_rows, z.n_cols, basis.E.adjoint() * z.entries};
}

/// E Zeig: back to band space.
[[nodiscard]] inline SpectralMatrix back_project(const SpectralMatrix& zeig, const EigenBasis& basis) {
    if (zeig.n_bands() != static_cast<std::size_t>(basis.E.cols())) {
        throw Error(ErrorCode::DimensionMismatch, "eigenimage count " + std::to_string(zeig.n_bands()) + " does not match p = " +
                                                      std::to_string(basis.E.cols()));
    }
    return {zeig.n_rows, zeig.n_cols, basis.E * zeig.entries};
}

} // namespace hscube
