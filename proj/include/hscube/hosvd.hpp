#pragma once

#include <array>

#include "tensor.hpp"

namespace hscube {

/// Full (untruncated) HOSVD: one unitary factor per mode, columns ordered by
/// decreasing singular value, and the core G ×₁ U₁ᴴ ×₂ U₂ᴴ ….
template<typename T, std::size_t Rank>
struct HosvdFactors {
    std::array<DynMatrix<T>, Rank> factors;
    Tensor<T, Rank>                core;
};

/// Left singular vectors of an unfolding, from the eigenvectors of its Gram matrix.
template<typename T>
[[nodiscard]] DynMatrix<T> left_singular_basis(const DynMatrix<T>& gram) {
    const DynMatrix<T> h = (gram + gram.adjoint()) * 0.5;
    if (h.rows() == 1) {
        return DynMatrix<T>::Identity(1, 1);
    }
    Eigen::SelfAdjointEigenSolver<DynMatrix<T>> eig(h);
    if (eig.info() != Eigen::Success || !eig.eigenvectors().allFinite()) {
        throw Error(ErrorCode::DecompositionFailed, "mode eigendecomposition failed");
    }
    return eig.eigenvectors().rowwise().reverse();
}

/// Contracts `t` with the conjugate transpose of each factor.
template<typename T, std::size_t Rank>
[[nodiscard]] Tensor<T, Rank> hosvd_forward(const Tensor<T, Rank>& t, const std::array<DynMatrix<T>, Rank>& factors) {
    Tensor<T, Rank> core = t;
    for (std::size_t m = 0; m < Rank; ++m) {
        core = mode_product(core, m, DynMatrix<T>(factors[m].adjoint()));
    }
    return core;
}

template<typename T, std::size_t Rank>
[[nodiscard]] Tensor<T, Rank> hosvd_inverse(const Tensor<T, Rank>& core, const std::array<DynMatrix<T>, Rank>& factors) {
    Tensor<T, Rank> t = core;
    for (std::size_t m = 0; m < Rank; ++m) {
        t = mode_product(t, m, factors[m]);
    }
    return t;
}

template<typename T, std::size_t Rank>
[[nodiscard]] HosvdFactors<T, Rank> hosvd(const Tensor<T, Rank>& t) {
    if (t.size() == 0) {
        throw Error(ErrorCode::DecompositionFailed, "empty tensor");
    }
    HosvdFactors<T, Rank> out;
    for (std::size_t m = 0; m < Rank; ++m) {
        out.factors[m] = left_singular_basis<T>(unfolding_gram(t, m));
    }
    out.core = hosvd_forward(t, out.factors);
    return out;
}

} // namespace hscube
