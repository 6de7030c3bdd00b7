#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace hscube {

template<typename T>
struct is_complex : std::false_type {};
template<typename T>
struct is_complex<std::complex<T>> : std::true_type {};

template<typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

template<typename T>
[[nodiscard]] constexpr T conj_if_complex(const T& v) noexcept {
    if constexpr (is_complex_v<T>) {
        return std::conj(v);
    } else {
        return v;
    }
}

/// Dense tensor, first index fastest (column-major generalisation).
template<typename T, std::size_t Rank>
class Tensor {
public:
    using value_type = T;
    using Dims       = std::array<std::size_t, Rank>;

    Tensor() = default;
    explicit Tensor(const Dims& dims, T fill = T{}) : dims_(dims), data_(count(dims), fill) {}

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t dim(std::size_t mode) const noexcept { return dims_[mode]; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] std::span<T>       data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

    template<typename... Idx>
        requires(sizeof...(Idx) == Rank)
    [[nodiscard]] T& operator()(Idx... idx) noexcept {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }
    template<typename... Idx>
        requires(sizeof...(Idx) == Rank)
    [[nodiscard]] const T& operator()(Idx... idx) const noexcept {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    [[nodiscard]] double frobenius_norm() const noexcept {
        double s = 0.0;
        for (const auto& v : data_) {
            s += std::norm(v);
        }
        return std::sqrt(s);
    }

    /// Product of the extents of the modes before `mode`.
    [[nodiscard]] std::size_t prefix(std::size_t mode) const noexcept {
        std::size_t p = 1;
        for (std::size_t m = 0; m < mode; ++m) p *= dims_[m];
        return p;
    }
    [[nodiscard]] std::size_t suffix(std::size_t mode) const noexcept {
        std::size_t s = 1;
        for (std::size_t m = mode + 1; m < Rank; ++m) s *= dims_[m];
        return s;
    }

    bool operator==(const Tensor&) const = default;

private:
    static std::size_t count(const Dims& d) { return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>{}); }

    [[nodiscard]] std::size_t offset(const Dims& idx) const noexcept {
        std::size_t off    = 0;
        std::size_t stride = 1;
        for (std::size_t m = 0; m < Rank; ++m) {
            off += idx[m] * stride;
            stride *= dims_[m];
        }
        return off;
    }

    Dims           dims_{};
    std::vector<T> data_;
};

template<typename T>
using DynMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// out = in ×_mode M, i.e. out[.., j, ..] = Σ_i M(j, i) in[.., i, ..].
template<typename T, std::size_t Rank>
[[nodiscard]] Tensor<T, Rank> mode_product(const Tensor<T, Rank>& in, std::size_t mode, const DynMatrix<T>& m) {
    if (static_cast<std::size_t>(m.cols()) != in.dim(mode)) {
        throw Error(ErrorCode::DimensionMismatch, "mode product: matrix width does not match tensor mode");
    }
    auto dims  = in.dims();
    dims[mode] = static_cast<std::size_t>(m.rows());
    Tensor<T, Rank> out(dims);

    const auto pre = static_cast<Eigen::Index>(in.prefix(mode));
    const auto suf = in.suffix(mode);
    const auto ni  = static_cast<Eigen::Index>(in.dim(mode));
    const auto nj  = m.rows();
    using CMap     = Eigen::Map<const DynMatrix<T>>;
    using MMap     = Eigen::Map<DynMatrix<T>>;
    for (std::size_t s = 0; s < suf; ++s) {
        CMap x(in.data().data() + s * static_cast<std::size_t>(pre * ni), pre, ni);
        MMap y(out.data().data() + s * static_cast<std::size_t>(pre * nj), pre, nj);
        y.noalias() = x * m.transpose();
    }
    return out;
}

/// Gram matrix A Aᴴ of the mode-`mode` unfolding A.
template<typename T, std::size_t Rank>
[[nodiscard]] DynMatrix<T> unfolding_gram(const Tensor<T, Rank>& t, std::size_t mode) {
    const auto pre = static_cast<Eigen::Index>(t.prefix(mode));
    const auto suf = t.suffix(mode);
    const auto ni  = static_cast<Eigen::Index>(t.dim(mode));
    using CMap     = Eigen::Map<const DynMatrix<T>>;
    if (pre == 1) {
        CMap a(t.data().data(), ni, static_cast<Eigen::Index>(suf));
        return a * a.adjoint();
    }
    // Each slab x_s (pre x ni) contributes x_sᵀ conj(x_s).
    DynMatrix<T> g = DynMatrix<T>::Zero(ni, ni);
    for (std::size_t s = 0; s < suf; ++s) {
        CMap x(t.data().data() + s * static_cast<std::size_t>(pre * ni), pre, ni);
        g.noalias() += x.transpose() * x.conjugate();
    }
    return g;
}

} // namespace hscube
