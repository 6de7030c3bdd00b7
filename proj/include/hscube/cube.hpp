#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace hscube {

using cdouble = std::complex<double>;

/// Dense row-major 2D field. `x` is the column index, `y` the row index.
template<typename T>
class Image {
public:
    Image() = default;
    Image(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Image(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorCode::DimensionMismatch, "image payload does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] T&       operator()(std::size_t row, std::size_t col) noexcept { return data_[row * cols_ + col]; }
    [[nodiscard]] const T& operator()(std::size_t row, std::size_t col) const noexcept { return data_[row * cols_ + col]; }

    [[nodiscard]] std::span<T>       data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t    rows_ = 0;
    std::size_t    cols_ = 0;
    std::vector<T> data_;
};

using ComplexImage = Image<cdouble>;
using RealImage    = Image<double>;

/// Complex hyperspectral cube: `n_bands` images of `n_rows` x `n_cols`, one per
/// wavelength. Samples are stored band-major, then row, then column.
class ComplexCube {
public:
    ComplexCube() = default;

    ComplexCube(std::size_t n_rows, std::size_t n_cols, std::vector<double> wavelengths)
        : n_rows_(n_rows), n_cols_(n_cols), wavelengths_(std::move(wavelengths)),
          data_(n_rows * n_cols * wavelengths_.size()) {
        check_wavelengths();
    }

    ComplexCube(std::size_t n_rows, std::size_t n_cols, std::vector<double> wavelengths, std::vector<cdouble> data)
        : n_rows_(n_rows), n_cols_(n_cols), wavelengths_(std::move(wavelengths)), data_(std::move(data)) {
        check_wavelengths();
        if (data_.size() != n_rows_ * n_cols_ * wavelengths_.size()) {
            throw Error(ErrorCode::DimensionMismatch, "cube payload has " + std::to_string(data_.size()) + " samples, expected " +
                                                          std::to_string(n_rows_ * n_cols_ * wavelengths_.size()));
        }
        for (const auto& v : data_) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
                throw Error(ErrorCode::NonFiniteSample, "cube contains NaN or Inf");
            }
        }
    }

    [[nodiscard]] std::size_t n_rows() const noexcept { return n_rows_; }
    [[nodiscard]] std::size_t n_cols() const noexcept { return n_cols_; }
    [[nodiscard]] std::size_t n_bands() const noexcept { return wavelengths_.size(); }
    [[nodiscard]] std::size_t n_pixels() const noexcept { return n_rows_ * n_cols_; }

    [[nodiscard]] const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }

    [[nodiscard]] cdouble& operator()(std::size_t row, std::size_t col, std::size_t band) noexcept {
        return data_[(band * n_rows_ + row) * n_cols_ + col];
    }
    [[nodiscard]] const cdouble& operator()(std::size_t row, std::size_t col, std::size_t band) const noexcept {
        return data_[(band * n_rows_ + row) * n_cols_ + col];
    }

    [[nodiscard]] std::span<cdouble>       data() noexcept { return data_; }
    [[nodiscard]] std::span<const cdouble> data() const noexcept { return data_; }

    [[nodiscard]] std::span<cdouble> band(std::size_t b) noexcept { return {data_.data() + b * n_pixels(), n_pixels()}; }
    [[nodiscard]] std::span<const cdouble> band(std::size_t b) const noexcept {
        return {data_.data() + b * n_pixels(), n_pixels()};
    }

    [[nodiscard]] ComplexImage slice(std::size_t b) const {
        auto s = band(b);
        return ComplexImage(n_rows_, n_cols_, std::vector<cdouble>(s.begin(), s.end()));
    }

    void set_slice(std::size_t b, const ComplexImage& img) {
        if (img.rows() != n_rows_ || img.cols() != n_cols_) {
            throw Error(ErrorCode::DimensionMismatch, "slice shape does not match cube");
        }
        std::ranges::copy(img.data(), band(b).begin());
    }

    /// Bands [first, first + count) as a new cube.
    [[nodiscard]] ComplexCube sub_cube(std::size_t first, std::size_t count) const {
        if (first + count > n_bands() || count == 0) {
            throw Error(ErrorCode::OutOfBounds, "band range outside cube");
        }
        std::vector<double>  wl(wavelengths_.begin() + static_cast<std::ptrdiff_t>(first),
                                wavelengths_.begin() + static_cast<std::ptrdiff_t>(first + count));
        std::vector<cdouble> d(data_.begin() + static_cast<std::ptrdiff_t>(first * n_pixels()),
                               data_.begin() + static_cast<std::ptrdiff_t>((first + count) * n_pixels()));
        return ComplexCube(n_rows_, n_cols_, std::move(wl), std::move(d));
    }

    [[nodiscard]] std::string shape_string() const {
        return std::to_string(n_rows_) + "x" + std::to_string(n_cols_) + "x" + std::to_string(n_bands());
    }

    bool operator==(const ComplexCube&) const = default;

private:
    void check_wavelengths() const {
        for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
            if (!std::isfinite(wavelengths_[i])) {
                throw Error(ErrorCode::NonMonotoneWavelengths, "wavelength is not finite");
            }
            if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1])) {
                throw Error(ErrorCode::NonMonotoneWavelengths, "wavelengths must be strictly increasing");
            }
        }
    }

    std::size_t          n_rows_ = 0;
    std::size_t          n_cols_ = 0;
    std::vector<double>  wavelengths_;
    std::vector<cdouble> data_;
};

using RowMatrixXcd = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bands x pixels matrix. Keeps the spatial dims so the cube can be rebuilt.
struct SpectralMatrix {
    std::size_t  n_rows = 0;
    std::size_t  n_cols = 0;
    RowMatrixXcd entries;

    [[nodiscard]] std::size_t n_bands() const noexcept { return static_cast<std::size_t>(entries.rows()); }
    [[nodiscard]] std::size_t n_pixels() const noexcept { return static_cast<std::size_t>(entries.cols()); }

    [[nodiscard]] ComplexImage row_image(std::size_t b) const {
        ComplexImage img(n_rows, n_cols);
        std::copy_n(entries.row(static_cast<Eigen::Index>(b)).data(), n_rows * n_cols, img.data().begin());
        return img;
    }

    void set_row_image(std::size_t b, const ComplexImage& img) {
        std::ranges::copy(img.data(), entries.row(static_cast<Eigen::Index>(b)).data());
    }
};

[[nodiscard]] inline SpectralMatrix reshape_to_matrix(const ComplexCube& cube) {
    SpectralMatrix m{cube.n_rows(), cube.n_cols(),
                     RowMatrixXcd(static_cast<Eigen::Index>(cube.n_bands()), static_cast<Eigen::Index>(cube.n_pixels()))};
    std::ranges::copy(cube.data(), m.entries.data());
    return m;
}

/// Inverse of reshape_to_matrix. The wavelength grid is not part of the
/// matrix, so the caller supplies it; by default bands are numbered 0..L-1.
[[nodiscard]] inline ComplexCube reshape_to_cube(const SpectralMatrix& mat, std::vector<double> wavelengths = {}) {
    if (mat.n_pixels() != mat.n_rows * mat.n_cols) {
        throw Error(ErrorCode::DimensionMismatch, "matrix has " + std::to_string(mat.n_pixels()) + " pixel columns but dims " +
                                                      std::to_string(mat.n_rows) + "x" + std::to_string(mat.n_cols));
    }
    if (wavelengths.empty()) {
        wavelengths.resize(mat.n_bands());
        for (std::size_t i = 0; i < wavelengths.size(); ++i) {
            wavelengths[i] = static_cast<double>(i);
        }
    }
    if (wavelengths.size() != mat.n_bands()) {
        throw Error(ErrorCode::DimensionMismatch, "wavelength count does not match matrix rows");
    }
    std::vector<cdouble> data(mat.entries.data(), mat.entries.data() + mat.entries.size());
    return ComplexCube(mat.n_rows, mat.n_cols, std::move(wavelengths), std::move(data));
}

/// Uniform grid of `count` wavelengths from `first_nm` to `last_nm` inclusive.
[[nodiscard]] inline std::vector<double> uniform_wavelengths(double first_nm, double last_nm, std::size_t count) {
    std::vector<double> wl(count);
    for (std::size_t i = 0; i < count; ++i) {
        wl[i] = count == 1 ? first_nm : first_nm + (last_nm - first_nm) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return wl;
}

} // namespace hscube
