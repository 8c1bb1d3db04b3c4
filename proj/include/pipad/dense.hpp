#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pipad {

/// Row-major dense matrix of 32-bit reals.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t bytes() const noexcept { return data_.size() * sizeof(float); }

    float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const
    {
        return data_[r * cols_ + c];
    }

    std::span<float> row(std::size_t r)
    {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<const float> row(std::size_t r) const
    {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    static DenseMatrix identity(std::size_t n);

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Largest elementwise |a - b| / max(|a|, |b|, floor); shapes must match.
double max_relative_error(const DenseMatrix& a, const DenseMatrix& b,
                          double floor = 1e-30);

/// True when both matrices have the same shape and identical bit patterns.
bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace pipad
