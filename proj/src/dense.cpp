#include "pipad/dense.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pipad/binary_io.hpp"
#include "pipad/errors.hpp"

namespace pipad {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows * cols) {
        throw ArgumentError("dense matrix data size does not match its shape");
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n)
{
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
}

double max_relative_error(const DenseMatrix& a, const DenseMatrix& b, double floor)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ArgumentError("max_relative_error: shape mismatch");
    }
    double worst = 0.0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double x = da[i];
        const double y = db[i];
        const double scale = std::max({std::abs(x), std::abs(y), floor});
        worst = std::max(worst, std::abs(x - y) / scale);
    }
    return worst;
}

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return a.size() == 0 ||
           std::memcmp(a.data().data(), b.data().data(), a.bytes()) == 0;
}

namespace io {

std::vector<char> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    write_file(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace io
}  // namespace pipad
