#include "gluscope/matrix.hpp"

#include "gluscope/errors.hpp"

namespace gluscope {

Vector Matrix::column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
    if (m.cols() != x.size()) {
        throw ContractError("matvec: matrix has " + std::to_string(m.cols()) + " columns, vector has " +
                            std::to_string(x.size()) + " entries");
    }
    Vector y(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
    return y;
}

} // namespace gluscope
