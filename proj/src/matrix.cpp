#include "multibal/matrix.hpp"

#include "multibal/errors.hpp"

#include <cmath>

namespace multibal {

Matrix gather_rows(const Matrix &source, std::span<const int> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < source.rows(), ErrorKind::shape, "gather_rows: row index out of range");
        out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
    }
    return out;
}

void scatter_add_rows(Matrix &dest, std::span<const int> rows, const Matrix &values) {
    require(values.rows() == static_cast<Eigen::Index>(rows.size()) && values.cols() == dest.cols(),
            ErrorKind::shape, "scatter_add_rows: shape mismatch");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        dest.row(rows[i]) += values.row(static_cast<Eigen::Index>(i));
    }
}

bool all_finite(const Matrix &m) {
    return m.allFinite();
}

std::string shape_string(const Matrix &m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace multibal
