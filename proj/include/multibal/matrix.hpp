#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace multibal {

// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

Matrix gather_rows(const Matrix &source, std::span<const int> rows);

// dest.row(rows[i]) += values.row(i)
void scatter_add_rows(Matrix &dest, std::span<const int> rows, const Matrix &values);

bool all_finite(const Matrix &m);

std::string shape_string(const Matrix &m);

}  // namespace multibal
