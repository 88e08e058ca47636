#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace enhope {

/// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Labels = std::vector<int>;

/// Copy the listed rows of `source` into a new matrix, preserving order.
inline Matrix gather_rows(const Matrix& source, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

inline Labels gather_labels(const Labels& source, const std::vector<std::size_t>& rows) {
    Labels out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(source[r]);
    return out;
}

} // namespace enhope
