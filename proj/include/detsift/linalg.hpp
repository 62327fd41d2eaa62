#pragma once

#include <span>
#include <vector>

namespace detsift {

/// Eigen-decomposition of a dense symmetric matrix, eigenvalues descending.
/// Ties keep the lower original diagonal index first; each eigenvector's
/// largest-magnitude entry is made positive (ties to the lower index), so the
/// decomposition is fully deterministic.
struct SymEigen {
    int n = 0;
    std::vector<double> values;   // size n, descending
    std::vector<double> vectors;  // row-major, row k = eigenvector for values[k]
};

/// Cyclic Jacobi rotations on a row-major symmetric matrix (upper triangle
/// read). Deterministic sweep order; converges to machine precision.
SymEigen jacobi_eigen_sym(std::span<const double> matrix, int n);

}  // namespace detsift
