#include "detsift/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace detsift {

SymEigen jacobi_eigen_sym(std::span<const double> matrix, int n) {
    if (n <= 0 || matrix.size() != static_cast<size_t>(n) * n)
        throw std::invalid_argument("jacobi_eigen_sym: bad dimensions");

    std::vector<double> a(matrix.begin(), matrix.end());
    std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[size_t(i) * n + i] = 1.0;

    auto A = [&](int r, int c) -> double& { return a[size_t(r) * n + c]; };
    auto V = [&](int r, int c) -> double& { return v[size_t(r) * n + c]; };

    double norm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) norm += A(i, j) * A(i, j);
    norm = std::sqrt(norm);
    const double tol = norm > 0.0 ? norm * 1e-15 : 0.0;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (std::sqrt(2.0 * off) <= tol) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = A(p, p), aqq = A(q, q);
                A(p, p) = app - t * apq;
                A(q, q) = aqq + t * apq;
                A(p, q) = 0.0;
                A(q, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = akp - s * (akq + tau * akp);
                    A(p, k) = A(k, p);
                    A(k, q) = akq + s * (akp - tau * akq);
                    A(q, k) = A(k, q);
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = vkp - s * (vkq + tau * vkp);
                    V(k, q) = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        return A(i, i) > A(j, j);  // stable: equal values keep original index order
    });

    SymEigen result;
    result.n = n;
    result.values.resize(n);
    result.vectors.resize(static_cast<size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
        const int col = order[k];
        result.values[k] = A(col, col);
        int arg = 0;
        double best = -1.0;
        for (int r = 0; r < n; ++r) {
            const double m = std::abs(V(r, col));
            if (m > best) {
                best = m;
                arg = r;
            }
        }
        const double sign = V(arg, col) < 0.0 ? -1.0 : 1.0;
        for (int r = 0; r < n; ++r) result.vectors[size_t(k) * n + r] = sign * V(r, col);
    }
    return result;
}

}  // namespace detsift
