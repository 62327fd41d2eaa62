#include <doctest.h>

#include <cmath>
#include <vector>

#include "detsift/geom.hpp"
#include "detsift/linalg.hpp"

using namespace detsift;

TEST_CASE("jacobi recovers a known diagonalizable matrix") {
    // A = Q diag(5, 2) Q^T with Q a 45-degree rotation.
    const double c = std::sqrt(0.5);
    const double q[2][2] = {{c, -c}, {c, c}};
    const double lam[2] = {5.0, 2.0};
    std::vector<double> a(4, 0.0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) a[size_t(i) * 2 + j] += q[i][k] * lam[k] * q[j][k];

    const SymEigen eig = jacobi_eigen_sym(a, 2);
    CHECK(eig.values[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(eig.values[1] == doctest::Approx(2.0).epsilon(1e-12));
    // Eigenvector for 5 is (c, c) up to sign; sign convention makes it positive.
    CHECK(eig.vectors[0] == doctest::Approx(c).epsilon(1e-10));
    CHECK(eig.vectors[1] == doctest::Approx(c).epsilon(1e-10));
}

TEST_CASE("jacobi eigenvectors satisfy A v = lambda v") {
    SplitMix64 rng(5);
    const int n = 12;
    std::vector<double> a(size_t(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = double(rng.next() >> 11) / 9007199254740992.0 - 0.5;
            a[size_t(i) * n + j] = v;
            a[size_t(j) * n + i] = v;
        }
    const SymEigen eig = jacobi_eigen_sym(a, n);
    for (int k = 0; k < n; ++k) {
        for (int r = 0; r < n; ++r) {
            double av = 0.0;
            for (int c = 0; c < n; ++c)
                av += a[size_t(r) * n + c] * eig.vectors[size_t(k) * n + c];
            CHECK(av == doctest::Approx(eig.values[k] * eig.vectors[size_t(k) * n + r])
                            .epsilon(1e-9)
                            .scale(1.0));
        }
    }
    for (int k = 1; k < n; ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
}

TEST_CASE("jacobi is deterministic") {
    std::vector<double> a = {4, 1, 0.5, 1, 3, 0.25, 0.5, 0.25, 2};
    const SymEigen e1 = jacobi_eigen_sym(a, 3);
    const SymEigen e2 = jacobi_eigen_sym(a, 3);
    CHECK(e1.values == e2.values);
    CHECK(e1.vectors == e2.vectors);
}
