// Finite-difference weight generation (Fornberg's recurrence): weights for
// the m-th derivative at point x0 from samples at arbitrary nodes. Used for
// the boundary-derivative estimates behind the smooth time extension and for
// one-sided differentiation of sampled channel data.
#pragma once

#include <stdexcept>
#include <vector>

namespace htrw::fd {

// Weights w such that f^(m)(x0) ~ sum_i w[i] f(nodes[i]).
inline std::vector<double> fornberg_weights(double x0, const std::vector<double>& nodes, int m) {
    const int n = static_cast<int>(nodes.size());
    if (m < 0 || m >= n) throw std::invalid_argument("fornberg_weights: need more nodes than the derivative order");
    // c[k][j]: weight of node j for the k-th derivative, built incrementally
    std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
    c[0][0] = 1.0;
    double c1 = 1.0;
    std::vector<double> old_col(m + 1);
    for (int j = 1; j < n; ++j) {
        double c2 = 1.0;
        const double xj = nodes[j];
        // Weights of the newly added node derive from the previous node's
        // column as it stood before this sweep, so snapshot it first.
        for (int k = 0; k <= m; ++k) old_col[k] = c[k][j - 1];
        for (int v = 0; v < j; ++v) {
            const double xv = nodes[v];
            const double c3 = xj - xv;
            c2 *= c3;
            for (int k = std::min(j, m); k >= 0; --k) {
                const double prev = k > 0 ? c[k - 1][v] : 0.0;
                c[k][v] = ((xj - x0) * c[k][v] - k * prev) / c3;
            }
        }
        for (int k = std::min(j, m); k >= 0; --k) {
            const double prev = k > 0 ? old_col[k - 1] : 0.0;
            c[k][j] = (c1 / c2) * (k * prev - (nodes[j - 1] - x0) * old_col[k]);
        }
        c1 = c2;
    }
    return c[m];
}

// n-th derivative of uniformly sampled data (np samples, step h) at every
// sample, using m-point stencils on a strided subgrid. The stride keeps the
// stencil wide enough that roundoff noise (amplified as (stride*h)^-n) stays
// below truncation; stencils are centered where possible and shifted one-sided
// near the ends. Weights are cached per stencil offset.
inline std::vector<double> strided_derivative(const std::vector<double>& f, int np, double h,
                                              int n, int m, int stride) {
    if (np > static_cast<int>(f.size())) throw std::invalid_argument("strided_derivative: np exceeds data");
    if (stride < 1 || (m - 1) * stride > np - 1)
        throw std::invalid_argument("strided_derivative: stencil does not fit the window");
    std::vector<double> out(np, 0.0);
    std::vector<std::vector<double>> cache((m / 2) * stride * 2 + 1);
    for (int k = 0; k < np; ++k) {
        int j0 = k - (m / 2) * stride;
        if (j0 < 0) j0 = 0;
        if (j0 > np - 1 - (m - 1) * stride) j0 = np - 1 - (m - 1) * stride;
        const int shift = k - j0;
        if (cache[shift].empty()) {
            std::vector<double> nodes(m);
            for (int i = 0; i < m; ++i) nodes[i] = (i * stride - shift) * h;
            cache[shift] = fornberg_weights(0.0, nodes, n);
        }
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += cache[shift][i] * f[j0 + i * stride];
        out[k] = s;
    }
    return out;
}

}  // namespace htrw::fd
