// Range-condition checks: moment and boundary-smoothness residuals for the
// channel functions, the analogous conditions for half sinograms, and the
// classical full-range conditions (symmetry + moments); residuals aggregate
// into a three-way verdict with a JSON report.
//
// Conventions. The assembled projections are F_l^m(p) = -2 R_l^m(-p) on
// p in [0,1]; derivative conditions on F at p = 0 therefore read off the
// stored derivatives of R at t = 0 with a (-1)^n chain-rule sign. Moment
// conditions apply for l > n with l + n even; smoothness conditions demand
// vanishing odd-order derivatives for even l and vanishing even-order
// derivatives (including the value) for odd l. All residuals are normalized
// per channel so that weak channels are not masked by strong ones.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "htrw/exterior.hpp"
#include "htrw/fd.hpp"
#include "htrw/forward.hpp"
#include "htrw/grids.hpp"
#include "htrw/special.hpp"

namespace htrw::range {

struct ResidualEntry {
    int l = 0;
    int m = 0;
    int n = 0;
    double value = 0.0;  // normalized, >= 0
};

struct ResidualTable {
    std::vector<ResidualEntry> entries;

    double worst() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.value);
        return w;
    }
};

namespace detail {

// Cubic Lagrange interpolation on a uniform grid (stencil clamped at the
// ends, so no ghost values are invented beyond the sample range).
inline double cubic_eval(const std::vector<double>& f, double h, double x) {
    const int n = static_cast<int>(f.size());
    if (n < 4) throw std::invalid_argument("cubic_eval: need at least 4 samples");
    const double u = x / h;
    int i0 = static_cast<int>(std::floor(u)) - 1;
    i0 = std::max(0, std::min(n - 4, i0));
    const double s = u - i0;
    // Lagrange basis on nodes {0,1,2,3}
    const double l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    const double l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    const double l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    const double l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    return f[i0] * l0 + f[i0 + 1] * l1 + f[i0 + 2] * l2 + f[i0 + 3] * l3;
}

// Gauss-Legendre rule on [0,1], cached per order.
inline const std::pair<std::vector<double>, std::vector<double>>& gl01(int order) {
    thread_local std::vector<std::pair<int, std::pair<std::vector<double>, std::vector<double>>>> cache;
    for (auto& e : cache)
        if (e.first == order) return e.second;
    std::vector<double> x, w;
    grids::detail::gauss_legendre(order, x, w);
    for (auto& v : x) v = 0.5 * (v + 1.0);
    for (auto& v : w) v *= 0.5;
    cache.push_back({order, {std::move(x), std::move(w)}});
    return cache.back().second;
}

// |int_0^1 f(-p) p^n dp| for f sampled uniformly on [-1,0] (f[0] at -1).
inline double half_moment(const std::vector<double>& f, int n) {
    const int nr = static_cast<int>(f.size());
    const double h = 1.0 / (nr - 1);
    const auto& [x, w] = gl01(64);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double tau = -x[i];  // f is sampled on [-1,0], offset from -1
        acc += w[i] * cubic_eval(f, h, tau + 1.0) * std::pow(x[i], n);
    }
    return std::abs(acc);
}

// Same moment for data sampled on [0,1] (g[0] at p = 0).
inline double half_moment_fwd(const std::vector<double>& g, int n) {
    const int np = static_cast<int>(g.size());
    const double h = 1.0 / (np - 1);
    const auto& [x, w] = gl01(64);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += w[i] * cubic_eval(g, h, x[i]) * std::pow(x[i], n);
    return std::abs(acc);
}

inline double sup_abs(const std::vector<double>& f) {
    double s = 0.0;
    for (double v : f) s = std::max(s, std::abs(v));
    return s;
}

// Projects a sinogram onto the real spherical harmonics of its own sphere
// grid: one coefficient series per (l,m), sampled on the sinogram's p-grid.
inline std::vector<std::vector<double>> project_channels(const forward::Sinogram& sino, int lmax) {
    const auto idx = special::harmonic_indices(sino.omegas.d, lmax);
    std::vector<std::vector<double>> F(idx.size(), std::vector<double>(sino.pgrid.n, 0.0));
    for (std::size_t i = 0; i < sino.omegas.nodes.size(); ++i) {
        const auto row = special::sph_harm_row(sino.omegas.d, lmax, sino.omegas.nodes[i]);
        for (std::size_t q = 0; q < idx.size(); ++q) {
            const double wy = sino.omegas.weights[i] * row[q];
            if (wy == 0.0) continue;
            for (int j = 0; j < sino.pgrid.n; ++j)
                F[q][j] += wy * sino.at(static_cast<int>(i), j);
        }
    }
    return F;
}

}  // namespace detail

// Moment conditions on the channel functions: int_0^1 R_l^m(-p) p^n dp = 0
// whenever l > n and l + n is even. Residuals are normalized by the channel
// sup plus a floor tied to the data magnitude.
inline ResidualTable moment_residuals(const exterior::ChannelFunctions& cf, int n_max = 8) {
    if (cf.n_r < 129) throw std::invalid_argument("moment_residuals: need at least 129 samples of R");
    const double eps_floor = 1e-12 * cf.b_norm;
    ResidualTable t;
    for (std::size_t q = 0; q < cf.idx.size(); ++q) {
        const int l = cf.idx[q].l;
        const double sup = detail::sup_abs(cf.r[q]);
        for (int n = 0; n <= n_max; ++n) {
            if (l <= n || (l + n) % 2 != 0) continue;
            const double raw = detail::half_moment(cf.r[q], n);
            t.entries.push_back({l, cf.idx[q].m, n, raw / (sup + eps_floor)});
        }
    }
    return t;
}

// Smoothness conditions at p = 0 on F_l^m(p) = -2 R_l^m(-p): for even l all
// odd-order derivatives vanish, for odd l all even-order derivatives
// (including the value). Uses the derivatives stored by channel_response;
// each residual is normalized by the sup of the same-order derivative over
// the whole interval, so the scale of differentiation cancels.
inline ResidualTable smoothness_residuals(const exterior::ChannelFunctions& cf, int deriv_max = 8) {
    if (deriv_max > cf.n_max)
        throw std::invalid_argument("smoothness_residuals: derivatives beyond the stored order");
    // Channels whose data is pure discretization noise (e.g. modes absent
    // from a symmetric phantom) would self-normalize that noise to O(1), so
    // each scale is floored by a small fraction of the largest scale at the
    // same order across channels.
    std::vector<double> floor_n(deriv_max + 1, 0.0);
    for (std::size_t q = 0; q < cf.idx.size(); ++q)
        for (int n = 0; n <= deriv_max; ++n)
            floor_n[n] = std::max(floor_n[n], 1e-6 * cf.deriv_scale[q][n]);
    ResidualTable t;
    for (std::size_t q = 0; q < cf.idx.size(); ++q) {
        const int l = cf.idx[q].l;
        for (int n = l % 2 == 0 ? 1 : 0; n <= deriv_max; n += 2) {
            // |d^n F(0)| = 2 |d^n R(0-)|; the chain-rule (-1)^n drops under | |
            const double raw = std::abs(cf.deriv0[q][n]);
            const double scale = std::max(cf.deriv_scale[q][n], floor_n[n]);
            t.entries.push_back({l, cf.idx[q].m, n, scale > 0.0 ? raw / scale : 0.0});
        }
    }
    return t;
}

// Classical full-range conditions for a sinogram on S x [-1,1]: evenness
// F(omega,p) = F(-omega,-p) and the moment conditions (the n-th p-moment is
// a polynomial of degree n in omega, i.e. orthogonal to Y_l^m for l > n).
// Residuals are raw (unnormalized); callers compare against a ||F|| scale.
struct FullRangeResiduals {
    double symmetry = 0.0;
    ResidualTable moments;
};

inline FullRangeResiduals radon_full_range_residuals(const forward::Sinogram& sino, int n_max = 8,
                                                     int lmax = 12) {
    const auto& sg = sino.omegas;
    const int np = sino.pgrid.n;
    if (np < 2 || std::abs(sino.pgrid.lo + sino.pgrid.hi) > 1e-12)
        throw std::invalid_argument("radon_full_range_residuals: p-grid must be symmetric about 0");
    // antipodal node map; the grid must close under omega -> -omega
    const std::size_t nth = sg.nodes.size();
    std::vector<int> anti(nth, -1);
    for (std::size_t i = 0; i < nth; ++i) {
        for (std::size_t j = 0; j < nth; ++j) {
            double dd = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double s = sg.nodes[i][c] + sg.nodes[j][c];
                dd += s * s;
            }
            if (dd < 1e-20) {
                anti[i] = static_cast<int>(j);
                break;
            }
        }
        if (anti[i] < 0)
            throw std::invalid_argument("radon_full_range_residuals: sphere grid has no antipodal map");
    }

    FullRangeResiduals out;
    for (std::size_t i = 0; i < nth; ++i)
        for (int j = 0; j < np; ++j)
            out.symmetry = std::max(out.symmetry, std::abs(sino.at(static_cast<int>(i), j) -
                                                           sino.at(anti[i], np - 1 - j)));

    // M_n(omega) by trapezoid (the integrand is smooth and supported inside),
    // then projection onto the harmonics of degree l > n.
    const double h = sino.pgrid.step();
    const auto idx = special::harmonic_indices(sg.d, lmax);
    std::vector<double> mn(nth);
    for (int n = 0; n <= n_max; ++n) {
        for (std::size_t i = 0; i < nth; ++i) {
            double acc = 0.0;
            for (int j = 0; j < np; ++j) {
                const double w = (j == 0 || j == np - 1) ? 0.5 : 1.0;
                acc += w * sino.at(static_cast<int>(i), j) * std::pow(sino.pgrid.at(j), n);
            }
            mn[i] = acc * h;
        }
        std::vector<double> proj(idx.size(), 0.0);
        for (std::size_t i = 0; i < nth; ++i) {
            const auto row = special::sph_harm_row(sg.d, lmax, sg.nodes[i]);
            for (std::size_t q = 0; q < idx.size(); ++q) proj[q] += sg.weights[i] * row[q] * mn[i];
        }
        for (std::size_t q = 0; q < idx.size(); ++q)
            if (idx[q].l > n)
                out.moments.entries.push_back({idx[q].l, idx[q].m, n, std::abs(proj[q])});
    }
    return out;
}

// Half-range conditions applied directly to a sinogram given on S x [0,1]
// (for data that did not come through the channel pipeline, so derivatives
// at p = 0 fall back to one-sided finite differences on the samples).
struct HalfRangeResiduals {
    ResidualTable moments;
    ResidualTable smoothness;
};

inline HalfRangeResiduals half_range_residuals(const forward::Sinogram& sino, int n_max = 8,
                                               int deriv_max = 8, int lmax = 12) {
    const int np = sino.pgrid.n;
    if (np < 129 || std::abs(sino.pgrid.lo) > 1e-12 || std::abs(sino.pgrid.hi - 1.0) > 1e-12)
        throw std::invalid_argument("half_range_residuals: p-grid must cover [0,1] with >= 129 samples");
    const auto idx = special::harmonic_indices(sino.omegas.d, lmax);
    const auto F = detail::project_channels(sino, lmax);
    double fmax = 0.0;
    for (const auto& f : F) fmax = std::max(fmax, detail::sup_abs(f));
    const double eps_floor = 1e-12 * fmax;

    HalfRangeResiduals out;
    const double h = sino.pgrid.step();
    const int stride = std::max(1, (np - 1) / 48);
    const int stencil = 12;
    for (std::size_t q = 0; q < idx.size(); ++q) {
        const int l = idx[q].l;
        const double sup = detail::sup_abs(F[q]);
        for (int n = 0; n <= n_max; ++n) {
            if (l <= n || (l + n) % 2 != 0) continue;
            const double raw = detail::half_moment_fwd(F[q], n);
            out.moments.entries.push_back({l, idx[q].m, n, raw / (sup + eps_floor)});
        }
        for (int n = l % 2 == 0 ? 1 : 0; n <= deriv_max; n += 2) {
            if (n == 0) {
                out.smoothness.entries.push_back({l, idx[q].m, 0, std::abs(F[q][0]) / (sup + eps_floor)});
                continue;
            }
            const auto dn = fd::strided_derivative(F[q], np, h, n, stencil, stride);
            const double scale = detail::sup_abs(dn) + eps_floor;
            out.smoothness.entries.push_back({l, idx[q].m, n, std::abs(dn[0]) / scale});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verdict and report.

struct RangeReport {
    int report_version = 1;
    int dimension = 0;
    int n_r = 0;
    int lmax = 0;
    int n_max = 0;
    int deriv_max = 0;
    ResidualTable moments;
    ResidualTable smoothness;
    double aggregate = 0.0;
    double theta_pass = 0.0;
    double theta_fail = 0.0;
    std::string verdict;  // "in-range" | "out-of-range" | "inconclusive"

    nlohmann::json to_json() const {
        auto table = [](const ResidualTable& t) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& e : t.entries)
                a.push_back({{"l", e.l}, {"m", e.m}, {"n", e.n}, {"value", e.value}});
            return a;
        };
        return nlohmann::json{
            {"report_version", report_version},
            {"dimension", dimension},
            {"grids", {{"n_r", n_r}, {"lmax", lmax}, {"n_max", n_max}, {"deriv_max", deriv_max}}},
            {"moment_residuals", table(moments)},
            {"smoothness_residuals", table(smoothness)},
            {"aggregate", aggregate},
            {"verdict", verdict},
            {"thresholds", {{"pass", theta_pass}, {"fail", theta_fail}}},
        };
    }
};

inline RangeReport verdict(ResidualTable moments, ResidualTable smoothness,
                           double theta_pass = 1e-3, double theta_fail = 1e-1) {
    if (!(theta_pass < theta_fail))
        throw std::invalid_argument("verdict: need theta_pass < theta_fail");
    RangeReport rep;
    rep.moments = std::move(moments);
    rep.smoothness = std::move(smoothness);
    rep.aggregate = std::max(rep.moments.worst(), rep.smoothness.worst());
    rep.theta_pass = theta_pass;
    rep.theta_fail = theta_fail;
    rep.verdict = rep.aggregate <= theta_pass   ? "in-range"
                  : rep.aggregate >= theta_fail ? "out-of-range"
                                                : "inconclusive";
    return rep;
}

// Convenience: full evaluation of the channel functions.
inline RangeReport check_channels(const exterior::ChannelFunctions& cf, int n_max = 8,
                                  int deriv_max = 8, double theta_pass = 1e-3,
                                  double theta_fail = 1e-1) {
    RangeReport rep = verdict(moment_residuals(cf, n_max), smoothness_residuals(cf, deriv_max),
                              theta_pass, theta_fail);
    rep.dimension = cf.d;
    rep.n_r = cf.n_r;
    rep.lmax = cf.lmax;
    rep.n_max = n_max;
    rep.deriv_max = deriv_max;
    return rep;
}

}  // namespace htrw::range
