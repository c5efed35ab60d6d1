// Forward models: analytic phantoms (sums of C-infinity radial bumps),
// spherical means, the observation map phantom -> boundary wave data on the
// cylinder (0,1] x S for d in {2,3}, the full Radon transform of a phantom,
// and the d'Alembert projection combination used by reconstruction.
//
// Phantoms are kept analytic on purpose: every integral here has a
// low-dimensional quadrature oracle, so the test suites can separate forward
// modeling error from grid/interpolation error.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "htrw/grids.hpp"

namespace htrw::forward {

using grids::BoundaryData;
using grids::SphereGrid;
using grids::TimeGrid;
using special::kPi;

// ---------------------------------------------------------------------------
// Phantom.

struct Bump {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    double rho = 0.1;
    double a = 1.0;
};

struct Phantom {
    int d = 3;
    std::vector<Bump> bumps;

    // max over bumps of |c| + rho; must stay < 1 for a valid phantom
    double support_radius() const {
        double r = 0.0;
        for (const auto& b : bumps) {
            const double cn = std::sqrt(b.c[0] * b.c[0] + b.c[1] * b.c[1] + b.c[2] * b.c[2]);
            r = std::max(r, cn + b.rho);
        }
        return r;
    }
};

inline Phantom make_phantom(int d, std::vector<Bump> bumps) {
    if (d != 2 && d != 3) throw std::invalid_argument("make_phantom: d must be 2 or 3");
    Phantom ph{d, std::move(bumps)};
    for (const auto& b : ph.bumps) {
        if (!(b.rho > 0.0)) throw std::invalid_argument("make_phantom: bump radius must be positive");
        const double cn = std::sqrt(b.c[0] * b.c[0] + b.c[1] * b.c[1] + b.c[2] * b.c[2]);
        if (!(cn + b.rho < 1.0))
            throw std::invalid_argument("make_phantom: bump must stay inside the open unit ball");
        if (d == 2 && b.c[2] != 0.0)
            throw std::invalid_argument("make_phantom: d=2 bump center must have zero third component");
    }
    return ph;
}

// phi(s) = exp(1 - 1/(1-s^2)) for |s| < 1, else 0.
inline double bump_profile(double s) {
    const double s2 = s * s;
    if (s2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s2));
}

// d phi / d s
inline double bump_profile_deriv(double s) {
    const double s2 = s * s;
    if (s2 >= 1.0) return 0.0;
    const double q = 1.0 - s2;
    return bump_profile(s) * (-2.0 * s / (q * q));
}

inline double eval_phantom(const Phantom& ph, const std::array<double, 3>& x) {
    double v = 0.0;
    for (const auto& b : ph.bumps) {
        const double dx = x[0] - b.c[0], dy = x[1] - b.c[1], dz = x[2] - b.c[2];
        const double r2 = dx * dx + dy * dy + dz * dz;
        if (r2 >= b.rho * b.rho) continue;
        v += b.a * bump_profile(std::sqrt(r2) / b.rho);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Uniform 1D grid (p-grid and r-grid).

struct UniformGrid1D {
    double lo = 0.0, hi = 1.0;
    int n = 0;  // sample count, endpoints inclusive

    double step() const { return (hi - lo) / (n - 1); }
    double at(int j) const { return lo + j * step(); }
};

inline UniformGrid1D make_uniform_grid(double lo, double hi, int n) {
    if (!(hi > lo) || n < 2) throw std::invalid_argument("make_uniform_grid: bad parameters");
    return UniformGrid1D{lo, hi, n};
}

struct Sinogram {
    SphereGrid omegas;
    UniformGrid1D pgrid;
    std::vector<double> f;  // row-major [i_omega * n_p + j_p]

    double at(int i, int j) const { return f[static_cast<std::size_t>(i) * pgrid.n + j]; }
    double& at(int i, int j) { return f[static_cast<std::size_t>(i) * pgrid.n + j]; }
};

struct MeansTable {
    SphereGrid centers;
    UniformGrid1D rgrid;  // on [0, r_max]
    std::vector<double> m;  // row-major [i_r * n_centers + j_theta]

    double at(int ir, int jth) const { return m[static_cast<std::size_t>(ir) * centers.nodes.size() + jth]; }
    double& at(int ir, int jth) { return m[static_cast<std::size_t>(ir) * centers.nodes.size() + jth]; }
};

namespace detail {

// Catmull-Rom cubic on a uniform table; values outside are taken as 0.
inline double cubic_interp(const std::vector<double>& f, double lo, double h, double x) {
    const double u = (x - lo) / h;
    const int n = static_cast<int>(f.size());
    const int i = static_cast<int>(std::floor(u));
    if (i < -1 || i > n - 1) return 0.0;
    const double s = u - i;
    auto get = [&](int k) { return (k >= 0 && k < n) ? f[k] : 0.0; };
    const double f0 = get(i - 1), f1 = get(i), f2 = get(i + 1), f3 = get(i + 2);
    const double a = -0.5 * f0 + 1.5 * f1 - 1.5 * f2 + 0.5 * f3;
    const double b = f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3;
    const double c = -0.5 * f0 + 0.5 * f2;
    return ((a * s + b) * s + c) * s + f1;
}

// 6-point Lagrange on a uniform table; values outside are taken as 0. Used
// where interpolation error feeds the data spectrum (see wave_data): the
// O(h^6) remainder keeps that contribution below the quadrature floor.
inline double interp6(const std::vector<double>& f, double lo, double h, double x) {
    const double u = (x - lo) / h;
    const int n = static_cast<int>(f.size());
    const int i = static_cast<int>(std::floor(u));
    if (i < -3 || i > n + 1) return 0.0;
    const double s = u - i;
    auto get = [&](int k) { return (k >= 0 && k < n) ? f[k] : 0.0; };
    double acc = 0.0;
    for (int k = -2; k <= 3; ++k) {
        double w = 1.0;
        for (int j = -2; j <= 3; ++j)
            if (j != k) w *= (s - j) / (k - j);
        acc += w * get(i + k);
    }
    return acc;
}

// Gauss-Legendre rule cache (forward maps reuse a handful of orders).
inline const std::pair<std::vector<double>, std::vector<double>>& gl_rule(int n) {
    thread_local std::vector<std::pair<int, std::pair<std::vector<double>, std::vector<double>>>> cache;
    for (auto& e : cache)
        if (e.first == n) return e.second;
    std::vector<double> x, w;
    grids::detail::gauss_legendre(n, x, w);
    cache.push_back({n, {std::move(x), std::move(w)}});
    return cache.back().second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spherical means M(r, theta) = int_{S^{d-1}} f(theta + r tau) dtau.

// Quadrature over directions tau with the module's own sphere rule at degree
// q_int. Nodes outside a bump's angular support window are skipped by a cheap
// dot-product test before any transcendental work.
inline MeansTable spherical_means(const Phantom& ph, const SphereGrid& centers,
                                  const UniformGrid1D& rgrid, int q_int = 0) {
    if (!(rgrid.lo == 0.0) || rgrid.hi > 2.0 + 1e-12)
        throw std::invalid_argument("spherical_means: r-grid must start at 0 and stay within [0,2]");
    // Defaults fixed by a convergence study of the data spectrum: the range
    // tests weight the spectrum by powers of lambda, so the means rule must
    // resolve the smallest angular feature a bump shows to a boundary sphere,
    // not merely integrate the bump's mass accurately.
    if (q_int == 0) q_int = ph.d == 2 ? 512 : 768;
    if (q_int < 32) throw std::invalid_argument("spherical_means: q_int must be >= 32");
    MeansTable mt;
    mt.centers = centers;
    mt.rgrid = rgrid;
    mt.m.assign(static_cast<std::size_t>(rgrid.n) * centers.nodes.size(), 0.0);
    const SphereGrid rule = grids::make_sphere_grid(ph.d, q_int);
    const double h = rgrid.step();

    std::vector<std::pair<double, double>> dots;  // (tau . u, weight), sorted descending
    for (std::size_t jth = 0; jth < centers.nodes.size(); ++jth) {
        const auto& th = centers.nodes[jth];
        for (const auto& b : ph.bumps) {
            const double ux = b.c[0] - th[0], uy = b.c[1] - th[1], uz = b.c[2] - th[2];
            const double dist = std::sqrt(ux * ux + uy * uy + uz * uz);
            // only radii with | r - dist | < rho can touch the bump
            const int i0 = std::max(0, static_cast<int>(std::ceil((dist - b.rho) / h)));
            const int i1 = std::min(rgrid.n - 1, static_cast<int>(std::floor((dist + b.rho) / h)));
            if (i1 < i0) continue;
            const double rho2 = b.rho * b.rho;
            // |theta + r tau - c|^2 = r^2 + dist^2 - 2 r (tau . u): the dot
            // products do not depend on r, so they are computed once per
            // (theta, bump) and sorted, and each radius only walks the nodes
            // inside the bump's angular support window.
            dots.clear();
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const auto& tau = rule.nodes[q];
                dots.emplace_back(tau[0] * ux + tau[1] * uy + tau[2] * uz, rule.weights[q]);
            }
            std::sort(dots.begin(), dots.end(),
                      [](const auto& a, const auto& c) { return a.first > c.first; });
            for (int ir = i0; ir <= i1; ++ir) {
                const double r = rgrid.at(ir);
                if (r == 0.0) continue;  // point sphere, f(theta) = 0 on S
                const double base = r * r + dist * dist;
                const double dot_min = 0.5 * (base - rho2);  // s2 < rho2 needs r*dot > this
                double acc = 0.0;
                for (const auto& [dot, wq] : dots) {
                    if (r * dot <= dot_min) break;
                    const double s2 = std::max(0.0, base - 2.0 * r * dot);  // clamp rounding
                    if (s2 >= rho2) continue;  // guard rounding at the edge
                    acc += wq * bump_profile(std::sqrt(s2) / b.rho);
                }
                mt.at(ir, static_cast<int>(jth)) += b.a * acc;
            }
        }
    }
    return mt;
}

// ---------------------------------------------------------------------------
// Observation map: phantom -> g(t, theta) on the cylinder (0,1] x S.
//
// d=3: g = (1/4pi) d/dt [ t M(t,theta) ]          (delta-shell Green's function)
// d=2: g = d/dt [ (t/2pi) int_0^{pi/2} M(t sin psi, theta) sin psi dpsi ]
//      (the Abel kernel r/sqrt(t^2-r^2) absorbed by the r = t sin psi
//       substitution, which restores smooth-integrand quadrature rates).
// Both derivatives are 8th-order central differences on a 4x oversampled
// auxiliary table; the tables are odd in t, which supplies the ghost samples
// at the left end. The high order matters: the derivative error enters the
// data in-band and downstream range tests weight the spectrum by powers of
// the frequency, so an O((lambda h)^4) error is visible there.
inline BoundaryData wave_data(const Phantom& ph, const TimeGrid& tg, const SphereGrid& sg,
                              int q_int = 0) {
    if (ph.d != sg.d) throw std::invalid_argument("wave_data: phantom/grid dimension mismatch");
    const int np = tg.n_phys();
    const double dt = tg.dt();
    const double hs = dt / 4.0;  // oversampled step
    const int n_over = 4 * (np - 1) + 1;
    const int pad = 4;  // stencil margin past t = 1
    const UniformGrid1D rg = make_uniform_grid(0.0, (n_over - 1 + pad) * hs, n_over + pad);
    const MeansTable mt = spherical_means(ph, sg, rg, q_int);

    const double delta_s = 1.0 - ph.support_radius();
    BoundaryData g = grids::make_boundary_data(sg, tg, std::max(0.0, delta_s) * 0.999);

    const std::size_t nth = sg.nodes.size();
    std::vector<double> aux(rg.n);
    const auto& [psi_x, psi_w] = detail::gl_rule(480);

    for (std::size_t jth = 0; jth < nth; ++jth) {
        if (ph.d == 3) {
            for (int i = 0; i < rg.n; ++i) aux[i] = rg.at(i) * mt.at(i, static_cast<int>(jth));
        } else {
            std::vector<double> mrow(rg.n);
            for (int i = 0; i < rg.n; ++i) mrow[i] = mt.at(i, static_cast<int>(jth));
            for (int i = 0; i < rg.n; ++i) {
                const double t = rg.at(i);
                double acc = 0.0;
                for (std::size_t q = 0; q < psi_x.size(); ++q) {
                    const double psi = 0.25 * kPi * (psi_x[q] + 1.0);
                    const double sp = std::sin(psi);
                    acc += psi_w[q] * detail::interp6(mrow, 0.0, hs, t * sp) * sp;
                }
                aux[i] = (t / (2.0 * kPi)) * acc * (0.25 * kPi);
            }
        }
        // aux is odd in t (M is even), so reflect for the ghost samples
        auto av = [&](int i) { return i >= 0 ? aux[i] : -aux[-i]; };
        const double scale = ph.d == 3 ? 1.0 / (4.0 * kPi) : 1.0;
        for (int k = 0; k < np; ++k) {
            const int i = 4 * k;
            const double der = (672.0 * (av(i + 1) - av(i - 1)) - 168.0 * (av(i + 2) - av(i - 2)) +
                                32.0 * (av(i + 3) - av(i - 3)) - 3.0 * (av(i + 4) - av(i - 4))) /
                               (840.0 * hs);
            g.at(k, static_cast<int>(jth)) = scale * der;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Full Radon transform of the phantom.
//
// d=2: line integrals, Gauss quadrature over each bump's clipped chord.
// d=3: plane integrals, polar tensor rule over each bump's clipped disk.
inline Sinogram radon_of_phantom(const Phantom& ph, const SphereGrid& sg,
                                 const UniformGrid1D& pgrid) {
    if (ph.d != sg.d) throw std::invalid_argument("radon_of_phantom: dimension mismatch");
    Sinogram sino;
    sino.pgrid = pgrid;
    sino.f.assign(static_cast<std::size_t>(sg.nodes.size()) * pgrid.n, 0.0);
    const auto& [gx, gw] = detail::gl_rule(128);

    for (std::size_t i = 0; i < sg.nodes.size(); ++i) {
        const auto& w = sg.nodes[i];
        for (const auto& b : ph.bumps) {
            const double q0 = b.c[0] * w[0] + b.c[1] * w[1] + b.c[2] * w[2];  // plane offset of center
            for (int j = 0; j < pgrid.n; ++j) {
                const double q = pgrid.at(j) - q0;
                if (std::abs(q) >= b.rho) continue;
                const double half = std::sqrt(b.rho * b.rho - q * q);
                double acc = 0.0;
                if (ph.d == 2) {
                    // chord clipped to the bump support
                    for (std::size_t k = 0; k < gx.size(); ++k) {
                        const double u = half * gx[k];
                        acc += gw[k] * bump_profile(std::sqrt(q * q + u * u) / b.rho);
                    }
                    acc *= half;
                } else {
                    // polar rule over the clipped disk; the angular factor of
                    // the tensor rule is summed analytically (radial bump)
                    for (std::size_t k = 0; k < gx.size(); ++k) {
                        const double u = half * 0.5 * (gx[k] + 1.0);
                        acc += gw[k] * 0.5 * half * u * bump_profile(std::sqrt(q * q + u * u) / b.rho);
                    }
                    acc *= 2.0 * kPi;
                }
                sino.at(static_cast<int>(i), j) += b.a * acc;
            }
        }
    }
    sino.omegas = sg;
    return sino;
}

// ---------------------------------------------------------------------------
// d'Alembert projection combination [Ru](t, omega, p) = (F(p+t) + F(p-t)) / 2
// with cubic interpolation in p; F is treated as 0 for |p| > 1.
inline double dalembert_projection(const Sinogram& sino, double t, int i_omega, double p) {
    if (i_omega < 0 || i_omega >= static_cast<int>(sino.omegas.nodes.size()))
        throw std::invalid_argument("dalembert_projection: omega index out of range");
    const int n = sino.pgrid.n;
    std::vector<double> row(n);
    for (int j = 0; j < n; ++j) row[j] = sino.at(i_omega, j);
    const double a = detail::cubic_interp(row, sino.pgrid.lo, sino.pgrid.step(), p + t);
    const double b = detail::cubic_interp(row, sino.pgrid.lo, sino.pgrid.step(), p - t);
    return 0.5 * (a + b);
}

}  // namespace htrw::forward
