// Discretizations shared by every stage of the pipeline:
//   - quadrature grids on the unit circle / sphere,
//   - the uniform time grid over the extended horizon [0, T_ext),
//   - the half-sample-shifted frequency grid (symmetric, never hits 0),
//   - spherical-harmonic analysis/synthesis of boundary samples,
//   - smooth extension of the physical window past t = 1 followed by the
//     discrete Fourier transform onto the shifted frequency grid.
//
// All grid objects are immutable aggregates; every operation here is pure.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "htrw/fd.hpp"
#include "htrw/fft.hpp"
#include "htrw/special.hpp"

namespace htrw::grids {

using special::cplx;
using special::HarmonicIndex;
using special::kPi;

// ---------------------------------------------------------------------------
// Sphere grid.

struct SphereGrid {
    int d = 3;
    int Q = 0;  // degree parameter; see make_sphere_grid
    std::vector<std::array<double, 3>> nodes;
    std::vector<double> weights;  // area measure on S^{d-1}
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] (Newton on the Legendre recurrence).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        long double t = std::cos(3.141592653589793238462643383279502884L * (i + 0.75L) / (n + 0.5L));
        long double p1 = 0.0L, dp = 1.0L;
        for (int it = 0; it < 100; ++it) {
            long double p0 = 1.0L;
            p1 = t;
            for (int k = 2; k <= n; ++k) {
                const long double p2 = ((2.0L * k - 1.0L) * t * p1 - (k - 1.0L) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0L);
            const long double step = p1 / dp;
            t -= step;
            if (std::abs(step) < 1e-19L) break;
        }
        x[i] = static_cast<double>(t);
        w[i] = static_cast<double>(2.0L / ((1.0L - t * t) * dp * dp));
    }
}

}  // namespace detail

inline SphereGrid make_sphere_grid(int d, int Q) {
    if (d != 2 && d != 3) throw std::invalid_argument("make_sphere_grid: d must be 2 or 3");
    if (Q < 4 || Q % 2 != 0) throw std::invalid_argument("make_sphere_grid: Q must be even and >= 4");
    SphereGrid g;
    g.d = d;
    g.Q = Q;
    if (d == 2) {
        g.nodes.reserve(Q);
        for (int i = 0; i < Q; ++i) {
            const double phi = 2.0 * kPi * i / Q;
            g.nodes.push_back({std::cos(phi), std::sin(phi), 0.0});
            g.weights.push_back(2.0 * kPi / Q);
        }
        return g;
    }
    std::vector<double> x, w;
    detail::gauss_legendre(Q / 2, x, w);
    g.nodes.reserve(static_cast<std::size_t>(Q) * Q / 2);
    for (int i = 0; i < Q / 2; ++i) {
        const double ct = x[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int k = 0; k < Q; ++k) {
            const double phi = 2.0 * kPi * k / Q;
            g.nodes.push_back({st * std::cos(phi), st * std::sin(phi), ct});
            g.weights.push_back(w[i] * 2.0 * kPi / Q);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Time and frequency grids.

struct TimeGrid {
    int n_t = 0;        // power of two
    double t_ext = 0.0; // extended horizon, >= 2

    double dt() const { return t_ext / n_t; }
    double t(int k) const { return k * dt(); }
    // Samples with t_k <= 1 form the physical window.
    int n_phys() const { return static_cast<int>(std::floor(1.0 / dt() + 0.5 * dt())) + 1; }
};

inline TimeGrid make_time_grid(int n_t, double t_ext) {
    if (n_t < 2 || (n_t & (n_t - 1)) != 0)
        throw std::invalid_argument("make_time_grid: N_t must be a power of two");
    if (!(t_ext >= 2.0)) throw std::invalid_argument("make_time_grid: T_ext must be >= 2");
    return TimeGrid{n_t, t_ext};
}

// Half-sample-shifted frequencies: symmetric about 0, excludes 0 exactly.
struct FrequencyGrid {
    int n_t = 0;
    double t_ext = 0.0;

    double lambda(int j) const { return (j + 0.5 - n_t / 2) * (2.0 * kPi / t_ext); }
    double dlambda() const { return 2.0 * kPi / t_ext; }
};

inline FrequencyGrid make_frequency_grid(const TimeGrid& tg) {
    return FrequencyGrid{tg.n_t, tg.t_ext};
}

// ---------------------------------------------------------------------------
// Boundary samples and harmonic channels.

struct BoundaryData {
    SphereGrid sphere;
    TimeGrid time;
    double t_quiet = 0.0;          // b vanishes for t <= t_quiet
    std::vector<double> samples;   // row-major [k * n_nodes + i], k < time.n_phys()

    double at(int k, int i) const { return samples[static_cast<std::size_t>(k) * sphere.nodes.size() + i]; }
    double& at(int k, int i) { return samples[static_cast<std::size_t>(k) * sphere.nodes.size() + i]; }
};

inline BoundaryData make_boundary_data(SphereGrid sphere, TimeGrid time, double t_quiet = 0.0) {
    BoundaryData b;
    b.samples.assign(static_cast<std::size_t>(time.n_phys()) * sphere.nodes.size(), 0.0);
    b.sphere = std::move(sphere);
    b.time = time;
    b.t_quiet = t_quiet;
    return b;
}

struct HarmonicChannels {
    int d = 3;
    int lmax = 0;
    TimeGrid time;
    std::vector<HarmonicIndex> idx;
    // One real series per channel, length time.n_t (zeros past the physical
    // window until extend_and_transform has run).
    std::vector<std::vector<double>> series;
    bool extended = false;
    // Complex spectra on the matching FrequencyGrid, filled by
    // extend_and_transform; empty before that.
    std::vector<std::vector<cplx>> spectra;

    FrequencyGrid freq() const { return make_frequency_grid(time); }
};

// b_l^m(t_k) = sum_i w_i b(t_k, theta_i) Y_l^m(theta_i).
inline HarmonicChannels sh_analysis(const BoundaryData& b, int lmax) {
    if (lmax < 0 || 2 * lmax + 2 > b.sphere.Q)
        throw std::length_error("sh_analysis: lmax too large for the sphere grid");
    HarmonicChannels c;
    c.d = b.sphere.d;
    c.lmax = lmax;
    c.time = b.time;
    c.idx = special::harmonic_indices(b.sphere.d, lmax);
    c.series.assign(c.idx.size(), std::vector<double>(b.time.n_t, 0.0));
    const int np = b.time.n_phys();
    const std::size_t nn = b.sphere.nodes.size();
    std::vector<double> row;
    for (std::size_t i = 0; i < nn; ++i) {
        row = special::sph_harm_row(b.sphere.d, lmax, b.sphere.nodes[i]);
        const double w = b.sphere.weights[i];
        for (std::size_t q = 0; q < c.idx.size(); ++q) {
            const double wy = w * row[q];
            if (wy == 0.0) continue;
            for (int k = 0; k < np; ++k) c.series[q][k] += wy * b.at(k, static_cast<int>(i));
        }
    }
    return c;
}

// b(t_k, theta_i) = sum_{l,m} b_l^m(t_k) Y_l^m(theta_i), physical window only.
inline BoundaryData sh_synthesis(const HarmonicChannels& c, const SphereGrid& grid) {
    if (c.d != grid.d) throw std::invalid_argument("sh_synthesis: dimension mismatch");
    BoundaryData b = make_boundary_data(grid, c.time);
    const int np = c.time.n_phys();
    std::vector<double> row;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        row = special::sph_harm_row(grid.d, c.lmax, grid.nodes[i]);
        for (std::size_t q = 0; q < c.idx.size(); ++q) {
            const double y = row[q];
            if (y == 0.0) continue;
            for (int k = 0; k < np; ++k) b.at(k, static_cast<int>(i)) += c.series[q][k] * y;
        }
    }
    return b;
}

namespace detail {

// C-infinity step: 1 at s <= 0, 0 at s >= 1, all derivatives flat at both ends.
inline double smooth_step_down(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    return a / (a + b);
}

// One-sided 5-point derivative estimate at the last sample of the window.
inline double end_derivative(const std::vector<double>& f, int last, double h) {
    return (25.0 / 12.0 * f[last] - 4.0 * f[last - 1] + 3.0 * f[last - 2] -
            4.0 / 3.0 * f[last - 3] + 0.25 * f[last - 4]) / h;
}

// Estimates f^(k)(t_last) for k = 0..kmax from samples strided well away from
// the native step: one-sided stencils at the native step amplify roundoff as
// h^-k, so the nodes are spread over a fixed physical width instead.
inline std::vector<double> end_taylor(const std::vector<double>& f, int last, double h, int kmax) {
    const int m = 12;  // stencil points; order of accuracy m - k
    int stride = std::max(1, static_cast<int>(std::floor(last / 128.0 + 0.5)));
    while ((m - 1) * stride > last) --stride;
    std::vector<double> nodes(m), vals(m);
    for (int j = 0; j < m; ++j) {
        nodes[j] = -j * stride * h;
        vals[j] = f[last - j * stride];
    }
    std::vector<double> d(kmax + 1, 0.0);
    for (int k = 0; k <= kmax; ++k) {
        const std::vector<double> w = fd::fornberg_weights(0.0, nodes, k);
        for (int j = 0; j < m; ++j) d[k] += w[j] * vals[j];
    }
    return d;
}

}  // namespace detail

// Extends every channel smoothly past t = 1 (supported in [1, (1+T_ext)/2]),
// then computes spectra  b_hat(lambda_j) = dt * sum_k b(t_k) e^{i lambda_j t_k}
// on the half-sample-shifted grid via one length-N_t FFT per channel: with
// lambda_j t_k = 2 pi k (j + 1/2 - N/2)/N the phase splits into the FFT kernel
// times a per-sample twiddle e^{i pi k / N} (-1)^k.
//
// `variant` selects between two admissible extension shapes (0: support up to
// the midpoint of [1, T_ext]; 1: shorter support, steeper cutoff); the
// downstream exterior solution on [-1, 0] must not depend on the choice.
//
// Each channel is continued by its degree-4 Taylor polynomial at t = 1 times a
// C-infinity cutoff that is flat at the junction, so the extension matches
// value and first four derivatives there. Matching this many orders keeps the
// spectra decaying fast enough that frequency sums weighted by lambda^n (the
// derivative evaluations downstream) still converge. The cutoff support
// shrinks adaptively so the polynomial never exceeds a few times the window's
// amplitude, which keeps the periodization wrap-around small.
inline HarmonicChannels extend_and_transform(const HarmonicChannels& in, int variant = 0) {
    if (in.extended) throw std::invalid_argument("extend_and_transform: channels already extended");
    if (variant != 0 && variant != 1)
        throw std::invalid_argument("extend_and_transform: unknown extension variant");
    HarmonicChannels c = in;
    const TimeGrid& tg = c.time;
    const int np = tg.n_phys();
    if (np < 16) throw std::invalid_argument("extend_and_transform: physical window too short");
    const double h = tg.dt();
    const double u_max = variant == 0 ? 0.5 * (tg.t_ext - 1.0)
                                      : 0.35 * (tg.t_ext - 1.0);
    const double cutoff_pow = variant == 0 ? 1.0 : 2.0;

    for (auto& f : c.series) {
        const std::vector<double> d = detail::end_taylor(f, np - 1, h, 4);
        double amp = 0.0;
        for (int k = 0; k < np; ++k) amp = std::max(amp, std::abs(f[k]));
        if (amp == 0.0) continue;
        // Shrink the support until every Taylor term stays below ~3x amp.
        double u_end = u_max;
        double fact = 1.0;
        for (int k = 1; k <= 4; ++k) {
            fact *= k;
            if (d[k] == 0.0) continue;
            const double cap = std::pow(3.0 * amp * fact / std::abs(d[k]), 1.0 / k);
            u_end = std::min(u_end, std::max(cap, u_max / 8.0));
        }
        const double t_last = tg.t(np - 1);
        for (int k = np; k < tg.n_t; ++k) {
            const double u = tg.t(k) - t_last;
            if (u >= u_end) {
                f[k] = 0.0;
                continue;
            }
            double taylor = 0.0;
            double uk = 1.0, kf = 1.0;
            for (int j = 0; j <= 4; ++j) {
                taylor += d[j] * uk / kf;
                uk *= u;
                kf *= j + 1;
            }
            f[k] = taylor * detail::smooth_step_down(std::pow(u / u_end, cutoff_pow));
        }
    }

    const int n = tg.n_t;
    c.spectra.assign(c.series.size(), {});
    std::vector<cplx> twiddle(n);
    for (int k = 0; k < n; ++k) {
        const double ph = kPi * k / n;
        const double sg = (k % 2 == 0) ? 1.0 : -1.0;
        twiddle[k] = sg * cplx(std::cos(ph), std::sin(ph));
    }
    std::vector<cplx> buf(n);
    for (std::size_t q = 0; q < c.series.size(); ++q) {
        for (int k = 0; k < n; ++k) buf[k] = c.series[q][k] * twiddle[k];
        fft(buf, +1);
        for (auto& z : buf) z *= h;
        // Mirror the lower half so conjugate symmetry on the symmetric grid
        // (lambda_{N-1-j} = -lambda_j) holds bitwise for real inputs.
        for (int j = 0; j < n / 2; ++j) buf[n - 1 - j] = std::conj(buf[j]);
        c.spectra[q] = buf;
    }
    c.extended = true;
    return c;
}

}  // namespace htrw::grids
