// Special functions: cylindrical Bessel J_n / Y_n (real and complex argument
// in the closed upper half-plane), spherical Hankel/Bessel functions
//
//   h_l^d(z) = H^{(1)}_{l+d/2-1}(z) / z^{d/2-1},   j_l^d = Re h_l^d  (real z>0),
//
// real orthonormal spherical harmonics for d in {2,3}, and the residual
// evaluators for the two analytic identities (Wronskian, Jacobi-Anger) used
// throughout the test suites.
//
// Evaluation scheme for integer-order J/Y (d=2):
//   - J_n by Miller's backward recurrence with the J_0 + 2*sum J_2k = 1
//     normalization; for |z| > max(30, 2*nmax) forward recurrence from
//     asymptotic seeds instead (stable there, much cheaper for large |z|).
//   - Y_0, Y_1 by the ascending series for small |z|, Hankel asymptotic
//     series otherwise; higher orders by forward recurrence (Y is the
//     dominant solution, so this is stable).
// d=3 uses the elementary closed form of half-integer-order Hankel functions.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

namespace htrw::special {

inline constexpr int kLMax = 64;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEulerGamma = 0.57721566490153286061;

using cplx = std::complex<double>;

// Spherical harmonic index. d=3: -l <= m <= l. d=2: the degree-l channel has
// members m=+1 (cos flavor) and m=-1 (sin flavor) for l >= 1, and m=0 for l=0.
struct HarmonicIndex {
    int l = 0;
    int m = 0;
    bool operator==(const HarmonicIndex&) const = default;
};

inline std::vector<HarmonicIndex> harmonic_indices(int d, int lmax) {
    if (d != 2 && d != 3) throw std::invalid_argument("harmonic_indices: d must be 2 or 3");
    if (lmax < 0 || lmax > kLMax) throw std::length_error("harmonic_indices: lmax out of range");
    std::vector<HarmonicIndex> idx;
    for (int l = 0; l <= lmax; ++l) {
        if (d == 2) {
            if (l == 0) idx.push_back({0, 0});
            else {
                idx.push_back({l, +1});
                idx.push_back({l, -1});
            }
        } else {
            for (int m = -l; m <= l; ++m) idx.push_back({l, m});
        }
    }
    return idx;
}

namespace detail {

// Hankel asymptotic series H^{(1,2)}_nu(z) for large |z|. kind = +1 or -1.
inline cplx hankel_asymptotic(double nu, cplx z, int kind) {
    const cplx i(0.0, 1.0);
    const cplx iz = static_cast<double>(kind) * i;
    const double mu = 4.0 * nu * nu;
    cplx term(1.0, 0.0), sum(1.0, 0.0);
    double prev = 1.0;
    for (int k = 1; k <= 30; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (8.0 * k) * iz / z;
        const double mag = std::abs(term);
        if (mag > prev) break;  // divergence onset of the asymptotic series
        sum += term;
        prev = mag;
        if (mag < 1e-18) break;
    }
    const cplx phase = static_cast<double>(kind) * i * (z - nu * kPi / 2.0 - kPi / 4.0);
    return std::sqrt(2.0 / (kPi * z)) * std::exp(phase) * sum;
}

// Ascending series for Y_n, n in {0,1}, complex z, |z| moderate. Needs J_n(z).
// Evaluated in long double: near the series/asymptotic crossover (|z| ~ 10)
// the alternating sum peaks ~4 orders above its value, and the lost digits
// would breach the 1e-12 accuracy target in plain double.
inline cplx bessel_y_series(int n, cplx z, cplx jn) {
    using lcplx = std::complex<long double>;
    const long double pi = 3.141592653589793238462643383279502884L;
    const long double gamma = 0.577215664901532860606512090082L;
    const lcplx zl(z.real(), z.imag());
    const lcplx jl(jn.real(), jn.imag());
    const lcplx lnhalf = std::log(zl / 2.0L);
    const lcplx q = zl * zl / 4.0L;
    lcplx out;
    if (n == 0) {
        lcplx sum(0.0L, 0.0L), pow(1.0L, 0.0L);
        long double harmonic = 0.0L, sign = -1.0L, kfact = 1.0L;
        for (int k = 1; k <= 70; ++k) {
            sign = -sign;
            harmonic += 1.0L / k;
            kfact *= k;
            pow *= q;
            const lcplx term = sign * harmonic * pow / (kfact * kfact);
            sum += term;
            if (std::abs(term) < 1e-22L * (std::abs(sum) + 1.0L)) break;
        }
        out = (2.0L / pi) * ((lnhalf + gamma) * jl + sum);
    } else {
        // n == 1 (DLMF 10.8.1 specialization)
        lcplx sum(0.0L, 0.0L), pow(1.0L, 0.0L);
        long double sign = 1.0L, kfact = 1.0L, k1fact = 1.0L;
        long double psi1 = -gamma, psi2 = 1.0L - gamma;
        for (int k = 0; k <= 70; ++k) {
            if (k > 0) {
                sign = -sign;
                kfact *= k;
                k1fact *= (k + 1);
                pow *= q;
                psi1 += 1.0L / k;
                psi2 += 1.0L / (k + 1);
            }
            const lcplx term = sign * (psi1 + psi2) * pow / (kfact * k1fact);
            sum += term;
            if (k > 3 && std::abs(term) < 1e-22L * (std::abs(sum) + 1.0L)) break;
        }
        out = (2.0L / pi) * lnhalf * jl - (2.0L / (pi * zl)) - (zl / (2.0L * pi)) * sum;
    }
    return cplx(static_cast<double>(out.real()), static_cast<double>(out.imag()));
}

// Miller backward recurrence: J_0..J_nmax for complex z, Re z > 0.
inline std::vector<cplx> bessel_j_miller(cplx z, int nmax) {
    const double az = std::abs(z);
    const int start = nmax + 16 + static_cast<int>(az + 18.0 * std::cbrt(az + 1.0));
    std::vector<cplx> j(nmax + 1);
    cplx fp(0.0, 0.0), f(1e-280, 0.0);
    cplx norm(0.0, 0.0);
    for (int k = start; k >= 0; --k) {
        const cplx fm = (2.0 * (k + 1)) / z * f - fp;
        fp = f;
        f = fm;
        if (k <= nmax) j[k] = f;
        if (k > 0 && k % 2 == 0) norm += 2.0 * f;
        if (std::abs(f) > 1e250) {  // rescale to avoid overflow
            const double s = 1e-250;
            f *= s;
            fp *= s;
            norm *= s;
            for (auto& v : j) v *= s;
        }
    }
    norm += f;
    for (auto& v : j) v /= norm;
    return j;
}

struct JYTable {
    std::vector<cplx> j, y;
};

// J_0..J_nmax and Y_0..Y_nmax for Re z > 0, Im z >= 0.
inline JYTable bessel_jy_upper_right(cplx z, int nmax) {
    JYTable t;
    t.j.resize(nmax + 1);
    t.y.resize(nmax + 1);
    const double az = std::abs(z);

    if (az > std::max(30.0, 2.0 * (nmax + 1))) {
        // Asymptotic seeds, forward recurrence for both J and Y (orders stay
        // below |z|/2, where forward recurrence of J is stable).
        for (int n = 0; n <= std::min(1, nmax); ++n) {
            const cplx h1 = hankel_asymptotic(n, z, +1);
            const cplx h2 = hankel_asymptotic(n, z, -1);
            t.j[n] = 0.5 * (h1 + h2);
            t.y[n] = (h1 - h2) / cplx(0.0, 2.0);
        }
        for (int n = 2; n <= nmax; ++n) {
            t.j[n] = (2.0 * (n - 1)) / z * t.j[n - 1] - t.j[n - 2];
            t.y[n] = (2.0 * (n - 1)) / z * t.y[n - 1] - t.y[n - 2];
        }
        return t;
    }

    t.j = bessel_j_miller(z, std::max(nmax, 1));
    t.j.resize(nmax + 1);
    if (az > 15.0) {
        for (int n = 0; n <= std::min(1, nmax); ++n) {
            const cplx h1 = hankel_asymptotic(n, z, +1);
            const cplx h2 = hankel_asymptotic(n, z, -1);
            t.y[n] = (h1 - h2) / cplx(0.0, 2.0);
        }
    } else {
        const std::vector<cplx> jj = bessel_j_miller(z, 1);
        t.y[0] = bessel_y_series(0, z, jj[0]);
        if (nmax >= 1) t.y[1] = bessel_y_series(1, z, jj[1]);
    }
    for (int n = 2; n <= nmax; ++n)
        t.y[n] = (2.0 * (n - 1)) / z * t.y[n - 1] - t.y[n - 2];
    return t;
}

}  // namespace detail

// H^{(1)}_0..H^{(1)}_nmax at complex z with Im z >= 0, z != 0.
// Re z < 0 is mapped through H^{(1)}_n(z) = -(-1)^n conj(H^{(1)}_n(-conj z)),
// the analytic continuation across the upper half-plane for integer orders.
inline std::vector<cplx> cyl_hankel1(cplx z, int nmax) {
    if (z == cplx(0.0, 0.0)) throw std::invalid_argument("cyl_hankel1: z = 0");
    if (nmax < 0 || nmax > kLMax + 2) throw std::length_error("cyl_hankel1: order out of range");
    const bool reflect = z.real() < 0.0;
    const cplx zr = reflect ? -std::conj(z) : z;
    const detail::JYTable t = detail::bessel_jy_upper_right(zr, nmax);
    std::vector<cplx> h(nmax + 1);
    for (int n = 0; n <= nmax; ++n) {
        const cplx v = t.j[n] + cplx(0.0, 1.0) * t.y[n];
        h[n] = reflect ? cplx((n % 2 == 0) ? -1.0 : 1.0) * std::conj(v) : v;
    }
    return h;
}

// Spherical Hankel functions h_0^d(z) .. h_lmax^d(z), Im z >= 0.
// d=3 uses the elementary closed form
//   h_l^3(z) = sqrt(2/pi) * (-i)^{l+1} e^{iz}/z * sum_k c_k z^{-k},
//   c_k = (l+k)! / (k! (l-k)!) * (i/2)^k.
inline std::vector<cplx> sph_hankel_table(int d, int lmax, cplx z) {
    if (d != 2 && d != 3) throw std::invalid_argument("sph_hankel_table: d must be 2 or 3");
    if (lmax < 0 || lmax > kLMax) throw std::length_error("sph_hankel_table: l exceeds L_MAX");
    if (z == cplx(0.0, 0.0)) throw std::invalid_argument("sph_hankel_table: z = 0");
    std::vector<cplx> h(lmax + 1);
    if (d == 2) {
        const std::vector<cplx> H = cyl_hankel1(z, lmax);
        for (int l = 0; l <= lmax; ++l) h[l] = H[l];  // z^{d/2-1} = 1
        return h;
    }
    const cplx i(0.0, 1.0);
    const double scale = std::sqrt(2.0 / kPi);
    const cplx pref = std::exp(i * z) / z;
    cplx il = -i;  // (-i)^{l+1} for l = 0
    for (int l = 0; l <= lmax; ++l) {
        cplx c(1.0, 0.0), sum(1.0, 0.0);
        for (int k = 1; k <= l; ++k) {
            c *= static_cast<double>((l + k) * (l - k + 1)) / k * (i / 2.0) / z;
            sum += c;
        }
        h[l] = scale * il * pref * sum;
        il *= -i;
    }
    return h;
}

// h_l^d at real lambda != 0; the paper's convention h(-x) = conj(h(x)).
inline cplx sph_hankel(int d, int l, double lambda) {
    if (lambda == 0.0) throw std::invalid_argument("sph_hankel: lambda = 0");
    if (l < 0 || l > kLMax) throw std::length_error("sph_hankel: l exceeds L_MAX");
    const cplx v = sph_hankel_table(d, l, cplx(std::abs(lambda), 0.0))[l];
    return lambda > 0.0 ? v : std::conj(v);
}

// j_0^d(x) .. j_lmax^d(x), x > 0, where j_l^d = J_{l+d/2-1}(x) / x^{d/2-1}.
// For d=3 this is NOT taken as Re h_l^3: when x < l the real part of the
// closed-form sum cancels catastrophically (|h| is Y-dominated there), so the
// regular solution is computed by its own backward recurrence instead.
inline std::vector<double> sph_bessel_table(int d, int lmax, double x) {
    if (d != 2 && d != 3) throw std::invalid_argument("sph_bessel_table: d must be 2 or 3");
    if (lmax < 0 || lmax > kLMax + 2) throw std::length_error("sph_bessel_table: l exceeds L_MAX");
    if (x <= 0.0) throw std::invalid_argument("sph_bessel_table: lambda must be positive");
    std::vector<double> j(lmax + 1);
    if (d == 2) {
        const std::vector<cplx> J = detail::bessel_j_miller(cplx(x, 0.0), std::max(lmax, 1));
        for (int l = 0; l <= lmax; ++l) j[l] = J[l].real();
        return j;
    }
    // Backward recurrence for the standard spherical j_l, then rescale by
    // sqrt(2/pi) to match j_l^3 = J_{l+1/2}(x)/sqrt(x).
    const int start = lmax + 16 + static_cast<int>(x + 18.0 * std::cbrt(x + 1.0));
    double fp = 0.0, f = 1e-280;
    std::vector<double> raw(lmax + 1, 0.0);
    for (int k = start; k >= 0; --k) {
        const double fm = (2.0 * k + 3.0) / x * f - fp;
        fp = f;
        f = fm;
        if (k <= lmax) raw[k] = f;
        if (std::abs(f) > 1e250) {
            fp *= 1e-250;
            f *= 1e-250;
            for (auto& v : raw) v *= 1e-250;
        }
    }
    const double j0 = std::sin(x) / x;
    const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    // Normalize against whichever seed is farther from a zero.
    const double ratio = std::abs(j0) >= std::abs(j1) ? j0 / f : (lmax >= 1 ? j1 / raw[1] : j0 / f);
    const double scale = std::sqrt(2.0 / kPi) * ratio;
    for (int l = 0; l <= lmax; ++l) j[l] = scale * raw[l];
    return j;
}

// j_l^d(x) = J_{l+d/2-1}(x) / x^{d/2-1}, x > 0.
inline double sph_bessel(int d, int l, double lambda) {
    if (l < 0 || l > kLMax) throw std::length_error("sph_bessel: l exceeds L_MAX");
    if (lambda <= 0.0) throw std::invalid_argument("sph_bessel: lambda must be positive");
    return sph_bessel_table(d, l, lambda)[l];
}

namespace detail {

// d/dz of h_l^d from the three-term derivative recurrence (no finite
// differences): (h_l^d)' = (h_{l-1}^d - h_{l+1}^d)/2 - (d/2-1)/z * h_l^d,
// with h_{-1}^d := (2 nu / z) h_0^d - h_1^d, nu = d/2 - 1.
inline cplx sph_hankel_deriv_from(const std::vector<cplx>& h, int d, int l, cplx z) {
    const double nu = l + d / 2.0 - 1.0;
    cplx below;
    if (l >= 1) below = h[l - 1];
    else below = (2.0 * nu / z) * h[0] - h[1];
    return 0.5 * (below - h[l + 1]) - (d / 2.0 - 1.0) / z * h[l];
}

}  // namespace detail

// | (h_l^d)' j_l^d - h_l^d (j_l^d)' - 2i/(pi x^{d-1}) | / |2i/(pi x^{d-1})|.
inline double wronskian_residual(int d, int l, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("wronskian_residual: lambda must be positive");
    const std::vector<cplx> h = sph_hankel_table(d, l + 1, cplx(lambda, 0.0));
    const std::vector<double> jr = sph_bessel_table(d, l + 1, lambda);
    std::vector<cplx> j(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) j[k] = cplx(jr[k], 0.0);
    const cplx z(lambda, 0.0);
    const cplx dh = detail::sph_hankel_deriv_from(h, d, l, z);
    const cplx dj = detail::sph_hankel_deriv_from(j, d, l, z);
    const cplx lhs = dh * j[l] - h[l] * dj;
    const cplx rhs = cplx(0.0, 2.0 / kPi) / std::pow(lambda, d - 1);
    return std::abs(lhs - rhs) / std::abs(rhs);
}

// ---------------------------------------------------------------------------
// Real spherical harmonics.

namespace detail {

// Fully normalized associated Legendre values Pbar_l^m(x), m >= 0, such that
// Y_l^0 = Pbar_l^0 and Y_l^{+-m} = sqrt(2) Pbar_l^m * cos/sin(m phi) form an
// orthonormal basis of L2(S^2). Returns a (lmax+1)x(lmax+1) lower triangle,
// flat index l*(l+1)/2 + m.
inline std::vector<double> legendre_normalized(int lmax, double x) {
    std::vector<double> p((lmax + 1) * (lmax + 2) / 2, 0.0);
    const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    auto at = [&p](int l, int m) -> double& { return p[l * (l + 1) / 2 + m]; };
    at(0, 0) = std::sqrt(1.0 / (4.0 * kPi));
    for (int m = 1; m <= lmax; ++m)
        at(m, m) = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * at(m - 1, m - 1);
    for (int m = 0; m < lmax; ++m)
        at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * at(m, m);
    for (int m = 0; m <= lmax; ++m) {
        for (int l = m + 2; l <= lmax; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
            const double b = std::sqrt(((2.0 * l + 1.0) * ((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m)) /
                                       ((2.0 * l - 3.0) * (static_cast<double>(l) * l - static_cast<double>(m) * m)));
            at(l, m) = a * x * at(l - 1, m) - b * at(l - 2, m);
        }
    }
    return p;
}

}  // namespace detail

// Y_l^m at a unit direction theta (2 or 3 components used depending on d).
// d=2 basis: 1/sqrt(2pi), cos(l phi)/sqrt(pi) (m=+1), sin(l phi)/sqrt(pi) (m=-1).
inline double real_sph_harm(int d, HarmonicIndex idx, const std::array<double, 3>& theta) {
    const double r2 = theta[0] * theta[0] + theta[1] * theta[1] + (d == 3 ? theta[2] * theta[2] : 0.0);
    if (std::abs(r2 - 1.0) > 2.5e-12)
        throw std::invalid_argument("real_sph_harm: direction is not unit length");
    if (idx.l < 0 || idx.l > kLMax) throw std::length_error("real_sph_harm: l exceeds L_MAX");
    if (d == 2) {
        if (idx.l == 0) return 1.0 / std::sqrt(2.0 * kPi);
        const double phi = std::atan2(theta[1], theta[0]);
        const double arg = idx.l * phi;
        return (idx.m >= 0 ? std::cos(arg) : std::sin(arg)) / std::sqrt(kPi);
    }
    if (std::abs(idx.m) > idx.l) throw std::invalid_argument("real_sph_harm: |m| > l");
    const int m = std::abs(idx.m);
    const std::vector<double> p = detail::legendre_normalized(idx.l, theta[2]);
    const double plm = p[idx.l * (idx.l + 1) / 2 + m];
    if (idx.m == 0) return plm;
    const double phi = std::atan2(theta[1], theta[0]);
    const double f = idx.m > 0 ? std::cos(m * phi) : std::sin(m * phi);
    return std::sqrt(2.0) * plm * f;
}

// All harmonics of degree <= lmax at one direction, in harmonic_indices order.
inline std::vector<double> sph_harm_row(int d, int lmax, const std::array<double, 3>& theta) {
    std::vector<double> row;
    if (d == 2) {
        row.reserve(2 * lmax + 1);
        row.push_back(1.0 / std::sqrt(2.0 * kPi));
        const double phi = std::atan2(theta[1], theta[0]);
        for (int l = 1; l <= lmax; ++l) {
            row.push_back(std::cos(l * phi) / std::sqrt(kPi));
            row.push_back(std::sin(l * phi) / std::sqrt(kPi));
        }
        return row;
    }
    row.reserve((lmax + 1) * (lmax + 1));
    const std::vector<double> p = detail::legendre_normalized(lmax, theta[2]);
    const double phi = std::atan2(theta[1], theta[0]);
    const double sq2 = std::sqrt(2.0);
    for (int l = 0; l <= lmax; ++l) {
        for (int m = -l; m <= l; ++m) {
            const int ma = std::abs(m);
            const double plm = p[l * (l + 1) / 2 + ma];
            if (m == 0) row.push_back(plm);
            else if (m > 0) row.push_back(sq2 * plm * std::cos(ma * phi));
            else row.push_back(sq2 * plm * std::sin(ma * phi));
        }
    }
    return row;
}

// Jacobi-Anger check:
//   int_S e^{-i lambda w.theta} Y_l^m(theta) dtheta
//     = (2 pi)^{d/2} (-i)^l Y_l^m(w) j_l^d(lambda).
// The (-i)^l goes with the e^{-i...} kernel: the plane-wave expansion of
// e^{-iz cos a} carries (-i)^n J_n, not i^n (easily checked at d=2, l=1 by
// expanding both sides to first order in z).
// Relative residual between the quadrature LHS and the closed-form RHS,
// maximized over a fixed set of directions w.
inline double jacobi_anger_residual(int d, HarmonicIndex idx, double lambda,
                                    std::span<const std::array<double, 3>> nodes,
                                    std::span<const double> weights) {
    if (nodes.size() != weights.size())
        throw std::invalid_argument("jacobi_anger_residual: node/weight size mismatch");
    // Quadrature must integrate harmonics well beyond degree 2l.
    const double degree_proxy = d == 2 ? static_cast<double>(nodes.size())
                                       : std::sqrt(2.0 * static_cast<double>(nodes.size()));
    if (degree_proxy < 2.0 * idx.l + 8.0)
        throw std::length_error("jacobi_anger_residual: quadrature degree too low");

    std::vector<std::array<double, 3>> omegas;
    if (d == 2) {
        omegas = {{1.0, 0.0, 0.0}, {0.6, 0.8, 0.0}, {-0.28, 0.96, 0.0}, {0.0, -1.0, 0.0}};
    } else {
        omegas = {{0.0, 0.0, 1.0}, {0.6, 0.0, 0.8}, {0.36, 0.48, 0.8}, {-0.408248290463863, 0.816496580927726, -0.408248290463863}};
    }
    const cplx i(0.0, 1.0);
    const cplx il = std::pow(-i, idx.l);
    const double jl = sph_bessel(d, idx.l, lambda);
    double worst = 0.0;
    for (const auto& w : omegas) {
        cplx lhs(0.0, 0.0);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const double dot = w[0] * nodes[k][0] + w[1] * nodes[k][1] + w[2] * nodes[k][2];
            lhs += weights[k] * std::exp(-i * lambda * dot) * real_sph_harm(d, idx, nodes[k]);
        }
        const cplx rhs = std::pow(2.0 * kPi, d / 2.0) * il * real_sph_harm(d, idx, w) * jl;
        const double scale = std::max(std::abs(rhs), std::pow(2.0 * kPi, d / 2.0) * 0.05);
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    return worst;
}

}  // namespace htrw::special
