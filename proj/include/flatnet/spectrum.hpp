#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "flatnet/errors.hpp"
#include "flatnet/matrix.hpp"

namespace flatnet {

struct SpectrumReport {
    std::vector<double> eigenvalues;  ///< ascending
    std::size_t index = 0;            ///< #{mu < -tolerance}
    double tolerance = 0.0;
    std::size_t sweeps = 0;
};

/// Default negative-eigenvalue tolerance 1e-8 (1 + |trace| / d).
inline double default_index_tolerance(const Matrix& h) {
    const double d = static_cast<double>(std::max<std::size_t>(h.rows(), 1));
    return 1e-8 * (1.0 + std::abs(h.trace()) / d);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Stops when
/// the off-diagonal Frobenius norm drops below 1e-10 ||A||_F.
inline std::vector<double> symmetric_eigenvalues(Matrix a, std::size_t* sweeps_out = nullptr) {
    const std::size_t n = a.rows();
    const double scale = a.frobenius();
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
        return std::sqrt(s);
    };
    std::size_t sweeps = 0;
    constexpr std::size_t max_sweeps = 100;
    while (scale > 0.0 && off_norm() > 1e-10 * scale && sweeps < max_sweeps) {
        ++sweeps;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    if (sweeps_out) *sweeps_out = sweeps;
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Eigen-report of a symmetric matrix (asymmetry up to 1e-6 relative is
/// symmetrized away). tolerance < 0 selects default_index_tolerance.
inline SpectrumReport spectrum(const Matrix& h, double tolerance = -1.0) {
    if (!h.square()) throw InvalidArgument("spectrum needs a square matrix");
    const double scale = h.max_abs();
    if (h.asymmetry() > 1e-6 * std::max(scale, 1e-300))
        throw InvalidArgument("spectrum needs a symmetric matrix (relative asymmetry above 1e-6)");
    Matrix sym = h;
    sym.symmetrize();
    SpectrumReport rep;
    rep.tolerance = tolerance < 0.0 ? default_index_tolerance(sym) : tolerance;
    rep.eigenvalues = symmetric_eigenvalues(std::move(sym), &rep.sweeps);
    rep.index = static_cast<std::size_t>(
        std::count_if(rep.eigenvalues.begin(), rep.eigenvalues.end(), [&](double mu) { return mu < -rep.tolerance; }));
    return rep;
}

}  // namespace flatnet
