#pragma once

// Spin-glass structural quantities: the path-count root Lambda and the
// asymptotic expected entropy of a critical point at loss level Lambda*E.

#include <cmath>
#include <numbers>
#include <string>

#include "flatnet/errors.hpp"
#include "flatnet/net.hpp"
#include "flatnet/quadrature.hpp"

namespace flatnet {

/// Lambda = (n_0 P)^(1/L), P = n_1 n_2 ... n_L (output included), L weight layers.
inline double lambda_from_arch(const Architecture& arch) {
    arch.validate();
    const auto widths = arch.widths();
    const double L = static_cast<double>(arch.layer_count());
    double log_paths = 0.0;
    for (auto w : widths) log_paths += std::log(static_cast<double>(w));
    return std::exp(log_paths / L);
}

struct EntropyParams {
    double lambda = 2.0;
    int layers = 2;
    double rho = 0.5;
    double sigma = 1.0;
    double loss_level = 0.0;

    void validate() const {
        if (!(lambda > 1.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be > 1");
        if (layers < 2) throw InvalidArgument("layers must be >= 2");
        if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (0, 1)");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
        if (!std::isfinite(loss_level)) throw InvalidArgument("loss level must be finite");
    }
};

struct EntropyBreakdown {
    double rho_term = 0.0;       ///< -(Lambda - 1) log rho
    double log_term = 0.0;       ///< (Lambda - 1)/2 log(Lambda / (2 (Lambda - 1) L (L - 1)))
    double integral_term = 0.0;  ///< -(Lambda - 1)/pi * integral
    double integral = 0.0;       ///< int_{-sqrt2}^{sqrt2} log|t* - t| sqrt(2 - t^2) dt
    double integral_error = 0.0;
    double t_star = 0.0;
    double total = 0.0;
};

/// Location of the log singularity: sigma sqrt(Lambda / (Lambda - 1)) E / rho.
inline double entropy_t_star(const EntropyParams& p) {
    return p.sigma * std::sqrt(p.lambda / (p.lambda - 1.0)) * p.loss_level / p.rho;
}

/// int_{-sqrt2}^{sqrt2} log|t* - t| sqrt(2 - t^2) dt. The panel is split at t*
/// when it lies inside, the log singularity being integrable. The integral is
/// even in t*, so |t*| is integrated to make the symmetry exact.
inline QuadratureResult semicircle_log_integral(double t_star, double abs_tol = 1e-8) {
    const double r = std::numbers::sqrt2;
    t_star = std::abs(t_star);
    auto f = [t_star](double t) {
        const double w = 2.0 - t * t;
        return w > 0.0 ? std::log(std::abs(t_star - t)) * std::sqrt(w) : 0.0;
    };
    const double breaks[] = {t_star};
    const bool singular = std::abs(t_star) <= r;
    return integrate_adaptive(f, -r, r, abs_tol, singular ? std::span<const double>(breaks) : std::span<const double>{});
}

inline EntropyBreakdown expected_entropy(const EntropyParams& p) {
    p.validate();
    const double lm1 = p.lambda - 1.0;
    const double L = static_cast<double>(p.layers);
    EntropyBreakdown b;
    b.t_star = entropy_t_star(p);
    b.rho_term = -lm1 * std::log(p.rho);
    b.log_term = 0.5 * lm1 * std::log(p.lambda / (2.0 * lm1 * L * (L - 1.0)));
    const auto q = semicircle_log_integral(b.t_star);
    b.integral = q.value;
    b.integral_error = q.error;
    b.integral_term = -lm1 / std::numbers::pi * q.value;
    b.total = b.rho_term + b.log_term + b.integral_term;
    return b;
}

}  // namespace flatnet
