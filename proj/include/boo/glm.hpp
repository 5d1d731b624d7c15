#ifndef BOO_GLM_HPP
#define BOO_GLM_HPP

#include <cmath>

#include "boo/common.hpp"

namespace boo::glm {

enum class Link { Logistic, Poisson };

/// One streaming observation: response y and covariate vector x.
struct Observation {
    double y = 0.0;
    Vector x;
};

/// Cumulant b(eta) and derivatives. Logistic uses the overflow-safe form
/// b(eta) = max(eta, 0) + log1p(exp(-|eta|)).
inline double cumulant(Link link, double eta) {
    switch (link) {
        case Link::Logistic:
            return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
        case Link::Poisson:
            return std::exp(eta);
    }
    throw contract_error("unknown link");
}

inline double mean_function(Link link, double eta) {
    switch (link) {
        case Link::Logistic:
            return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                              : std::exp(eta) / (1.0 + std::exp(eta));
        case Link::Poisson:
            return std::exp(eta);
    }
    throw contract_error("unknown link");
}

inline double variance_function(Link link, double eta) {
    switch (link) {
        case Link::Logistic: {
            double s = mean_function(Link::Logistic, eta);
            return s * (1.0 - s);
        }
        case Link::Poisson:
            return std::exp(eta);
    }
    throw contract_error("unknown link");
}

inline double third_derivative(Link link, double eta) {
    switch (link) {
        case Link::Logistic: {
            double s = mean_function(Link::Logistic, eta);
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
        case Link::Poisson:
            return std::exp(eta);
    }
    throw contract_error("unknown link");
}

inline bool valid_response(Link link, double y) {
    if (!std::isfinite(y)) return false;
    switch (link) {
        case Link::Logistic:
            return y == 0.0 || y == 1.0;
        case Link::Poisson:
            return y >= 0.0 && y == std::floor(y);
    }
    return false;
}

inline void check_observation(Link link, const Observation& obs, Eigen::Index p) {
    require(obs.x.size() == p, "observation dimension mismatch");
    require_finite(obs.x, "covariate");
    if (!valid_response(link, obs.y)) throw contract_error("invalid response for link");
}

/// Negative log-likelihood ell(theta) = b(x'theta) - y * x'theta.
inline double loss(Link link, const Observation& obs, const Vector& theta) {
    require(obs.x.size() == theta.size(), "loss: dimension mismatch");
    require_finite(obs.x, "covariate");
    require_finite(theta, "theta");
    double eta = obs.x.dot(theta);
    return cumulant(link, eta) - obs.y * eta;
}

/// grad ell(theta) = (b'(x'theta) - y) x.
inline Vector gradient(Link link, const Observation& obs, const Vector& theta) {
    require(obs.x.size() == theta.size(), "gradient: dimension mismatch");
    require_finite(obs.x, "covariate");
    require_finite(theta, "theta");
    double eta = obs.x.dot(theta);
    return (mean_function(link, eta) - obs.y) * obs.x;
}

/// The Hessian is b''(x'theta) * x x'; only the scalar factor is returned so
/// callers can exploit the rank-1 structure.
inline double hessian_scale(Link link, const Observation& obs, const Vector& theta) {
    require(obs.x.size() == theta.size(), "hessian_scale: dimension mismatch");
    require_finite(obs.x, "covariate");
    require_finite(theta, "theta");
    return variance_function(link, obs.x.dot(theta));
}

} // namespace boo::glm

#endif
