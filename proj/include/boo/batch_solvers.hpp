#ifndef BOO_BATCH_SOLVERS_HPP
#define BOO_BATCH_SOLVERS_HPP

#include <limits>
#include <span>
#include <vector>

#include "boo/glm.hpp"

namespace boo::batch {

struct NewtonSettings {
    int max_iter = 100;
    double grad_tol = 1e-8;
    double step_shrink = 0.5;
    double min_step = 1e-12;
    double armijo = 1e-4;
};

struct SolveReport {
    Vector estimate;
    int iterations = 0;
    double final_grad_norm = 0.0;
    bool converged = false;
    std::vector<double> objective_trace;
};

namespace detail {

/// Damped Newton on f(theta) = sum_s ell_s(theta) + 0.5 (theta-m0)' P0 (theta-m0).
/// Pass p0 = nullptr for the unpenalized problem.
inline SolveReport newton(glm::Link link,
                          std::span<const glm::Observation> obs,
                          const Vector* m0, const Matrix* p0,
                          const Vector& start,
                          const NewtonSettings& s) {
    const Eigen::Index p = start.size();
    auto objective = [&](const Vector& th) {
        double f = 0.0;
        for (const auto& o : obs) f += glm::loss(link, o, th);
        if (p0) {
            Vector d = th - *m0;
            f += 0.5 * d.dot(*p0 * d);
        }
        return f;
    };

    SolveReport rep;
    Vector theta = start;
    rep.objective_trace.push_back(objective(theta));

    Vector grad(p);
    Matrix hess(p, p);
    for (rep.iterations = 0; rep.iterations < s.max_iter; ++rep.iterations) {
        grad.setZero();
        hess.setZero();
        for (const auto& o : obs) {
            double eta = o.x.dot(theta);
            grad += (glm::mean_function(link, eta) - o.y) * o.x;
            hess.selfadjointView<Eigen::Lower>().rankUpdate(o.x, glm::variance_function(link, eta));
        }
        hess = hess.selfadjointView<Eigen::Lower>();
        if (p0) {
            grad += *p0 * (theta - *m0);
            hess += *p0;
        }
        rep.final_grad_norm = grad.norm();
        if (!std::isfinite(rep.final_grad_norm)) break;
        if (rep.final_grad_norm <= s.grad_tol) {
            rep.converged = true;
            break;
        }

        Eigen::LLT<Matrix> llt(hess);
        if (llt.info() != Eigen::Success) {
            double ridge = 1e-10 * (1.0 + hess.trace() / static_cast<double>(p));
            llt.compute(hess + ridge * Matrix::Identity(p, p));
            if (llt.info() != Eigen::Success) break;
        }
        Vector dir = llt.solve(-grad);
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) break;

        double f0 = rep.objective_trace.back();
        bool accepted = false;
        // Near the optimum the predicted decrease falls below the objective's
        // floating-point resolution, so a sufficient-decrease test only reads
        // rounding noise; take the plain Newton step there instead of stalling.
        // The resolution of an n-term sum carries an extra ~sqrt(n) rounding
        // factor on top of the single-value ulp.
        const double fp_floor =
            16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0)) *
            (1.0 + std::sqrt(static_cast<double>(obs.size())));
        if (-slope <= fp_floor) {
            Vector cand = theta + dir;
            double f1 = objective(cand);
            if (std::isfinite(f1) && f1 <= f0 + fp_floor) {
                theta = cand;
                rep.objective_trace.push_back(f1);
                accepted = true;
            }
        } else {
            double step = 1.0;
            while (step >= s.min_step) {
                Vector cand = theta + step * dir;
                double f1 = objective(cand);
                if (std::isfinite(f1) && f1 <= f0 + s.armijo * step * slope) {
                    theta = cand;
                    rep.objective_trace.push_back(f1);
                    accepted = true;
                    break;
                }
                step *= s.step_shrink;
            }
        }
        if (!accepted) break;
        if (!theta.allFinite() || theta.norm() > 1e12) break;
    }
    rep.estimate = theta;
    return rep;
}

} // namespace detail

/// argmin over theta of sum_s ell_s(theta) + 0.5 ||P0^{1/2}(theta - m0)||^2.
inline SolveReport map_estimate(glm::Link link,
                                std::span<const glm::Observation> obs,
                                const Vector& prior_mean, const Matrix& prior_precision,
                                const NewtonSettings& settings = {}) {
    const Eigen::Index p = prior_mean.size();
    require(p >= 1, "map_estimate: empty prior mean");
    require(prior_precision.rows() == p && prior_precision.cols() == p,
            "map_estimate: prior precision shape mismatch");
    for (const auto& o : obs) require(o.x.size() == p, "map_estimate: observation dimension mismatch");
    if (obs.empty()) {
        SolveReport rep;
        rep.estimate = prior_mean;
        rep.converged = true;
        rep.objective_trace.push_back(0.0);
        return rep;
    }
    return detail::newton(link, obs, &prior_mean, &prior_precision, prior_mean, settings);
}

inline SolveReport mle_estimate(glm::Link link,
                                std::span<const glm::Observation> obs,
                                const NewtonSettings& settings = {},
                                const Vector* start = nullptr) {
    require(!obs.empty(), "mle_estimate: needs at least one observation");
    const Eigen::Index p = obs.front().x.size();
    for (const auto& o : obs) require(o.x.size() == p, "mle_estimate: observation dimension mismatch");
    Vector init = start ? *start : Vector::Zero(p);
    require(init.size() == p, "mle_estimate: start dimension mismatch");
    return detail::newton(link, obs, nullptr, nullptr, init, settings);
}

} // namespace boo::batch

#endif
