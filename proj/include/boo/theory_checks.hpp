#ifndef BOO_THEORY_CHECKS_HPP
#define BOO_THEORY_CHECKS_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <json.hpp>

#include "boo/posterior.hpp"

namespace boo::checks {

struct StepRecord {
    long t = 0;
    double v_t = 0.0;
    double h_quad = 0.0; // <H_t, outer(Delta_{t-1})>
    double g_dot = 0.0;  // <g_t, Delta_{t-1}>
    double g_quad = 0.0; // <g_t, Omega_t^{-1} g_t>
};

struct RecursionTrace {
    std::vector<StepRecord> steps;
    double max_residual = 0.0;
    double max_inverse_disagreement = 0.0; // maintained vs freshly factorized g_quad
};

inline nlohmann::json to_json(const RecursionTrace& r) {
    return nlohmann::json{{"check", "recursion_identity"},
                          {"steps", r.steps.size()},
                          {"max_residual", r.max_residual},
                          {"max_inverse_disagreement", r.max_inverse_disagreement},
                          {"holds", r.max_residual <= 1e-8}};
}

/// Replays a stream through the estimator and verifies, step by step, that
/// V_t = V_{t-1} + <H_t, outer(Delta)> - 2 <g_t, Delta> + <g_t, Omega_t^{-1} g_t>.
inline RecursionTrace check_recursion_identity(glm::Link link,
                                               const std::vector<glm::Observation>& stream,
                                               long t0, const Vector& theta_star,
                                               Vector prior_mean = Vector(),
                                               Matrix prior_precision = Matrix()) {
    require(!stream.empty(), "check_recursion_identity: empty stream");
    const Eigen::Index p = stream.front().x.size();
    require(theta_star.size() == p, "check_recursion_identity: theta_star dimension mismatch");
    posterior::BooEstimator est(link, p, t0, std::move(prior_mean), std::move(prior_precision));

    RecursionTrace trace;
    for (const auto& obs : stream) {
        if (est.t() + 1 <= t0) {
            est.ingest(obs);
            continue;
        }
        const auto& post = est.posterior();
        Vector delta = post.mean - theta_star;
        double v_prev = delta.dot(post.precision * delta);
        Vector g = glm::gradient(link, obs, post.mean);
        double h = glm::hessian_scale(link, obs, post.mean);
        double xd = obs.x.dot(delta);

        StepRecord rec;
        rec.h_quad = h * xd * xd;
        rec.g_dot = g.dot(delta);
        est.ingest(obs);
        rec.t = est.t();
        const auto& now = est.posterior();
        rec.g_quad = g.dot(now.precision_inv * g);
        double g_quad_fresh = g.dot(posterior::spd_inverse(now.precision) * g);
        trace.max_inverse_disagreement =
            std::max(trace.max_inverse_disagreement, std::abs(rec.g_quad - g_quad_fresh));
        Vector delta_now = now.mean - theta_star;
        rec.v_t = delta_now.dot(now.precision * delta_now);
        double residual = std::abs(rec.v_t - v_prev - rec.h_quad + 2.0 * rec.g_dot - rec.g_quad);
        trace.max_residual = std::max(trace.max_residual, residual);
        trace.steps.push_back(rec);
    }
    return trace;
}

struct EllipticReport {
    double lhs = 0.0; // sum of <Omega_s^{-1}, H_s> over the online phase
    double rhs = 0.0; // logdet(Omega_t) - logdet(Omega_t0)
    double max_inverse_disagreement = 0.0;
    bool holds = false;
};

inline nlohmann::json to_json(const EllipticReport& r) {
    return nlohmann::json{{"check", "elliptic_potential"},
                          {"lhs", r.lhs},
                          {"rhs", r.rhs},
                          {"max_inverse_disagreement", r.max_inverse_disagreement},
                          {"holds", r.holds}};
}

inline EllipticReport check_elliptic_potential(glm::Link link,
                                               const std::vector<glm::Observation>& stream,
                                               long t0,
                                               Vector prior_mean = Vector(),
                                               Matrix prior_precision = Matrix()) {
    require(static_cast<long>(stream.size()) > t0,
            "check_elliptic_potential: online phase is empty");
    const Eigen::Index p = stream.front().x.size();
    posterior::BooEstimator est(link, p, t0, std::move(prior_mean), std::move(prior_precision));

    EllipticReport rep;
    double logdet_start = 0.0;
    for (const auto& obs : stream) {
        if (est.t() + 1 <= t0) {
            est.ingest(obs);
            if (est.t() == t0) logdet_start = posterior::logdet_spd(est.posterior().precision);
            continue;
        }
        if (est.t() == t0 && t0 == 0)
            logdet_start = posterior::logdet_spd(est.posterior().precision);
        double h = glm::hessian_scale(link, obs, est.posterior().mean);
        est.ingest(obs);
        const auto& now = est.posterior();
        double quad_maintained = h * obs.x.dot(now.precision_inv * obs.x);
        double quad_fresh = h * obs.x.dot(posterior::spd_inverse(now.precision) * obs.x);
        rep.max_inverse_disagreement =
            std::max(rep.max_inverse_disagreement, std::abs(quad_maintained - quad_fresh));
        rep.lhs += quad_maintained;
    }
    rep.rhs = posterior::logdet_spd(est.posterior().precision) - logdet_start;
    rep.holds = rep.lhs <= rep.rhs + 1e-9;
    return rep;
}

struct DyadicConstants {
    double d0 = 1.0;
    double d1 = 1.0;
    double d2 = 1.0;
    double d3 = 1.0;
};

struct DyadicReport {
    bool premise_ok = true;
    long premise_failed_t = -1;
    bool h0_ok = false;          // X_{tau0} <= D0 (p + x)
    bool h1_ok = false;          // sum_{r=s}^t a_r <= D1 s^{-1/2} for all s <= t
    long h1_failed_s = -1;
    bool h2_ok = false;          // sum b_r <= D2 p log t + D3 (x + log t)
    long h2_failed_t = -1;
    double k_theory = 0.0;       // chased constant 2.5 (D0 + D2 + 2 D3)
    double k_observed = 0.0;     // max_t X_t / (p log t + x)
    double envelope_max_ratio = 0.0;
    double m0_observed = 0.0;    // tau0 / (p + x)
    bool conclusion_ok = false;  // X_t <= k_theory (p log t + x) for all t
};

inline nlohmann::json to_json(const DyadicReport& r) {
    return nlohmann::json{{"check", "dyadic_bound"},
                          {"premise_ok", r.premise_ok},
                          {"premise_failed_t", r.premise_failed_t},
                          {"h0_ok", r.h0_ok},
                          {"h1_ok", r.h1_ok},
                          {"h1_failed_s", r.h1_failed_s},
                          {"h2_ok", r.h2_ok},
                          {"h2_failed_t", r.h2_failed_t},
                          {"k_theory", r.k_theory},
                          {"k_observed", r.k_observed},
                          {"envelope_max_ratio", r.envelope_max_ratio},
                          {"m0_observed", r.m0_observed},
                          {"conclusion_ok", r.conclusion_ok}};
}

/// x_trace[i] = X_{tau0 + i}; a_seq[i] = a_{tau0 + i} for i < m;
/// b_seq[i] = b_{tau0 + 1 + i} for i < m, where m = x_trace.size() - 1.
/// Verifies the recursion premise X_t <= X_{t-1} + a_{t-1} X_{t-1}^{3/2} + b_t,
/// the three hypothesis inequalities, and the conclusion with the chased
/// constant K = 2.5 (D0 + D2 + 2 D3). An upper envelope driven by the same
/// (a, b) from the hypothesis-level start D0 (p + x) is also reported.
inline DyadicReport check_dyadic_bound(const std::vector<double>& x_trace,
                                       const std::vector<double>& a_seq,
                                       const std::vector<double>& b_seq,
                                       long tau0, long p, double x,
                                       const DyadicConstants& c) {
    require(x_trace.size() >= 2, "check_dyadic_bound: trace too short");
    require(tau0 >= 1 && p >= 1 && x >= 0.0, "check_dyadic_bound: invalid tau0, p, or x");
    const std::size_t m = x_trace.size() - 1;
    require(a_seq.size() >= m && b_seq.size() >= m,
            "check_dyadic_bound: sequence lengths must cover the trace");
    for (double v : x_trace) require(v >= 0.0, "check_dyadic_bound: X must be nonnegative");
    for (std::size_t i = 0; i < m; ++i)
        require(a_seq[i] >= 0.0, "check_dyadic_bound: a must be nonnegative");

    DyadicReport rep;
    rep.m0_observed = static_cast<double>(tau0) / (static_cast<double>(p) + x);

    for (std::size_t i = 1; i <= m; ++i) {
        double prev = x_trace[i - 1];
        double allowed = prev + a_seq[i - 1] * prev * std::sqrt(prev) + b_seq[i - 1];
        if (x_trace[i] > allowed + 1e-12 * (1.0 + std::abs(allowed))) {
            rep.premise_ok = false;
            rep.premise_failed_t = tau0 + static_cast<long>(i);
            break;
        }
    }

    double px = static_cast<double>(p) + x;
    rep.h0_ok = x_trace[0] <= c.d0 * px + 1e-12;

    // H1: max over t >= s of sum_{r=s}^{t} a_r <= D1 s^{-1/2}; with prefix sums
    // the max over t is a suffix max of the prefix series.
    {
        std::vector<double> prefix(m + 1, 0.0);
        for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + a_seq[i];
        std::vector<double> suffix_max(m + 1, -std::numeric_limits<double>::infinity());
        suffix_max[m] = prefix[m];
        for (std::size_t i = m; i-- > 0;) suffix_max[i] = std::max(prefix[i], suffix_max[i + 1]);
        rep.h1_ok = true;
        for (std::size_t i = 0; i < m; ++i) {
            long s = tau0 + static_cast<long>(i);
            double tail = suffix_max[i + 1] - prefix[i]; // max_t sum_{r=s}^{t} a_r
            if (tail > c.d1 / std::sqrt(static_cast<double>(s)) + 1e-12) {
                rep.h1_ok = false;
                rep.h1_failed_s = s;
                break;
            }
        }
    }

    {
        rep.h2_ok = true;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += b_seq[i];
            long t = tau0 + static_cast<long>(i) + 1;
            double cap = c.d2 * static_cast<double>(p) * std::log(static_cast<double>(t))
                         + c.d3 * (x + std::log(static_cast<double>(t)));
            if (acc > cap + 1e-12) {
                rep.h2_ok = false;
                rep.h2_failed_t = t;
                break;
            }
        }
    }

    rep.k_theory = 2.5 * (c.d0 + c.d2 + 2.0 * c.d3);
    rep.conclusion_ok = true;
    double env = c.d0 * px;
    for (std::size_t i = 0; i <= m; ++i) {
        long t = tau0 + static_cast<long>(i);
        if (i > 0) env = env + a_seq[i - 1] * env * std::sqrt(env) + std::max(0.0, b_seq[i - 1]);
        double denom = static_cast<double>(p) * std::log(static_cast<double>(t)) + x;
        if (denom <= 0.0) continue;
        rep.k_observed = std::max(rep.k_observed, x_trace[i] / denom);
        rep.envelope_max_ratio = std::max(rep.envelope_max_ratio, env / denom);
        if (x_trace[i] > rep.k_theory * denom + 1e-12) rep.conclusion_ok = false;
    }
    return rep;
}

struct RegularityReport {
    double max_x_norm = 0.0;
    double k_ex = 0.0;                // (1 v r) * max ||x||
    double eig_slope_min = 0.0;       // min over checkpoints of lambda_min(F_t)/t
    double lipschitz_ratio_max = 0.0; // max ||H(theta)-H(theta')|| / ||theta-theta'||
    double lipschitz_cap = 0.0;       // max ||x||^3
    double sandwich_k_emp = 0.0;      // max |log gen-eig| / ||h||
    double sandwich_k_cap = 0.0;      // sqrt(6) * max ||x||
    bool sandwich_ok = false;
    double hessian_opnorm_max = 0.0;
    double hessian_opnorm_cap = 0.0;  // 0.25 * max ||x||^2
};

inline nlohmann::json to_json(const RegularityReport& r) {
    return nlohmann::json{{"check", "logistic_regularity"},
                          {"max_x_norm", r.max_x_norm},
                          {"k_ex", r.k_ex},
                          {"eig_slope_min", r.eig_slope_min},
                          {"lipschitz_ratio_max", r.lipschitz_ratio_max},
                          {"lipschitz_cap", r.lipschitz_cap},
                          {"sandwich_k_emp", r.sandwich_k_emp},
                          {"sandwich_k_cap", r.sandwich_k_cap},
                          {"sandwich_ok", r.sandwich_ok},
                          {"hessian_opnorm_max", r.hessian_opnorm_max},
                          {"hessian_opnorm_cap", r.hessian_opnorm_cap}};
}

/// Spot checks of the logistic regularity surrogates over the locality ball
/// Theta_r = {theta : ||theta - theta*|| <= r}: curvature growth, Hessian
/// Lipschitz ratio, and the e^{+-K||h||} curvature sandwich.
inline RegularityReport check_logistic_regularity(const std::vector<Vector>& covariates,
                                                  const Vector& theta_star, double r,
                                                  std::uint64_t seed = 1,
                                                  int n_samples = 16) {
    require(!covariates.empty(), "check_logistic_regularity: no covariates");
    require(r >= 0.0, "check_logistic_regularity: negative radius");
    const Eigen::Index p = theta_star.size();
    for (const auto& x : covariates)
        require(x.size() == p, "check_logistic_regularity: dimension mismatch");
    const long n = static_cast<long>(covariates.size());

    RegularityReport rep;
    for (const auto& x : covariates) rep.max_x_norm = std::max(rep.max_x_norm, x.norm());
    rep.k_ex = std::max(1.0, r) * rep.max_x_norm;
    rep.lipschitz_cap = rep.max_x_norm * rep.max_x_norm * rep.max_x_norm;
    rep.sandwich_k_cap = std::sqrt(6.0) * rep.max_x_norm;
    rep.hessian_opnorm_cap = 0.25 * rep.max_x_norm * rep.max_x_norm;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw_in_ball = [&]() {
        Vector u(p);
        for (Eigen::Index i = 0; i < p; ++i) u[i] = normal(rng);
        double nrm = u.norm();
        if (nrm == 0.0) return Vector(theta_star);
        double radius = r * std::pow(unif(rng), 1.0 / static_cast<double>(p));
        return Vector(theta_star + (radius / nrm) * u);
    };

    // Curvature growth with a fresh theta-bar per observation.
    {
        Matrix f = Matrix::Zero(p, p);
        rep.eig_slope_min = std::numeric_limits<double>::infinity();
        for (long s = 0; s < n; ++s) {
            const Vector& xs = covariates[static_cast<std::size_t>(s)];
            Vector th = draw_in_ball();
            double h = glm::variance_function(glm::Link::Logistic, xs.dot(th));
            f += h * (xs * xs.transpose());
            rep.hessian_opnorm_max =
                std::max(rep.hessian_opnorm_max, h * xs.squaredNorm());
            bool checkpoint = (s + 1 == n) || ((s + 1) % std::max<long>(1, n / 8) == 0);
            if (checkpoint && s + 1 >= std::max<long>(p, 2)) {
                Eigen::SelfAdjointEigenSolver<Matrix> es(f);
                rep.eig_slope_min = std::min(
                    rep.eig_slope_min, es.eigenvalues().minCoeff() / static_cast<double>(s + 1));
            }
        }
        if (!std::isfinite(rep.eig_slope_min)) rep.eig_slope_min = 0.0;
    }

    auto fisher_at = [&](const Vector& th) {
        Matrix f = Matrix::Zero(p, p);
        for (const auto& xs : covariates)
            f += glm::variance_function(glm::Link::Logistic, xs.dot(th)) * (xs * xs.transpose());
        return f;
    };

    rep.sandwich_ok = true;
    for (int k = 0; k < n_samples; ++k) {
        Vector th1 = draw_in_ball();
        Vector th2 = draw_in_ball();
        double dist = (th1 - th2).norm();
        for (const auto& xs : covariates) {
            double h1 = glm::variance_function(glm::Link::Logistic, xs.dot(th1));
            double h2 = glm::variance_function(glm::Link::Logistic, xs.dot(th2));
            if (dist > 1e-12)
                rep.lipschitz_ratio_max = std::max(
                    rep.lipschitz_ratio_max, std::abs(h1 - h2) * xs.squaredNorm() / dist);
        }
        if (dist > 1e-12) {
            Matrix f1 = fisher_at(th1);
            Matrix f2 = fisher_at(th2);
            Eigen::SelfAdjointEigenSolver<Matrix> es1(f1);
            if (es1.eigenvalues().minCoeff() > 1e-12) {
                Matrix isq = es1.operatorInverseSqrt();
                Matrix mid = isq * f2 * isq;
                Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (mid + mid.transpose()));
                double lo = es.eigenvalues().minCoeff();
                double hi = es.eigenvalues().maxCoeff();
                if (lo > 0.0) {
                    double k_needed =
                        std::max(std::abs(std::log(lo)), std::abs(std::log(hi))) / dist;
                    rep.sandwich_k_emp = std::max(rep.sandwich_k_emp, k_needed);
                }
            }
        }
    }
    rep.sandwich_ok = rep.sandwich_k_emp <= rep.sandwich_k_cap + 1e-9;
    return rep;
}

} // namespace boo::checks

#endif
