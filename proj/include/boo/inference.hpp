#ifndef BOO_INFERENCE_HPP
#define BOO_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "boo/common.hpp"

namespace boo::inference {

/// Lower-tail standard normal inverse CDF.
inline double normal_quantile(double q) {
    require(q > 0.0 && q < 1.0, "normal_quantile: q must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), q);
}

/// Two-sided critical value z_{alpha/2}.
inline double z_value(double alpha) {
    require(alpha > 0.0 && alpha < 1.0, "z_value: alpha must lie in (0,1)");
    return normal_quantile(1.0 - alpha / 2.0);
}

/// (1-alpha) quantile of chi-square with dof degrees of freedom.
inline double chi_square_quantile(long dof, double alpha) {
    require(dof >= 1, "chi_square_quantile: dof must be >= 1");
    require(alpha > 0.0 && alpha < 1.0, "chi_square_quantile: alpha must lie in (0,1)");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(
                                     static_cast<double>(dof)),
                                 1.0 - alpha);
}

struct IntervalSet {
    Vector centers;
    Vector half_widths;
    double level = 0.0; // alpha
};

inline IntervalSet coordinate_intervals(const Vector& mean, const Vector& covariance_diag,
                                        double alpha) {
    require(mean.size() == covariance_diag.size(), "coordinate_intervals: shape mismatch");
    require(alpha > 0.0 && alpha < 1.0, "coordinate_intervals: alpha must lie in (0,1)");
    require((covariance_diag.array() >= 0.0).all(),
            "coordinate_intervals: negative variance");
    IntervalSet out;
    out.centers = mean;
    out.half_widths = z_value(alpha) * covariance_diag.array().sqrt();
    out.level = alpha;
    return out;
}

inline bool interval_contains(const IntervalSet& set, Eigen::Index j, double value) {
    require(j >= 0 && j < set.centers.size(), "interval_contains: coordinate out of range");
    return std::abs(value - set.centers[j]) <= set.half_widths[j];
}

/// Ellipsoid membership (theta-c)' Omega (theta-c) <= chi2_{p,alpha}.
inline bool wald_set_contains(const Vector& center, const Matrix& precision, double alpha,
                              const Vector& theta) {
    require(center.size() == theta.size(), "wald_set_contains: shape mismatch");
    require(precision.rows() == center.size() && precision.cols() == center.size(),
            "wald_set_contains: precision shape mismatch");
    Vector d = theta - center;
    double q = d.dot(precision * d);
    return q <= chi_square_quantile(center.size(), alpha);
}

namespace detail {

inline Matrix inverse_sqrt_spd(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw numeric_error("inverse_sqrt_spd: matrix not positive definite");
    return es.operatorInverseSqrt();
}

inline double spectral_norm_sym(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw numeric_error("spectral_norm_sym: eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace detail

/// Total-variation bound between N(m1, prec1^{-1}) and N(m2, prec2^{-1}):
/// 0.5 * sqrt(||prec1^{1/2}(m1-m2)||^2 + ||prec2^{-1/2} prec1 prec2^{-1/2} - I||_F^2),
/// valid while the second factor is <= 0.684 in operator norm; 1 otherwise.
inline double gaussian_tv_bound(const Vector& mean1, const Matrix& prec1,
                                const Vector& mean2, const Matrix& prec2) {
    require(mean1.size() == mean2.size(), "gaussian_tv_bound: mean shape mismatch");
    require(prec1.rows() == mean1.size() && prec2.rows() == mean1.size(),
            "gaussian_tv_bound: precision shape mismatch");
    const Eigen::Index p = mean1.size();
    Matrix isq2 = detail::inverse_sqrt_spd(prec2);
    Eigen::LLT<Matrix> llt1(prec1);
    if (llt1.info() != Eigen::Success)
        throw numeric_error("gaussian_tv_bound: prec1 not positive definite");
    Matrix b = isq2 * prec1 * isq2 - Matrix::Identity(p, p);
    b = 0.5 * (b + b.transpose());
    if (detail::spectral_norm_sym(b) > 0.684) return 1.0;
    Vector d = mean1 - mean2;
    double mean_term = d.dot(prec1 * d);
    return std::min(1.0, 0.5 * std::sqrt(mean_term + b.squaredNorm()));
}

struct BvmDiagnostics {
    double mean_align = 0.0;      // ||F^{1/2}(theta_t - mle)||
    double precision_align = 0.0; // ||Omega^{-1/2} F Omega^{-1/2} - I||_2
    double tv_bound = 0.0;
    double eps_app = 0.0;
    std::string fisher_mode = "theta_star"; // or "mle_plug_in" when F uses the estimate
};

/// eps_app = sqrt(log^2(t/t0) * (p log t + x)^2 / t).
inline double approximation_rate(long t, long t0, long p, double x) {
    require(t0 >= 1, "approximation_rate: t0 must be >= 1");
    require(t > t0, "approximation_rate: t must exceed t0");
    require(p >= 1 && x >= 0.0, "approximation_rate: invalid p or x");
    double lt = std::log(static_cast<double>(t) / static_cast<double>(t0));
    double inner = static_cast<double>(p) * std::log(static_cast<double>(t)) + x;
    return std::abs(lt) * inner / std::sqrt(static_cast<double>(t));
}

inline BvmDiagnostics bvm_diagnostics(const Vector& boo_mean, const Matrix& boo_precision,
                                      const Vector& mle, const Matrix& fisher_star,
                                      long t, long t0, double x,
                                      const std::string& fisher_mode = "theta_star") {
    const Eigen::Index p = boo_mean.size();
    require(mle.size() == p, "bvm_diagnostics: mle shape mismatch");
    require(fisher_star.rows() == p && fisher_star.cols() == p,
            "bvm_diagnostics: fisher shape mismatch");
    Eigen::LLT<Matrix> lltF(fisher_star);
    if (lltF.info() != Eigen::Success)
        throw numeric_error("bvm_diagnostics: singular fisher matrix");

    BvmDiagnostics out;
    out.fisher_mode = fisher_mode;
    Vector d = boo_mean - mle;
    out.mean_align = std::sqrt(std::max(0.0, d.dot(fisher_star * d)));
    Matrix isq = detail::inverse_sqrt_spd(boo_precision);
    Matrix a = isq * fisher_star * isq - Matrix::Identity(p, p);
    a = 0.5 * (a + a.transpose());
    out.precision_align = detail::spectral_norm_sym(a);
    out.tv_bound = gaussian_tv_bound(boo_mean, boo_precision, mle, fisher_star);
    out.eps_app = approximation_rate(t, t0, p, x);
    return out;
}

} // namespace boo::inference

#endif
