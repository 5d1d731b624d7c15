#ifndef BOO_BASELINES_HPP
#define BOO_BASELINES_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "boo/batch_solvers.hpp"
#include "boo/glm.hpp"

namespace boo::baselines {

/// zeta_t = zeta0 * t^{-alpha}.
inline double step_size(long t, double step0, double step_exp) {
    require(t >= 1, "step_size: t must be >= 1");
    return step0 * std::pow(static_cast<double>(t), -step_exp);
}

struct SgdConfig {
    double step0 = 0.5;
    double step_exp = 0.501;
    long t0 = 0;             // 0 = plain SGD/ASGD; > 0 buffers a warm start
    Vector init;             // theta_0, default zero; doubles as warm prior mean
    Matrix prior_precision;  // warm MAP prior, default identity
    batch::NewtonSettings newton;
};

/// SGD iterate, running average (ASGD), and the plug-in sandwich accumulators
/// F = sum_t b''(x_t' theta_{t-1}) x_t x_t' and V = sum_t g_t g_t', both
/// evaluated at the pre-step iterate. With t0 > 0 the estimator warm starts
/// from the batch MAP exactly as the posterior-mode estimator does; the
/// warm-phase sandwich terms are evaluated once at the MAP point and the
/// average covers post-warm iterates only.
class SgdFamilyEstimator {
public:
    SgdFamilyEstimator(glm::Link link, Eigen::Index p, SgdConfig cfg = SgdConfig())
        : link_(link), p_(p), cfg_(std::move(cfg)) {
        require(p >= 1, "SgdFamilyEstimator: p must be >= 1");
        require(cfg_.t0 >= 0, "SgdFamilyEstimator: t0 must be >= 0");
        if (cfg_.init.size() == 0) cfg_.init = Vector::Zero(p);
        if (cfg_.prior_precision.size() == 0) cfg_.prior_precision = Matrix::Identity(p, p);
        require(cfg_.init.size() == p, "SgdFamilyEstimator: init dimension mismatch");
        require(cfg_.prior_precision.rows() == p && cfg_.prior_precision.cols() == p,
                "SgdFamilyEstimator: prior precision shape mismatch");
        iterate_ = cfg_.init;
        sum_ = Vector::Zero(p);
        f_acc_ = Matrix::Zero(p, p);
        v_acc_ = Matrix::Zero(p, p);
        if (cfg_.t0 > 0) warm_buffer_.reserve(static_cast<std::size_t>(cfg_.t0));
    }

    void sgd_step(const glm::Observation& obs) {
        glm::check_observation(link_, obs, p_);
        ++t_;
        if (t_ <= cfg_.t0) {
            warm_buffer_.push_back(obs);
            if (t_ == cfg_.t0) finalize_warm_start();
            return;
        }
        double eta = obs.x.dot(iterate_);
        Vector g = (glm::mean_function(link_, eta) - obs.y) * obs.x;
        f_acc_ += glm::variance_function(link_, eta) * (obs.x * obs.x.transpose());
        v_acc_ += g * g.transpose();
        iterate_ -= step_size(t_, cfg_.step0, cfg_.step_exp) * g;
        sum_ += iterate_;
        ++averaged_;
    }

    long t() const { return t_; }
    long t0() const { return cfg_.t0; }
    bool warmed() const { return t_ >= cfg_.t0; }
    const Vector& iterate() const { return iterate_; }

    /// Mean of the iterates produced so far (post-warm for t0 > 0); before any
    /// step this is the current iterate itself.
    Vector average() const {
        if (averaged_ == 0) return iterate_;
        return sum_ / static_cast<double>(averaged_);
    }

    const Matrix& fisher_acc() const { return f_acc_; }
    const Matrix& score_acc() const { return v_acc_; }

    /// F^{-1} V F^{-1}.
    Matrix sandwich_covariance() const {
        Eigen::LLT<Matrix> llt(f_acc_);
        if (llt.info() != Eigen::Success)
            throw numeric_error("sandwich_covariance: singular curvature sum; "
                                "stream too short to accumulate curvature");
        Matrix c = llt.solve(llt.solve(v_acc_).transpose());
        return 0.5 * (c + c.transpose());
    }

private:
    void finalize_warm_start() {
        auto rep = batch::map_estimate(link_, warm_buffer_, cfg_.init, cfg_.prior_precision,
                                       cfg_.newton);
        if (!rep.converged)
            throw numeric_error("SgdFamilyEstimator: warm-start MAP did not converge");
        iterate_ = rep.estimate;
        for (const auto& o : warm_buffer_) {
            double eta = o.x.dot(iterate_);
            Vector g = (glm::mean_function(link_, eta) - o.y) * o.x;
            f_acc_ += glm::variance_function(link_, eta) * (o.x * o.x.transpose());
            v_acc_ += g * g.transpose();
        }
        warm_buffer_.clear();
        warm_buffer_.shrink_to_fit();
    }

    glm::Link link_;
    Eigen::Index p_;
    SgdConfig cfg_;
    long t_ = 0;
    long averaged_ = 0;
    Vector iterate_;
    Vector sum_;
    Matrix f_acc_;
    Matrix v_acc_;
    std::vector<glm::Observation> warm_buffer_;
};

} // namespace boo::baselines

#endif
