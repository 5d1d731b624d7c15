#ifndef BOO_POSTERIOR_HPP
#define BOO_POSTERIOR_HPP

#include <cmath>
#include <utility>
#include <vector>

#include <json.hpp>

#include "boo/batch_solvers.hpp"
#include "boo/glm.hpp"

namespace boo::posterior {

/// Default warm-start length ceil(M * (p * ln(max(p,3)) + x)).
inline long default_t0(long p, double x, double M) {
    require(p >= 1, "default_t0: p must be >= 1");
    require(x >= 0.0, "default_t0: x must be >= 0");
    require(M > 0.0, "default_t0: M must be > 0");
    double v = M * (static_cast<double>(p) * std::log(static_cast<double>(std::max<long>(p, 3))) + x);
    return static_cast<long>(std::ceil(v));
}

/// N(mean, precision^{-1}); precision_inv is maintained alongside so the
/// online update is a rank-1 recursion instead of a fresh inversion.
struct GaussianPosterior {
    Vector mean;
    Matrix precision;
    Matrix precision_inv;
};

inline Matrix spd_inverse(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw numeric_error("matrix not positive definite");
    return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

inline double logdet_spd(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw numeric_error("logdet of non-PD matrix");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline GaussianPosterior make_posterior(Vector mean, Matrix precision) {
    require(precision.rows() == mean.size() && precision.cols() == mean.size(),
            "make_posterior: shape mismatch");
    GaussianPosterior post;
    post.precision_inv = spd_inverse(precision);
    post.mean = std::move(mean);
    post.precision = std::move(precision);
    return post;
}

/// (Omega + scale * u u')^{-1} from inv = Omega^{-1}.
inline Matrix sherman_morrison_downdate(const Matrix& inv, const Vector& u, double scale) {
    require(inv.rows() == inv.cols() && inv.rows() == u.size(),
            "sherman_morrison_downdate: shape mismatch");
    require(scale >= 0.0, "sherman_morrison_downdate: scale must be >= 0");
    if (scale == 0.0) return inv;
    Vector w = inv * u;
    double denom = 1.0 + scale * u.dot(w);
    if (!(denom > 0.0)) throw numeric_error("rank-1 inverse update: non-positive denominator");
    return inv - (scale / denom) * (w * w.transpose());
}

/// One second-order streaming step. The precision gains the rank-1 curvature
/// term first, and the mean moves by the NEW inverse: theta <- theta - Omega_new^{-1} g.
inline void online_update(GaussianPosterior& post, const Vector& g, double h_scale, const Vector& x) {
    require(g.size() == post.mean.size() && x.size() == post.mean.size(),
            "online_update: shape mismatch");
    require(h_scale >= 0.0, "online_update: negative curvature scale");
    if (h_scale != 0.0) {
        post.precision_inv = sherman_morrison_downdate(post.precision_inv, x, h_scale);
        post.precision += h_scale * (x * x.transpose());
    }
    post.mean.noalias() -= post.precision_inv * g;
}

struct DeviationDiagnostics {
    double v_t = 0.0;
    double delta_norm = 0.0;
};

struct BooOptions {
    long refactor_interval = 1000;
    bool record_warm_trace = false;
    batch::NewtonSettings newton;
};

/// Posterior checkpoint: everything needed to resume the online phase.
struct Snapshot {
    long p = 0;
    long t = 0;
    Vector mean;
    Matrix precision;
};

inline nlohmann::json snapshot_to_json(const Snapshot& s) {
    std::vector<double> prec(static_cast<std::size_t>(s.p) * static_cast<std::size_t>(s.p));
    for (long i = 0; i < s.p; ++i)
        for (long j = 0; j < s.p; ++j)
            prec[static_cast<std::size_t>(i * s.p + j)] = s.precision(i, j);
    return nlohmann::json{{"p", s.p},
                          {"t", s.t},
                          {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                          {"precision_row_major", prec}};
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
    Snapshot s;
    s.p = j.at("p").get<long>();
    s.t = j.at("t").get<long>();
    auto mean = j.at("mean").get<std::vector<double>>();
    auto prec = j.at("precision_row_major").get<std::vector<double>>();
    require(s.p >= 1, "snapshot: p must be >= 1");
    require(static_cast<long>(mean.size()) == s.p, "snapshot: mean length mismatch");
    require(static_cast<long>(prec.size()) == s.p * s.p, "snapshot: precision length mismatch");
    s.mean = Eigen::Map<const Vector>(mean.data(), s.p);
    s.precision.resize(s.p, s.p);
    for (long i = 0; i < s.p; ++i)
        for (long j2 = 0; j2 < s.p; ++j2)
            s.precision(i, j2) = prec[static_cast<std::size_t>(i * s.p + j2)];
    return s;
}

/// Warm-start batch phase for t <= t0, then one-pass online updates.
class BooEstimator {
public:
    BooEstimator(glm::Link link, Eigen::Index p, long t0,
                 Vector prior_mean = Vector(), Matrix prior_precision = Matrix(),
                 BooOptions opts = BooOptions())
        : link_(link), p_(p), t0_(t0), opts_(opts) {
        require(p >= 1, "BooEstimator: p must be >= 1");
        require(t0 >= 0, "BooEstimator: t0 must be >= 0");
        prior_mean_ = prior_mean.size() == 0 ? Vector::Zero(p) : std::move(prior_mean);
        prior_precision_ = prior_precision.size() == 0 ? Matrix::Identity(p, p)
                                                       : std::move(prior_precision);
        require(prior_mean_.size() == p, "BooEstimator: prior mean dimension mismatch");
        require(prior_precision_.rows() == p && prior_precision_.cols() == p,
                "BooEstimator: prior precision shape mismatch");
        if (t0_ == 0) {
            post_ = make_posterior(prior_mean_, prior_precision_);
            warmed_ = true;
        } else {
            warm_buffer_.reserve(static_cast<std::size_t>(t0_));
        }
    }

    /// Resume from a checkpoint; the estimator is already in the online phase.
    BooEstimator(glm::Link link, const Snapshot& snap, BooOptions opts = BooOptions())
        : link_(link), p_(snap.p), t0_(0), opts_(opts) {
        require(snap.t >= 0, "BooEstimator: snapshot step negative");
        prior_mean_ = snap.mean;
        prior_precision_ = snap.precision;
        post_ = make_posterior(snap.mean, snap.precision);
        warmed_ = true;
        t_ = snap.t;
    }

    void ingest(const glm::Observation& obs) {
        if (failed_) throw numeric_error("BooEstimator: estimator is in a failed state");
        glm::check_observation(link_, obs, p_);
        ++t_;
        if (t_ <= t0_) {
            warm_buffer_.push_back(obs);
            if (opts_.record_warm_trace && t_ < t0_) {
                auto rep = batch::map_estimate(link_, warm_buffer_, prior_mean_, prior_precision_,
                                               opts_.newton);
                warm_trace_.push_back(rep.estimate);
            }
            if (t_ == t0_) warm_start_finalize();
            return;
        }
        Vector g = glm::gradient(link_, obs, post_.mean);
        double h = glm::hessian_scale(link_, obs, post_.mean);
        online_update(post_, g, h, obs.x);
        ++online_steps_;
        if (opts_.refactor_interval > 0 && online_steps_ % opts_.refactor_interval == 0)
            refactorize();
    }

    /// Batch MAP over the buffered observations, plus the curvature sum at the
    /// MAP point; called automatically by ingest at t = t0.
    void warm_start_finalize() {
        require(t_ == t0_ && t0_ >= 1, "warm_start_finalize: called before buffer is full");
        require(!warmed_, "warm_start_finalize: already finalized");
        auto rep = batch::map_estimate(link_, warm_buffer_, prior_mean_, prior_precision_,
                                       opts_.newton);
        if (!rep.converged) {
            failed_ = true;
            throw numeric_error("warm_start_finalize: MAP solver did not converge");
        }
        Matrix prec = prior_precision_;
        for (const auto& o : warm_buffer_) {
            double h = glm::hessian_scale(link_, o, rep.estimate);
            prec += h * (o.x * o.x.transpose());
        }
        try {
            post_ = make_posterior(rep.estimate, std::move(prec));
        } catch (const numeric_error&) {
            failed_ = true;
            throw;
        }
        warmed_ = true;
        warm_buffer_.clear();
        warm_buffer_.shrink_to_fit();
    }

    long t() const { return t_; }
    long t0() const { return t0_; }
    Eigen::Index dim() const { return p_; }
    bool warmed() const { return warmed_; }
    bool failed() const { return failed_; }
    glm::Link link() const { return link_; }
    const Vector& prior_mean() const { return prior_mean_; }
    const Matrix& prior_precision() const { return prior_precision_; }
    std::size_t warm_buffer_size() const { return warm_buffer_.size(); }
    const std::vector<Vector>& warm_trace() const { return warm_trace_; }

    const GaussianPosterior& posterior() const {
        require(warmed_, "posterior: not available during the warm-start phase");
        return post_;
    }

    DeviationDiagnostics diagnostics(const Vector& theta_star) const {
        require(warmed_, "diagnostics: not available during the warm-start phase");
        require(theta_star.size() == p_, "diagnostics: dimension mismatch");
        Vector d = post_.mean - theta_star;
        DeviationDiagnostics out;
        out.v_t = d.dot(post_.precision * d);
        out.delta_norm = d.norm();
        return out;
    }

    Snapshot snapshot() const {
        require(warmed_, "snapshot: not available during the warm-start phase");
        return Snapshot{static_cast<long>(p_), t_, post_.mean, post_.precision};
    }

    /// Replace the maintained inverse by a fresh factorization and validate.
    void refactorize() {
        require(warmed_, "refactorize: no posterior yet");
        Matrix fresh;
        try {
            fresh = spd_inverse(post_.precision);
        } catch (const numeric_error&) {
            failed_ = true;
            throw numeric_error("refactorize: precision lost positive definiteness");
        }
        post_.precision_inv = std::move(fresh);
        double drift = (post_.precision * post_.precision_inv
                        - Matrix::Identity(p_, p_)).norm();
        if (!(drift <= 1e-8)) {
            failed_ = true;
            throw numeric_error("refactorize: inverse consistency lost");
        }
    }

private:
    glm::Link link_;
    Eigen::Index p_;
    long t0_ = 0;
    long t_ = 0;
    long online_steps_ = 0;
    bool warmed_ = false;
    bool failed_ = false;
    Vector prior_mean_;
    Matrix prior_precision_;
    BooOptions opts_;
    std::vector<glm::Observation> warm_buffer_;
    std::vector<Vector> warm_trace_;
    GaussianPosterior post_;
};

} // namespace boo::posterior

#endif
