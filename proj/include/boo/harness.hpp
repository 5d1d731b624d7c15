#ifndef BOO_HARNESS_HPP
#define BOO_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "boo/baselines.hpp"
#include "boo/datagen.hpp"
#include "boo/inference.hpp"
#include "boo/posterior.hpp"

namespace boo::harness {

enum class EstimatorKind { Boo, Boo0, Sgd, Asgd, WSgd, WAsgd, Mle };

inline std::string estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::Boo: return "boo";
        case EstimatorKind::Boo0: return "boo0";
        case EstimatorKind::Sgd: return "sgd";
        case EstimatorKind::Asgd: return "asgd";
        case EstimatorKind::WSgd: return "wsgd";
        case EstimatorKind::WAsgd: return "wasgd";
        case EstimatorKind::Mle: return "mle";
    }
    throw contract_error("unknown estimator kind");
}

inline EstimatorKind estimator_from_name(const std::string& s) {
    if (s == "boo") return EstimatorKind::Boo;
    if (s == "boo0") return EstimatorKind::Boo0;
    if (s == "sgd") return EstimatorKind::Sgd;
    if (s == "asgd") return EstimatorKind::Asgd;
    if (s == "wsgd") return EstimatorKind::WSgd;
    if (s == "wasgd") return EstimatorKind::WAsgd;
    if (s == "mle") return EstimatorKind::Mle;
    throw contract_error("unknown estimator name: " + s);
}

struct ExperimentConfig {
    datagen::DesignSpec design;   // per-repetition seed is derived from `seed`
    datagen::TruthSpec truth;     // theta_star defaults to make_theta_star(p)
    std::string design_token = "identity"; // identity|normalized|correlated|normalized_correlated
    std::vector<EstimatorKind> estimators = {EstimatorKind::Boo, EstimatorKind::Boo0,
                                             EstimatorKind::Sgd, EstimatorKind::Asgd,
                                             EstimatorKind::Mle};
    long repetitions = 500;
    std::vector<long> checkpoints; // empty = log grid of 50 points in [max(t0,1), n]
    double alpha = 0.05;
    std::string output_path;
    std::string output_format = "csv";
    std::uint64_t seed = 1;
    int threads = 0;   // 0 = hardware concurrency
    long t0 = -1;      // -1 = default_t0(p, t0_x, t0_M)
    double t0_x = 5.0;
    double t0_M = 1.0;
    double step0 = 0.5;
    double step_exp = 0.501;
};

struct EstimatorResult {
    std::string name;
    std::vector<double> mean_errors;  // parallel to checkpoints; NaN if never recorded
    std::vector<long> error_counts;   // reps contributing per checkpoint
    Vector coverage;     // per coordinate, empty when no interval is defined
    Vector mean_length;
    long failures = 0;
    long rep_count = 0;

    bool operator==(const EstimatorResult& o) const {
        auto vec_eq = [](const std::vector<double>& a, const std::vector<double>& b) {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i) {
                bool na = std::isnan(a[i]), nb = std::isnan(b[i]);
                if (na != nb || (!na && a[i] != b[i])) return false;
            }
            return true;
        };
        return name == o.name && vec_eq(mean_errors, o.mean_errors)
               && error_counts == o.error_counts && coverage == o.coverage
               && mean_length == o.mean_length && failures == o.failures
               && rep_count == o.rep_count;
    }
};

struct ExperimentResult {
    std::string model;
    std::string design_token;
    long p = 0;
    long n = 0;
    long t0 = 0;
    double alpha = 0.05;
    double initial_offset = 0.0;
    std::uint64_t seed = 0;
    long repetitions = 0;
    std::vector<long> checkpoints;
    std::vector<EstimatorResult> estimators;
    std::uint64_t stream_hash_rep0 = 0;
    double duration_seconds = 0.0; // run metadata; excluded from emission and equality

    bool operator==(const ExperimentResult& o) const {
        return model == o.model && design_token == o.design_token && p == o.p && n == o.n
               && t0 == o.t0 && alpha == o.alpha && initial_offset == o.initial_offset
               && seed == o.seed && repetitions == o.repetitions && checkpoints == o.checkpoints
               && estimators == o.estimators && stream_hash_rep0 == o.stream_hash_rep0;
    }
};

inline std::vector<long> log_checkpoint_grid(long lo, long hi, int points = 50) {
    require(lo >= 1 && hi >= lo, "log_checkpoint_grid: need 1 <= lo <= hi");
    std::vector<long> out;
    double llo = std::log(static_cast<double>(lo));
    double lhi = std::log(static_cast<double>(hi));
    for (int i = 0; i < points; ++i) {
        double f = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
        auto t = static_cast<long>(std::llround(std::exp(llo + f * (lhi - llo))));
        out.push_back(std::min(hi, std::max(lo, t)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Fills derived fields: theta_star, t0, checkpoints, correlated sigma.
inline void resolve_config(ExperimentConfig& cfg) {
    require(cfg.design.p >= 1 && cfg.design.n >= 1, "config: p and n must be >= 1");
    require(cfg.repetitions >= 1, "config: repetitions must be >= 1");
    require(cfg.alpha > 0.0 && cfg.alpha < 1.0, "config: alpha must lie in (0,1)");
    require(!cfg.estimators.empty(), "config: estimator list is empty");
    if (cfg.truth.theta_star.size() == 0)
        cfg.truth.theta_star = datagen::make_theta_star(cfg.design.p);
    require(cfg.truth.theta_star.size() == cfg.design.p, "config: theta_star dimension mismatch");
    if (cfg.t0 < 0) cfg.t0 = posterior::default_t0(cfg.design.p, cfg.t0_x, cfg.t0_M);
    if (cfg.design_token == "identity") {
        cfg.design.covariate_style = datagen::CovariateStyle::GaussianIdentity;
    } else if (cfg.design_token == "normalized") {
        cfg.design.covariate_style = datagen::CovariateStyle::NormalizedGaussian;
    } else if (cfg.design_token == "correlated") {
        cfg.design.covariate_style = datagen::CovariateStyle::GaussianCovariance;
        if (!cfg.design.sigma)
            cfg.design.sigma = datagen::make_correlated_sigma(cfg.design.p,
                                                              derive_seed(cfg.seed, 0x51d3a));
    } else if (cfg.design_token == "normalized_correlated") {
        cfg.design.covariate_style = datagen::CovariateStyle::NormalizedGaussian;
        if (!cfg.design.sigma)
            cfg.design.sigma = datagen::make_correlated_sigma(cfg.design.p,
                                                              derive_seed(cfg.seed, 0x51d3a));
    } else {
        throw contract_error("config: unknown design token: " + cfg.design_token);
    }
    if (cfg.checkpoints.empty())
        cfg.checkpoints = log_checkpoint_grid(
            std::min(std::max<long>(cfg.t0, 1), cfg.design.n), cfg.design.n);
    std::sort(cfg.checkpoints.begin(), cfg.checkpoints.end());
    cfg.checkpoints.erase(std::unique(cfg.checkpoints.begin(), cfg.checkpoints.end()),
                          cfg.checkpoints.end());
    require(cfg.checkpoints.front() >= 1 && cfg.checkpoints.back() <= cfg.design.n,
            "config: checkpoints must lie in [1, n]");
}

namespace detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RepEstimatorOutcome {
    std::vector<double> errors; // per checkpoint; NaN = not recorded
    Vector covered;             // indicator per coordinate (size 0 when no interval)
    Vector lengths;
    bool failed = false;
};

struct RepOutcome {
    std::vector<RepEstimatorOutcome> per_estimator;
    std::uint64_t stream_hash = 0;
};

inline void record_interval(RepEstimatorOutcome& out, const Vector& center,
                            const Vector& cov_diag, double alpha, const Vector& theta_star) {
    Vector safe = cov_diag.cwiseMax(0.0); // rounding guard on PSD diagonals
    auto set = inference::coordinate_intervals(center, safe, alpha);
    const Eigen::Index p = center.size();
    out.covered.resize(p);
    out.lengths.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        out.covered[j] = inference::interval_contains(set, j, theta_star[j]) ? 1.0 : 0.0;
        out.lengths[j] = 2.0 * set.half_widths[j];
    }
}

inline RepEstimatorOutcome run_boo(const ExperimentConfig& cfg,
                                   const std::vector<glm::Observation>& stream, long t0) {
    RepEstimatorOutcome out;
    out.errors.assign(cfg.checkpoints.size(), kNaN);
    Vector theta0 = datagen::theta0_from_offset(cfg.truth.theta_star,
                                                cfg.truth.initial_offset, cfg.seed);
    try {
        posterior::BooEstimator est(cfg.design.model, cfg.design.p, t0, theta0);
        std::size_t next_cp = 0;
        for (long t = 1; t <= cfg.design.n; ++t) {
            est.ingest(stream[static_cast<std::size_t>(t - 1)]);
            while (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] == t) {
                if (est.warmed())
                    out.errors[next_cp] = (est.posterior().mean - cfg.truth.theta_star).norm();
                ++next_cp;
            }
        }
        const auto& post = est.posterior();
        record_interval(out, post.mean, post.precision_inv.diagonal(), cfg.alpha,
                        cfg.truth.theta_star);
    } catch (const numeric_error&) {
        out.failed = true;
    }
    return out;
}

/// One SGD pass serves the iterate (sgd/wsgd), the average (asgd/wasgd), and
/// the plug-in interval; which outputs are kept is decided by the caller.
struct SgdPass {
    RepEstimatorOutcome iterate_out;
    RepEstimatorOutcome average_out;
    bool failed = false;
};

inline SgdPass run_sgd(const ExperimentConfig& cfg,
                       const std::vector<glm::Observation>& stream, long t0,
                       bool want_interval) {
    SgdPass pass;
    pass.iterate_out.errors.assign(cfg.checkpoints.size(), kNaN);
    pass.average_out.errors.assign(cfg.checkpoints.size(), kNaN);
    baselines::SgdConfig scfg;
    scfg.step0 = cfg.step0;
    scfg.step_exp = cfg.step_exp;
    scfg.t0 = t0;
    scfg.init = datagen::theta0_from_offset(cfg.truth.theta_star, cfg.truth.initial_offset,
                                            cfg.seed);
    try {
        baselines::SgdFamilyEstimator est(cfg.design.model, cfg.design.p, scfg);
        std::size_t next_cp = 0;
        for (long t = 1; t <= cfg.design.n; ++t) {
            est.sgd_step(stream[static_cast<std::size_t>(t - 1)]);
            while (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] == t) {
                if (est.warmed()) {
                    pass.iterate_out.errors[next_cp] =
                        (est.iterate() - cfg.truth.theta_star).norm();
                    pass.average_out.errors[next_cp] =
                        (est.average() - cfg.truth.theta_star).norm();
                }
                ++next_cp;
            }
        }
        if (want_interval) {
            Matrix cov = est.sandwich_covariance();
            record_interval(pass.iterate_out, est.average(), cov.diagonal(), cfg.alpha,
                            cfg.truth.theta_star);
        }
    } catch (const numeric_error&) {
        pass.failed = true;
    }
    return pass;
}

inline RepEstimatorOutcome run_mle(const ExperimentConfig& cfg,
                                   const std::vector<glm::Observation>& stream) {
    RepEstimatorOutcome out;
    out.errors.assign(cfg.checkpoints.size(), kNaN);
    try {
        Vector start = Vector::Zero(cfg.design.p);
        Vector last;
        for (std::size_t k = 0; k < cfg.checkpoints.size(); ++k) {
            long t = cfg.checkpoints[k];
            if (t < cfg.design.p) continue; // curvature cannot be full rank yet
            std::span<const glm::Observation> prefix(stream.data(),
                                                     static_cast<std::size_t>(t));
            auto rep = batch::mle_estimate(cfg.design.model, prefix, {}, &start);
            if (!rep.converged) throw numeric_error("mle did not converge");
            start = rep.estimate;
            out.errors[k] = (rep.estimate - cfg.truth.theta_star).norm();
            if (t == cfg.design.n) last = rep.estimate;
        }
        if (last.size() == 0) {
            std::span<const glm::Observation> all(stream.data(), stream.size());
            auto rep = batch::mle_estimate(cfg.design.model, all, {}, &start);
            if (!rep.converged) throw numeric_error("mle did not converge");
            last = rep.estimate;
        }
        Matrix fisher = Matrix::Zero(cfg.design.p, cfg.design.p);
        for (const auto& o : stream)
            fisher += glm::hessian_scale(cfg.design.model, o, last) * (o.x * o.x.transpose());
        Matrix cov = posterior::spd_inverse(fisher);
        record_interval(out, last, cov.diagonal(), cfg.alpha, cfg.truth.theta_star);
    } catch (const numeric_error&) {
        out.failed = true;
    }
    return out;
}

inline RepOutcome run_repetition(const ExperimentConfig& cfg, long rep_index) {
    datagen::DesignSpec design = cfg.design;
    design.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep_index));
    auto stream = datagen::sample_stream(design, cfg.truth);
    RepOutcome out;
    out.stream_hash = datagen::stream_hash(stream);

    bool shared_sgd_done = false, shared_wsgd_done = false;
    SgdPass sgd_pass, wsgd_pass;
    for (EstimatorKind kind : cfg.estimators) {
        switch (kind) {
            case EstimatorKind::Boo:
                out.per_estimator.push_back(run_boo(cfg, stream, cfg.t0));
                break;
            case EstimatorKind::Boo0:
                out.per_estimator.push_back(run_boo(cfg, stream, 0));
                break;
            case EstimatorKind::Sgd:
            case EstimatorKind::Asgd: {
                if (!shared_sgd_done) {
                    sgd_pass = run_sgd(cfg, stream, 0, true);
                    shared_sgd_done = true;
                }
                auto o = kind == EstimatorKind::Sgd ? sgd_pass.iterate_out
                                                    : sgd_pass.average_out;
                o.failed = o.failed || sgd_pass.failed;
                out.per_estimator.push_back(std::move(o));
                break;
            }
            case EstimatorKind::WSgd:
            case EstimatorKind::WAsgd: {
                if (!shared_wsgd_done) {
                    wsgd_pass = run_sgd(cfg, stream, cfg.t0, true);
                    shared_wsgd_done = true;
                }
                auto o = kind == EstimatorKind::WSgd ? wsgd_pass.iterate_out
                                                     : wsgd_pass.average_out;
                o.failed = o.failed || wsgd_pass.failed;
                out.per_estimator.push_back(std::move(o));
                break;
            }
            case EstimatorKind::Mle:
                out.per_estimator.push_back(run_mle(cfg, stream));
                break;
        }
    }
    if (datagen::stream_hash(stream) != out.stream_hash)
        throw numeric_error("run_repetition: shared stream was mutated");
    return out;
}

} // namespace detail

inline ExperimentResult run_experiment(ExperimentConfig cfg) {
    auto t_begin = std::chrono::steady_clock::now();
    resolve_config(cfg);

    const long reps = cfg.repetitions;
    std::vector<detail::RepOutcome> slots(static_cast<std::size_t>(reps));
    unsigned hw = std::thread::hardware_concurrency();
    long want = cfg.threads > 0 ? cfg.threads : static_cast<long>(hw == 0 ? 1 : hw);
    long n_threads = std::max<long>(1, std::min<long>(want, reps));

    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            long r = next.fetch_add(1);
            if (r >= reps) break;
            try {
                slots[static_cast<std::size_t>(r)] = detail::run_repetition(cfg, r);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (long i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    ExperimentResult res;
    res.model = cfg.design.model == glm::Link::Logistic ? "logistic" : "poisson";
    res.design_token = cfg.design_token;
    res.p = cfg.design.p;
    res.n = cfg.design.n;
    res.t0 = cfg.t0;
    res.alpha = cfg.alpha;
    res.initial_offset = cfg.truth.initial_offset;
    res.seed = cfg.seed;
    res.repetitions = reps;
    res.checkpoints = cfg.checkpoints;
    res.stream_hash_rep0 = slots[0].stream_hash;

    const std::size_t n_cp = cfg.checkpoints.size();
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        EstimatorResult er;
        er.name = estimator_name(cfg.estimators[e]);
        er.mean_errors.assign(n_cp, 0.0);
        er.error_counts.assign(n_cp, 0);
        Vector cov_sum, len_sum;
        long interval_count = 0;
        for (long r = 0; r < reps; ++r) {
            const auto& o = slots[static_cast<std::size_t>(r)].per_estimator[e];
            if (o.failed) {
                ++er.failures;
                continue;
            }
            ++er.rep_count;
            for (std::size_t k = 0; k < n_cp; ++k) {
                if (std::isfinite(o.errors[k])) {
                    er.mean_errors[k] += o.errors[k];
                    ++er.error_counts[k];
                }
            }
            if (o.covered.size() > 0) {
                if (cov_sum.size() == 0) {
                    cov_sum = Vector::Zero(o.covered.size());
                    len_sum = Vector::Zero(o.covered.size());
                }
                cov_sum += o.covered;
                len_sum += o.lengths;
                ++interval_count;
            }
        }
        for (std::size_t k = 0; k < n_cp; ++k)
            er.mean_errors[k] = er.error_counts[k] > 0
                                    ? er.mean_errors[k] / static_cast<double>(er.error_counts[k])
                                    : detail::kNaN;
        if (interval_count > 0) {
            er.coverage = cov_sum / static_cast<double>(interval_count);
            er.mean_length = len_sum / static_cast<double>(interval_count);
        }
        res.estimators.push_back(std::move(er));
    }
    res.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return res;
}

enum class SweepKind { WarmStartM, InitialOffset };

inline std::vector<ExperimentResult> sensitivity_sweep(const ExperimentConfig& base,
                                                       SweepKind kind,
                                                       const std::vector<double>& values) {
    require(!values.empty(), "sensitivity_sweep: empty sweep");
    std::vector<ExperimentResult> out;
    out.reserve(values.size());
    for (double v : values) {
        ExperimentConfig cfg = base;
        if (kind == SweepKind::WarmStartM) {
            require(v > 0.0, "sensitivity_sweep: M must be > 0");
            cfg.t0_M = v;
            cfg.t0 = -1; // re-derive from M
        } else {
            require(v >= 0.0, "sensitivity_sweep: offset must be >= 0");
            cfg.truth.initial_offset = v;
        }
        out.push_back(run_experiment(std::move(cfg)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Emission. CSV schema: estimator,t,metric,value,rep_count with metric one of
// l2_error, coverage.J, length.J (J = 1-based coordinate); rows grouped by
// estimator in config order, l2_error by ascending t, then coverage, then
// length. JSON mirrors the same rows plus a metadata object.
// ---------------------------------------------------------------------------

struct EmittedRow {
    std::string estimator;
    long t = 0;
    std::string metric;
    double value = 0.0;
    long rep_count = 0;
};

inline std::vector<EmittedRow> result_rows(const ExperimentResult& res) {
    std::vector<EmittedRow> rows;
    for (const auto& er : res.estimators) {
        for (std::size_t k = 0; k < res.checkpoints.size(); ++k) {
            if (er.error_counts[k] == 0) continue;
            rows.push_back({er.name, res.checkpoints[k], "l2_error", er.mean_errors[k],
                            er.error_counts[k]});
        }
        for (Eigen::Index j = 0; j < er.coverage.size(); ++j)
            rows.push_back({er.name, res.n, "coverage." + std::to_string(j + 1),
                            er.coverage[j], er.rep_count});
        for (Eigen::Index j = 0; j < er.mean_length.size(); ++j)
            rows.push_back({er.name, res.n, "length." + std::to_string(j + 1),
                            er.mean_length[j], er.rep_count});
    }
    return rows;
}

inline void write_csv(std::ostream& os, const ExperimentResult& res) {
    os << "estimator,t,metric,value,rep_count\n";
    for (const auto& row : result_rows(res))
        os << row.estimator << "," << row.t << "," << row.metric << ","
           << datagen::format_double(row.value) << "," << row.rep_count << "\n";
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline nlohmann::json result_to_json(const ExperimentResult& res) {
    nlohmann::json meta{{"model", res.model},
                        {"design", res.design_token},
                        {"p", res.p},
                        {"n", res.n},
                        {"t0", res.t0},
                        {"alpha", res.alpha},
                        {"initial_offset", res.initial_offset},
                        {"seed", res.seed},
                        {"repetitions", res.repetitions},
                        {"checkpoints", res.checkpoints},
                        {"stream_hash_rep0", hash_hex(res.stream_hash_rep0)}};
    nlohmann::json ests = nlohmann::json::array();
    for (const auto& er : res.estimators)
        ests.push_back({{"name", er.name},
                        {"failures", er.failures},
                        {"rep_count", er.rep_count},
                        {"has_intervals", er.coverage.size() > 0}});
    meta["estimators"] = ests;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result_rows(res))
        rows.push_back({{"estimator", row.estimator},
                        {"t", row.t},
                        {"metric", row.metric},
                        {"value", row.value},
                        {"rep_count", row.rep_count}});
    return nlohmann::json{{"metadata", meta}, {"rows", rows}};
}

inline ExperimentResult result_from_json(const nlohmann::json& j) {
    const auto& meta = j.at("metadata");
    ExperimentResult res;
    res.model = meta.at("model").get<std::string>();
    res.design_token = meta.at("design").get<std::string>();
    res.p = meta.at("p").get<long>();
    res.n = meta.at("n").get<long>();
    res.t0 = meta.at("t0").get<long>();
    res.alpha = meta.at("alpha").get<double>();
    res.initial_offset = meta.at("initial_offset").get<double>();
    res.seed = meta.at("seed").get<std::uint64_t>();
    res.repetitions = meta.at("repetitions").get<long>();
    res.checkpoints = meta.at("checkpoints").get<std::vector<long>>();
    res.stream_hash_rep0 =
        std::stoull(meta.at("stream_hash_rep0").get<std::string>(), nullptr, 16);

    std::vector<std::string> order;
    for (const auto& e : meta.at("estimators")) {
        EstimatorResult er;
        er.name = e.at("name").get<std::string>();
        er.failures = e.at("failures").get<long>();
        er.rep_count = e.at("rep_count").get<long>();
        er.mean_errors.assign(res.checkpoints.size(), detail::kNaN);
        er.error_counts.assign(res.checkpoints.size(), 0);
        res.estimators.push_back(std::move(er));
        order.push_back(e.at("name").get<std::string>());
    }
    auto cp_index = [&](long t) {
        auto it = std::find(res.checkpoints.begin(), res.checkpoints.end(), t);
        require(it != res.checkpoints.end(), "result_from_json: unknown checkpoint");
        return static_cast<std::size_t>(it - res.checkpoints.begin());
    };
    for (const auto& row : j.at("rows")) {
        auto name = row.at("estimator").get<std::string>();
        std::size_t e = 0;
        while (e < order.size() && order[e] != name) ++e;
        require(e < order.size(), "result_from_json: unknown estimator in rows");
        auto& er = res.estimators[e];
        auto metric = row.at("metric").get<std::string>();
        double value = row.at("value").get<double>();
        long count = row.at("rep_count").get<long>();
        if (metric == "l2_error") {
            auto k = cp_index(row.at("t").get<long>());
            er.mean_errors[k] = value;
            er.error_counts[k] = count;
        } else if (metric.rfind("coverage.", 0) == 0) {
            auto jdx = std::stol(metric.substr(9)) - 1;
            if (er.coverage.size() == 0) er.coverage = Vector::Zero(res.p);
            er.coverage[jdx] = value;
        } else if (metric.rfind("length.", 0) == 0) {
            auto jdx = std::stol(metric.substr(7)) - 1;
            if (er.mean_length.size() == 0) er.mean_length = Vector::Zero(res.p);
            er.mean_length[jdx] = value;
        } else {
            throw contract_error("result_from_json: unknown metric " + metric);
        }
    }
    return res;
}

inline void emit(const ExperimentResult& res, const std::string& format,
                 const std::string& path) {
    require(format == "csv" || format == "json", "emit: format must be csv or json");
    std::ofstream os(path, std::ios::binary); // binary keeps LF endings everywhere
    if (!os) throw std::runtime_error("emit: cannot open " + path + " for writing");
    if (format == "csv")
        write_csv(os, res);
    else
        os << result_to_json(res).dump(2) << "\n";
    os.flush();
    if (!os.good()) throw std::runtime_error("emit: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Config file parsing (JSON). Unknown keys are rejected so typos fail loudly.
// ---------------------------------------------------------------------------

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "model",      "p",          "n",           "design",   "estimators",
        "repetitions", "checkpoints", "alpha",      "seed",     "threads",
        "t0",         "t0_x",       "t0_M",        "initial_offset", "step0",
        "step_exp",   "out",        "format",      "sweep"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw contract_error("config: unknown key: " + it.key());
    }
    ExperimentConfig cfg;
    cfg.truth.initial_offset = std::sqrt(5.0);
    if (j.contains("model")) {
        auto m = j.at("model").get<std::string>();
        if (m == "logistic") cfg.design.model = glm::Link::Logistic;
        else if (m == "poisson") cfg.design.model = glm::Link::Poisson;
        else throw contract_error("config: model must be logistic or poisson");
    }
    if (j.contains("p")) cfg.design.p = j.at("p").get<long>();
    if (j.contains("n")) cfg.design.n = j.at("n").get<long>();
    if (j.contains("design")) cfg.design_token = j.at("design").get<std::string>();
    if (j.contains("estimators")) {
        cfg.estimators.clear();
        for (const auto& e : j.at("estimators"))
            cfg.estimators.push_back(estimator_from_name(e.get<std::string>()));
    }
    if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<long>();
    if (j.contains("checkpoints")) cfg.checkpoints = j.at("checkpoints").get<std::vector<long>>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("t0")) cfg.t0 = j.at("t0").get<long>();
    if (j.contains("t0_x")) cfg.t0_x = j.at("t0_x").get<double>();
    if (j.contains("t0_M")) cfg.t0_M = j.at("t0_M").get<double>();
    if (j.contains("initial_offset"))
        cfg.truth.initial_offset = j.at("initial_offset").get<double>();
    if (j.contains("step0")) cfg.step0 = j.at("step0").get<double>();
    if (j.contains("step_exp")) cfg.step_exp = j.at("step_exp").get<double>();
    if (j.contains("out")) cfg.output_path = j.at("out").get<std::string>();
    if (j.contains("format")) cfg.output_format = j.at("format").get<std::string>();
    return cfg;
}

struct SweepSpec {
    SweepKind kind = SweepKind::WarmStartM;
    std::vector<double> values;
};

inline SweepSpec sweep_from_json(const nlohmann::json& j) {
    require(j.contains("sweep"), "config: sweep section missing");
    const auto& s = j.at("sweep");
    SweepSpec spec;
    auto kind = s.at("kind").get<std::string>();
    if (kind == "M") spec.kind = SweepKind::WarmStartM;
    else if (kind == "offset") spec.kind = SweepKind::InitialOffset;
    else throw contract_error("config: sweep kind must be M or offset");
    spec.values = s.at("values").get<std::vector<double>>();
    require(!spec.values.empty(), "config: sweep values empty");
    return spec;
}

} // namespace boo::harness

#endif
