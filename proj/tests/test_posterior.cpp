#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "boo/posterior.hpp"

using boo::Matrix;
using boo::Vector;
using boo::glm::Link;
using boo::glm::Observation;
using boo::posterior::BooEstimator;
using boo::posterior::BooOptions;

namespace {

Observation scalar_obs(double y, double x) {
    Observation o;
    o.y = y;
    o.x = Vector::Constant(1, x);
    return o;
}

double bisect_scalar_map() {
    auto f = [](double th) { return 1.0 / (1.0 + std::exp(-th)) - 1.0 + th; };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<Observation> random_logistic_stream(int p, int n, std::uint64_t seed,
                                                double covariate_scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector theta = Vector::Zero(p);
    for (int i = 0; i < p; ++i) theta[i] = normal(rng) * 0.3;
    std::vector<Observation> out;
    for (int t = 0; t < n; ++t) {
        Observation o;
        o.x.resize(p);
        for (int i = 0; i < p; ++i) o.x[i] = covariate_scale * normal(rng);
        double prob = boo::glm::mean_function(Link::Logistic, o.x.dot(theta));
        o.y = unif(rng) < prob ? 1.0 : 0.0;
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace

TEST_CASE("default warm-start lengths") {
    CHECK(boo::posterior::default_t0(1, 5, 1) == 7);
    CHECK(boo::posterior::default_t0(10, 5, 1) == 29);
    CHECK(boo::posterior::default_t0(50, 5, 1) == 201);
    CHECK(boo::posterior::default_t0(10, 5, 0.01) == 1);
    CHECK(boo::posterior::default_t0(10, 5, 2) == 57);
    CHECK_THROWS_AS(boo::posterior::default_t0(0, 5, 1), boo::contract_error);
    CHECK_THROWS_AS(boo::posterior::default_t0(10, -1, 1), boo::contract_error);
    CHECK_THROWS_AS(boo::posterior::default_t0(10, 5, 0), boo::contract_error);
}

TEST_CASE("scalar online step by hand") {
    BooEstimator est(Link::Logistic, 1, 0);
    est.ingest(scalar_obs(1, 1));
    const auto& post = est.posterior();
    // g = sigma(0) - 1 = -0.5, h = 0.25; Omega becomes 1.25 and the mean
    // moves by the updated inverse: 0 + 0.8 * 0.5 = 0.4.
    CHECK(post.precision(0, 0) == Catch::Approx(1.25).margin(1e-15));
    CHECK(post.precision_inv(0, 0) == Catch::Approx(0.8).margin(1e-15));
    CHECK(post.mean[0] == Catch::Approx(0.4).margin(1e-15));
}

TEST_CASE("mean update uses the refreshed precision, not the stale one") {
    // With the pre-update precision the same step would land at 0.5.
    BooEstimator est(Link::Logistic, 1, 0);
    est.ingest(scalar_obs(1, 1));
    CHECK(std::abs(est.posterior().mean[0] - 0.5) > 0.09);
    CHECK(est.posterior().mean[0] == Catch::Approx(0.4).margin(1e-15));
}

TEST_CASE("warm phase buffers and refuses queries") {
    BooEstimator est(Link::Logistic, 1, 3);
    est.ingest(scalar_obs(1, 1));
    CHECK_FALSE(est.warmed());
    CHECK(est.warm_buffer_size() == 1);
    CHECK(est.t() == 1);
    CHECK_THROWS_AS(est.posterior(), boo::contract_error);
    CHECK_THROWS_AS(est.diagnostics(Vector::Zero(1)), boo::contract_error);
    CHECK_THROWS_AS(est.snapshot(), boo::contract_error);
}

TEST_CASE("warm start equals the batch map solution") {
    auto obs = random_logistic_stream(3, 6, 77);
    BooEstimator est(Link::Logistic, 3, 6);
    for (const auto& o : obs) est.ingest(o);
    REQUIRE(est.warmed());
    CHECK(est.warm_buffer_size() == 0);

    auto rep = boo::batch::map_estimate(Link::Logistic, obs, Vector::Zero(3),
                                        Matrix::Identity(3, 3), BooOptions().newton);
    REQUIRE(rep.converged);
    CHECK((est.posterior().mean.array() == rep.estimate.array()).all());

    Matrix expected = Matrix::Identity(3, 3);
    for (const auto& o : obs) {
        double h = boo::glm::hessian_scale(Link::Logistic, o, rep.estimate);
        expected += h * (o.x * o.x.transpose());
    }
    CHECK(est.posterior().precision.isApprox(expected, 1e-14));
}

TEST_CASE("one-observation warm start hits the penalized fixed point") {
    BooOptions tight;
    tight.newton.grad_tol = 1e-12;
    BooEstimator est(Link::Logistic, 1, 1, Vector(), Matrix(), tight);
    est.ingest(scalar_obs(1, 1));
    double oracle = bisect_scalar_map();
    CHECK(est.posterior().mean[0] == Catch::Approx(oracle).margin(1e-9));
    double sig = 1.0 / (1.0 + std::exp(-oracle));
    CHECK(est.posterior().precision(0, 0) == Catch::Approx(1.0 + sig * (1.0 - sig)).margin(1e-9));
}

TEST_CASE("an overwhelming prior pins the warm start to the prior mean") {
    BooEstimator est(Link::Logistic, 1, 3, Vector::Zero(1), Matrix::Constant(1, 1, 1e6));
    for (int i = 0; i < 3; ++i) est.ingest(scalar_obs(1, 1));
    CHECK(std::abs(est.posterior().mean[0]) <= 1e-4);
}

TEST_CASE("zero covariates leave the state untouched") {
    SECTION("online phase") {
        BooEstimator est(Link::Logistic, 2, 0);
        Observation o;
        o.y = 0.0;
        o.x = Vector::Zero(2);
        est.ingest(o);
        CHECK((est.posterior().mean.array() == 0.0).all());
        CHECK((est.posterior().precision.array() == Matrix::Identity(2, 2).array()).all());
    }
    SECTION("warm phase") {
        BooEstimator est(Link::Logistic, 2, 1);
        Observation o;
        o.y = 0.0;
        o.x = Vector::Zero(2);
        est.ingest(o);
        REQUIRE(est.warmed());
        CHECK((est.posterior().mean.array() == 0.0).all());
        CHECK((est.posterior().precision.array() == Matrix::Identity(2, 2).array()).all());
    }
}

TEST_CASE("rank-1 inverse update examples") {
    using boo::posterior::sherman_morrison_downdate;
    SECTION("zero scale is the identity map") {
        Matrix inv = Matrix::Identity(2, 2) * 0.5;
        Matrix out = sherman_morrison_downdate(inv, Vector::Ones(2), 0.0);
        CHECK((out.array() == inv.array()).all());
    }
    SECTION("unit vector on the identity") {
        Vector u(2);
        u << 1, 0;
        Matrix out = sherman_morrison_downdate(Matrix::Identity(2, 2), u, 1.0);
        Matrix expected(2, 2);
        expected << 0.5, 0, 0, 1;
        CHECK(out.isApprox(expected, 1e-15));
    }
    SECTION("random spd property") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> normal;
        for (int rep = 0; rep < 20; ++rep) {
            int p = 1 + static_cast<int>(rng() % 6);
            Matrix a(p, p);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) a(i, j) = normal(rng);
            Matrix spd = a * a.transpose() + Matrix::Identity(p, p);
            Vector u(p);
            for (int i = 0; i < p; ++i) u[i] = normal(rng);
            double scale = std::abs(normal(rng));
            Matrix inv = boo::posterior::spd_inverse(spd);
            Matrix updated = sherman_morrison_downdate(inv, u, scale);
            Matrix target = spd + scale * (u * u.transpose());
            CHECK((target * updated - Matrix::Identity(p, p)).norm() <= 1e-10);
        }
    }
    SECTION("contract and breakdown guards") {
        CHECK_THROWS_AS(sherman_morrison_downdate(Matrix::Identity(2, 2), Vector::Ones(2), -1.0),
                        boo::contract_error);
        CHECK_THROWS_AS(sherman_morrison_downdate(Matrix::Identity(2, 2), Vector::Ones(3), 1.0),
                        boo::contract_error);
        CHECK_THROWS_AS(
            sherman_morrison_downdate(-Matrix::Identity(1, 1), Vector::Ones(1), 2.0),
            boo::numeric_error);
    }
}

TEST_CASE("online update edge cases") {
    using boo::posterior::online_update;
    auto post = boo::posterior::make_posterior(Vector::Zero(2), Matrix::Identity(2, 2));
    SECTION("zero curvature still moves the mean") {
        Vector g(2);
        g << 1, -2;
        online_update(post, g, 0.0, Vector::Ones(2));
        CHECK((post.precision.array() == Matrix::Identity(2, 2).array()).all());
        CHECK(post.mean.isApprox(-g, 1e-15));
    }
    SECTION("zero gradient only sharpens the precision") {
        Vector x(2);
        x << 1, 0;
        online_update(post, Vector::Zero(2), 1.0, x);
        CHECK((post.mean.array() == 0.0).all());
        CHECK(post.precision(0, 0) == Catch::Approx(2.0).margin(1e-15));
    }
    SECTION("negative curvature is rejected") {
        CHECK_THROWS_AS(online_update(post, Vector::Zero(2), -0.1, Vector::Ones(2)),
                        boo::contract_error);
    }
}

TEST_CASE("deviation diagnostics") {
    BooEstimator est(Link::Logistic, 2, 0);
    auto d0 = est.diagnostics(Vector::Zero(2));
    CHECK(d0.v_t == 0.0);
    CHECK(d0.delta_norm == 0.0);

    Vector star(2);
    star << -3, -4;
    auto d1 = est.diagnostics(star);
    CHECK(d1.v_t == Catch::Approx(25.0).margin(1e-12));
    CHECK(d1.delta_norm == Catch::Approx(5.0).margin(1e-12));

    boo::posterior::Snapshot snap;
    snap.p = 2;
    snap.t = 5;
    snap.mean = Vector::Ones(2);
    snap.precision = Matrix::Zero(2, 2);
    snap.precision(0, 0) = 4.0;
    snap.precision(1, 1) = 1.0;
    BooEstimator est2(Link::Logistic, snap);
    auto d2 = est2.diagnostics(Vector::Zero(2));
    CHECK(d2.v_t == Catch::Approx(5.0).margin(1e-12));
    CHECK(d2.delta_norm == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("precision only grows along the stream") {
    auto obs = random_logistic_stream(3, 120, 11);
    BooEstimator est(Link::Logistic, 3, 10);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    Matrix prev;
    for (const auto& o : obs) {
        est.ingest(o);
        if (!est.warmed()) continue;
        if (prev.size() != 0) {
            Matrix diff = est.posterior().precision - prev;
            for (int k = 0; k < 5; ++k) {
                Vector z(3);
                for (int i = 0; i < 3; ++i) z[i] = normal(rng);
                CHECK(z.dot(diff * z) >= -1e-12);
            }
        }
        prev = est.posterior().precision;
    }
}

TEST_CASE("maintained inverse stays consistent over a long stream") {
    const int p = 50;
    auto obs = random_logistic_stream(p, 10000, 23, 1.0 / std::sqrt(static_cast<double>(p)));
    BooOptions opts;
    opts.refactor_interval = 0;
    BooEstimator est(Link::Logistic, p, 0, Vector(), Matrix(), opts);
    for (const auto& o : obs) est.ingest(o);
    const auto& post = est.posterior();
    double drift = (post.precision * post.precision_inv
                    - Matrix::Identity(p, p)).norm();
    CHECK(drift <= 1e-6);
}

TEST_CASE("periodic refactorization keeps a healthy estimator healthy") {
    auto obs = random_logistic_stream(3, 50, 31);
    BooOptions opts;
    opts.refactor_interval = 7;
    BooEstimator est(Link::Logistic, 3, 0, Vector(), Matrix(), opts);
    for (const auto& o : obs) est.ingest(o);
    CHECK_FALSE(est.failed());
    Vector before = est.posterior().mean;
    est.refactorize();
    CHECK_FALSE(est.failed());
    CHECK((est.posterior().mean.array() == before.array()).all());
    CHECK((est.posterior().precision * est.posterior().precision_inv
           - Matrix::Identity(3, 3)).norm() <= 1e-12);
}

TEST_CASE("snapshot json round trip") {
    auto obs = random_logistic_stream(2, 40, 41);
    BooEstimator est(Link::Logistic, 2, 5);
    for (const auto& o : obs) est.ingest(o);
    auto snap = est.snapshot();
    auto j = boo::posterior::snapshot_to_json(snap);
    auto back = boo::posterior::snapshot_from_json(j);
    CHECK(back.p == snap.p);
    CHECK(back.t == snap.t);
    CHECK((back.mean.array() == snap.mean.array()).all());
    CHECK((back.precision.array() == snap.precision.array()).all());
}

TEST_CASE("resuming from a snapshot continues the same trajectory") {
    auto obs = random_logistic_stream(3, 100, 53);
    BooEstimator full(Link::Logistic, 3, 8);
    for (const auto& o : obs) full.ingest(o);

    BooEstimator head(Link::Logistic, 3, 8);
    for (int i = 0; i < 50; ++i) head.ingest(obs[static_cast<std::size_t>(i)]);
    BooEstimator tail(Link::Logistic, head.snapshot());
    CHECK(tail.t() == 50);
    CHECK(tail.warmed());
    for (int i = 50; i < 100; ++i) tail.ingest(obs[static_cast<std::size_t>(i)]);

    CHECK(tail.t() == full.t());
    CHECK((tail.posterior().mean - full.posterior().mean).norm() <= 1e-9);
    CHECK((tail.posterior().precision - full.posterior().precision).norm() <= 1e-9);
}

TEST_CASE("snapshots with bad precision are refused") {
    boo::posterior::Snapshot snap;
    snap.p = 2;
    snap.t = 3;
    snap.mean = Vector::Zero(2);
    snap.precision = -Matrix::Identity(2, 2);
    CHECK_THROWS_AS(BooEstimator(Link::Logistic, snap), boo::numeric_error);
}

TEST_CASE("ingest validates observations") {
    BooEstimator est(Link::Logistic, 2, 0);
    Observation bad_dim;
    bad_dim.y = 1.0;
    bad_dim.x = Vector::Zero(3);
    CHECK_THROWS_AS(est.ingest(bad_dim), boo::contract_error);
    Observation bad_y;
    bad_y.y = 0.5;
    bad_y.x = Vector::Zero(2);
    CHECK_THROWS_AS(est.ingest(bad_y), boo::contract_error);
    CHECK(est.t() == 0);
}

TEST_CASE("warm trace records the intermediate map path") {
    auto obs = random_logistic_stream(2, 3, 61);
    BooOptions opts;
    opts.record_warm_trace = true;
    BooEstimator est(Link::Logistic, 2, 3, Vector(), Matrix(), opts);
    for (const auto& o : obs) est.ingest(o);
    REQUIRE(est.warm_trace().size() == 2);
    for (const auto& v : est.warm_trace()) CHECK(v.allFinite());
    std::vector<Observation> first{obs[0]};
    auto rep = boo::batch::map_estimate(Link::Logistic, first, Vector::Zero(2),
                                        Matrix::Identity(2, 2), opts.newton);
    CHECK((est.warm_trace()[0].array() == rep.estimate.array()).all());
}
