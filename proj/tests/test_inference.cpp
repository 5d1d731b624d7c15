#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "boo/inference.hpp"
#include "boo/posterior.hpp"

using boo::Matrix;
using boo::Vector;
using boo::glm::Link;
using boo::glm::Observation;

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

double normal_density(double x, double mean, double precision) {
    return std::sqrt(precision / kTwoPi)
           * std::exp(-0.5 * precision * (x - mean) * (x - mean));
}

// Simpson quadrature for the exact 1-d total variation distance.
double exact_tv_1d(double m1, double q1, double m2, double q2) {
    const int n = 24000; // even
    const double lo = -16.0, hi = 16.0;
    const double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + h * i;
        double f = std::abs(normal_density(x, m1, q1) - normal_density(x, m2, q2));
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * f;
    }
    return 0.5 * acc * h / 3.0;
}

} // namespace

TEST_CASE("quantile anchors") {
    using namespace boo::inference;
    CHECK(z_value(0.05) == Catch::Approx(1.959964).margin(1e-6));
    CHECK(z_value(0.05) == Catch::Approx(normal_quantile(0.975)).margin(1e-15));
    // chi2 with two degrees of freedom has quantile -2 log(alpha).
    CHECK(chi_square_quantile(2, 0.05) == Catch::Approx(-2.0 * std::log(0.05)).margin(1e-10));
    CHECK(chi_square_quantile(2, 0.05) == Catch::Approx(5.991465).margin(1e-6));
    double z = z_value(0.1);
    CHECK(chi_square_quantile(1, 0.1) == Catch::Approx(z * z).margin(1e-10));
    CHECK_THROWS_AS(normal_quantile(0.0), boo::contract_error);
    CHECK_THROWS_AS(z_value(1.0), boo::contract_error);
    CHECK_THROWS_AS(chi_square_quantile(0, 0.05), boo::contract_error);
}

TEST_CASE("coordinate intervals") {
    using namespace boo::inference;
    Vector mean(3);
    mean << 1, -2, 0;
    Vector var(3);
    var << 1, 4, 0;
    auto set = coordinate_intervals(mean, var, 0.05);
    double z = z_value(0.05);
    CHECK(set.half_widths[0] == Catch::Approx(z).margin(1e-12));
    CHECK(set.half_widths[1] == Catch::Approx(2.0 * z).margin(1e-12));
    CHECK(set.half_widths[2] == 0.0);
    CHECK(set.level == 0.05);

    CHECK(interval_contains(set, 0, 1.0 + z));
    CHECK_FALSE(interval_contains(set, 0, 1.0 + z + 1e-9));
    CHECK(interval_contains(set, 2, 0.0));
    CHECK_FALSE(interval_contains(set, 2, 1e-12));
    CHECK_THROWS_AS(interval_contains(set, 3, 0.0), boo::contract_error);

    Vector bad(3);
    bad << 1, -0.1, 0;
    CHECK_THROWS_AS(coordinate_intervals(mean, bad, 0.05), boo::contract_error);
    CHECK_THROWS_AS(coordinate_intervals(mean, var, 0.0), boo::contract_error);
}

TEST_CASE("wald ellipsoid membership") {
    using namespace boo::inference;
    SECTION("scalar case matches the interval") {
        Matrix prec = Matrix::Constant(1, 1, 4.0);
        double radius = z_value(0.05) / 2.0;
        CHECK(wald_set_contains(Vector::Zero(1), prec, 0.05,
                                Vector::Constant(1, radius - 1e-9)));
        CHECK_FALSE(wald_set_contains(Vector::Zero(1), prec, 0.05,
                                      Vector::Constant(1, radius + 1e-6)));
        auto set = coordinate_intervals(Vector::Zero(1), Vector::Constant(1, 0.25), 0.05);
        for (double v = -1.2; v <= 1.2; v += 0.05) {
            CHECK(interval_contains(set, 0, v)
                  == wald_set_contains(Vector::Zero(1), prec, 0.05, Vector::Constant(1, v)));
        }
    }
    SECTION("two dimensional anchors") {
        Matrix prec = Matrix::Identity(2, 2);
        Vector far(2);
        far << 3, 3;
        CHECK_FALSE(wald_set_contains(Vector::Zero(2), prec, 0.05, far)); // 18 > 5.99
        Vector near(2);
        near << 1, 1;
        CHECK(wald_set_contains(Vector::Zero(2), prec, 0.05, near)); // 2 <= 5.99
        CHECK(wald_set_contains(Vector::Zero(2), prec, 0.5, Vector::Zero(2)));
    }
    SECTION("smaller alpha gives a larger set") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal;
        Matrix prec(2, 2);
        prec << 2, 0.3, 0.3, 1;
        for (int i = 0; i < 200; ++i) {
            Vector th(2);
            th << normal(rng) * 2, normal(rng) * 2;
            if (wald_set_contains(Vector::Zero(2), prec, 0.10, th))
                CHECK(wald_set_contains(Vector::Zero(2), prec, 0.01, th));
        }
    }
}

TEST_CASE("gaussian tv bound anchors") {
    using boo::inference::gaussian_tv_bound;
    Matrix one = Matrix::Identity(1, 1);
    SECTION("identical distributions") {
        CHECK(gaussian_tv_bound(Vector::Zero(1), one, Vector::Zero(1), one) == 0.0);
        Matrix prec(2, 2);
        prec << 3, 1, 1, 2;
        Vector m(2);
        m << 0.4, -0.7;
        CHECK(gaussian_tv_bound(m, prec, m, prec) == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("pure mean shift") {
        CHECK(gaussian_tv_bound(Vector::Constant(1, 0.1), one, Vector::Zero(1), one)
              == Catch::Approx(0.05).margin(1e-15));
    }
    SECTION("operator norm gate") {
        CHECK(gaussian_tv_bound(Vector::Zero(1), 3.0 * one, Vector::Zero(1), one) == 1.0);
    }
    SECTION("capped at one") {
        CHECK(gaussian_tv_bound(Vector::Constant(1, 10.0), one, Vector::Zero(1), one) == 1.0);
    }
}

TEST_CASE("tv bound dominates the exact scalar distance") {
    using boo::inference::gaussian_tv_bound;
    // Sanity-check the quadrature against the closed form for a mean shift.
    double closed = std::erf(0.4 / (2.0 * std::sqrt(2.0)));
    CHECK(exact_tv_1d(0.4, 1.0, 0.0, 1.0) == Catch::Approx(closed).margin(1e-6));

    Matrix one = Matrix::Identity(1, 1);
    for (int i = 0; i < 20; ++i) {
        double m1 = i / 19.0;
        for (int j = 0; j < 20; ++j) {
            double q1 = 0.5 + 1.1 * j / 19.0;
            double bound = gaussian_tv_bound(Vector::Constant(1, m1), q1 * one,
                                             Vector::Zero(1), one);
            double exact = exact_tv_1d(m1, q1, 0.0, 1.0);
            CHECK(bound + 1e-5 >= exact);
        }
    }
}

TEST_CASE("approximation rate anchors") {
    using boo::inference::approximation_rate;
    double direct = std::abs(std::log(10000.0 / 29.0))
                    * (10.0 * std::log(10000.0) + 5.0) / std::sqrt(10000.0);
    CHECK(approximation_rate(10000, 29, 10, 5) == Catch::Approx(direct).margin(1e-12));
    CHECK(approximation_rate(10000, 29, 10, 5) == Catch::Approx(5.6738).margin(2e-3));
    CHECK(approximation_rate(10000, 29, 10, 5) > 5.5);
    CHECK(approximation_rate(10000, 29, 10, 5) < 5.9);
    CHECK_THROWS_AS(approximation_rate(10, 0, 1, 1), boo::contract_error);
    CHECK_THROWS_AS(approximation_rate(10, 10, 1, 1), boo::contract_error);
}

TEST_CASE("posterior-sampling diagnostics anchors") {
    using boo::inference::bvm_diagnostics;
    SECTION("perfectly aligned") {
        Matrix f(2, 2);
        f << 2, 0.3, 0.3, 1;
        Vector m(2);
        m << 0.5, -0.5;
        auto d = bvm_diagnostics(m, f, m, f, 100, 10, 5.0);
        CHECK(d.mean_align == Catch::Approx(0.0).margin(1e-14));
        CHECK(d.precision_align == Catch::Approx(0.0).margin(1e-12));
        CHECK(d.tv_bound == Catch::Approx(0.0).margin(1e-12));
        CHECK(d.fisher_mode == "theta_star");
    }
    SECTION("doubled precision") {
        Matrix f(2, 2);
        f << 2, 0.3, 0.3, 1;
        auto d = bvm_diagnostics(Vector::Zero(2), 2.0 * f, Vector::Zero(2), f, 100, 10, 5.0,
                                 "mle_plug_in");
        CHECK(d.precision_align == Catch::Approx(0.5).margin(1e-12));
        CHECK(d.mean_align == 0.0);
        CHECK(d.fisher_mode == "mle_plug_in");
    }
    SECTION("mean misalignment is fisher weighted") {
        Matrix f = Matrix::Constant(1, 1, 4.0);
        auto d = bvm_diagnostics(Vector::Constant(1, 1.0), f, Vector::Zero(1), f, 100, 10, 0.0);
        CHECK(d.mean_align == Catch::Approx(2.0).margin(1e-12));
    }
}

TEST_CASE("alignment diagnostics tighten along the stream") {
    const int p = 5;
    const double x_slack = 5.0;
    const long t0 = boo::posterior::default_t0(p, x_slack, 1.0);
    REQUIRE(t0 == 14);
    const long mid = 1000, fin = 10000;

    Vector theta_star(p);
    for (int i = 0; i < p; ++i) theta_star[i] = (i % 2 == 0 ? 1.0 : -1.0) * (i + 1);
    theta_star /= theta_star.norm();

    int mean_drops = 0, prec_drops = 0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        std::mt19937_64 rng(900 + static_cast<std::uint64_t>(run));
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        boo::posterior::BooEstimator est(Link::Logistic, p, t0);
        Matrix fisher = Matrix::Zero(p, p);
        std::vector<Observation> obs;
        obs.reserve(fin);
        boo::inference::BvmDiagnostics at_mid, at_fin;
        Vector mle_start = Vector::Zero(p);
        for (long t = 1; t <= fin; ++t) {
            Observation o;
            o.x.resize(p);
            for (int i = 0; i < p; ++i) o.x[i] = normal(rng);
            double eta_star = o.x.dot(theta_star);
            o.y = unif(rng) < boo::glm::mean_function(Link::Logistic, eta_star) ? 1.0 : 0.0;
            fisher += boo::glm::variance_function(Link::Logistic, eta_star)
                      * (o.x * o.x.transpose());
            obs.push_back(o);
            est.ingest(o);
            if (t == mid || t == fin) {
                auto mle = boo::batch::mle_estimate(Link::Logistic, obs, {}, &mle_start);
                REQUIRE(mle.converged);
                mle_start = mle.estimate;
                auto d = boo::inference::bvm_diagnostics(est.posterior().mean,
                                                         est.posterior().precision,
                                                         mle.estimate, fisher, t, t0, x_slack);
                CHECK(d.tv_bound >= 0.0);
                CHECK(d.tv_bound <= 1.0);
                (t == mid ? at_mid : at_fin) = d;
            }
        }
        if (at_fin.mean_align < at_mid.mean_align) ++mean_drops;
        if (at_fin.precision_align < at_mid.precision_align) ++prec_drops;
    }
    CHECK(mean_drops >= 90);
    CHECK(prec_drops >= 90);
}
