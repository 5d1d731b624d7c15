#ifndef BOO_DATAGEN_HPP
#define BOO_DATAGEN_HPP

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "boo/glm.hpp"

namespace boo::datagen {

enum class CovariateStyle {
    GaussianIdentity,   // x ~ N(0, I)
    NormalizedGaussian, // x = z / ||z||, z ~ N(0, Sigma) (Sigma optional, default I)
    GaussianCovariance  // x ~ N(0, Sigma)
};

struct DesignSpec {
    Eigen::Index p = 1;
    long n = 1;
    glm::Link model = glm::Link::Logistic;
    CovariateStyle covariate_style = CovariateStyle::GaussianIdentity;
    std::optional<Matrix> sigma; // required for GaussianCovariance
    std::uint64_t seed = 0;
};

struct TruthSpec {
    Vector theta_star;
    double initial_offset = 0.0; // ||theta_0 - theta_star|| for sensitivity runs
};

/// theta* = v/||v|| with v_j = (-1)^{j-1} j.
inline Vector make_theta_star(Eigen::Index p) {
    require(p >= 1, "make_theta_star: p must be >= 1");
    Vector v(p);
    for (Eigen::Index j = 0; j < p; ++j)
        v[j] = (j % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(j + 1);
    return v / v.norm();
}

/// Haar-random orthogonal matrix: QR of a standard Gaussian matrix with the
/// R-diagonal signs folded into Q.
inline Matrix haar_orthogonal(Eigen::Index p, std::uint64_t seed) {
    require(p >= 1, "haar_orthogonal: p must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix g(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < p; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

/// Sigma = A diag(j^2/p^2) A' with A Haar-random orthogonal.
inline Matrix make_correlated_sigma(Eigen::Index p, std::uint64_t seed) {
    require(p >= 1, "make_correlated_sigma: p must be >= 1");
    Matrix a = haar_orthogonal(p, seed);
    Vector eig(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double v = static_cast<double>(j + 1) / static_cast<double>(p);
        eig[j] = v * v;
    }
    Matrix sigma = a * eig.asDiagonal() * a.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

/// Seed-derived unit direction used to place theta_0 = theta* + offset * u.
inline Vector unit_direction(Eigen::Index p, std::uint64_t seed) {
    Matrix q = haar_orthogonal(p, derive_seed(seed, 0x0ff5e7));
    return q.col(0);
}

inline Vector theta0_from_offset(const Vector& theta_star, double offset, std::uint64_t seed) {
    require(offset >= 0.0, "theta0_from_offset: offset must be >= 0");
    return theta_star + offset * unit_direction(theta_star.size(), seed);
}

/// Deterministic value stream of (x_t, y_t) pairs for one repetition.
class StreamSampler {
public:
    StreamSampler(DesignSpec design, TruthSpec truth)
        : design_(std::move(design)), truth_(std::move(truth)), rng_(design_.seed) {
        require(design_.p >= 1 && design_.n >= 1, "StreamSampler: p and n must be >= 1");
        require(truth_.theta_star.size() == design_.p,
                "StreamSampler: theta_star dimension mismatch");
        if (design_.covariate_style == CovariateStyle::GaussianCovariance)
            require(design_.sigma.has_value(), "StreamSampler: covariance style needs sigma");
        if (design_.sigma) {
            require(design_.sigma->rows() == design_.p && design_.sigma->cols() == design_.p,
                    "StreamSampler: sigma shape mismatch");
            Eigen::LLT<Matrix> llt(*design_.sigma);
            if (llt.info() != Eigen::Success)
                throw numeric_error("StreamSampler: sigma not positive definite");
            chol_ = llt.matrixL();
        }
    }

    const DesignSpec& design() const { return design_; }
    const TruthSpec& truth() const { return truth_; }

    glm::Observation next() {
        glm::Observation obs;
        obs.x = draw_covariate();
        double eta = obs.x.dot(truth_.theta_star);
        switch (design_.model) {
            case glm::Link::Logistic: {
                std::bernoulli_distribution bern(glm::mean_function(glm::Link::Logistic, eta));
                obs.y = bern(rng_) ? 1.0 : 0.0;
                break;
            }
            case glm::Link::Poisson: {
                std::poisson_distribution<long> pois(std::exp(eta));
                obs.y = static_cast<double>(pois(rng_));
                break;
            }
        }
        return obs;
    }

private:
    Vector draw_covariate() {
        Vector z(design_.p);
        for (Eigen::Index i = 0; i < design_.p; ++i) z[i] = normal_(rng_);
        switch (design_.covariate_style) {
            case CovariateStyle::GaussianIdentity:
                return z;
            case CovariateStyle::GaussianCovariance:
                return chol_ * z;
            case CovariateStyle::NormalizedGaussian: {
                if (design_.sigma) z = chol_ * z;
                double nrm = z.norm();
                if (nrm == 0.0) { // probability zero; regenerate deterministically
                    z.setZero();
                    z[0] = 1.0;
                    return z;
                }
                return z / nrm;
            }
        }
        throw contract_error("unknown covariate style");
    }

    DesignSpec design_;
    TruthSpec truth_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    Matrix chol_;
};

inline std::vector<glm::Observation> sample_stream(const DesignSpec& design,
                                                   const TruthSpec& truth) {
    StreamSampler sampler(design, truth);
    std::vector<glm::Observation> out;
    out.reserve(static_cast<std::size_t>(design.n));
    for (long i = 0; i < design.n; ++i) out.push_back(sampler.next());
    return out;
}

inline std::uint64_t stream_hash(const std::vector<glm::Observation>& obs) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& o : obs) {
        h = fnv1a(&o.y, sizeof(double), h);
        h = fnv1a(o.x.data(), sizeof(double) * static_cast<std::size_t>(o.x.size()), h);
    }
    return h;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV with header y,x_1,...,x_p; values round-trip exactly.
inline void write_stream_csv(std::ostream& os, const std::vector<glm::Observation>& obs) {
    require(!obs.empty(), "write_stream_csv: empty stream");
    const Eigen::Index p = obs.front().x.size();
    os << "y";
    for (Eigen::Index j = 1; j <= p; ++j) os << ",x_" << j;
    os << "\n";
    for (const auto& o : obs) {
        os << format_double(o.y);
        for (Eigen::Index j = 0; j < p; ++j) os << "," << format_double(o.x[j]);
        os << "\n";
    }
}

inline std::vector<glm::Observation> read_stream_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "read_stream_csv: missing header");
    Eigen::Index p = 0;
    for (char c : line)
        if (c == ',') ++p;
    require(p >= 1, "read_stream_csv: header must be y,x_1,...,x_p");
    std::vector<glm::Observation> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        glm::Observation o;
        o.x.resize(p);
        require(static_cast<bool>(std::getline(ss, cell, ',')), "read_stream_csv: short row");
        o.y = std::stod(cell);
        for (Eigen::Index j = 0; j < p; ++j) {
            require(static_cast<bool>(std::getline(ss, cell, ',')), "read_stream_csv: short row");
            o.x[j] = std::stod(cell);
        }
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace boo::datagen

#endif
