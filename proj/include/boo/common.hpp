#ifndef BOO_COMMON_HPP
#define BOO_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace boo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Violated precondition: bad dimensions, invalid configuration values.
class contract_error : public std::invalid_argument {
public:
    explicit contract_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Numeric breakdown at runtime: non-finite values, factorization failure,
/// loss of positive definiteness.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

inline void require_finite(const Vector& v, const std::string& name) {
    if (!v.allFinite()) throw numeric_error(name + " contains non-finite values");
}

inline void require_finite(double x, const std::string& name) {
    if (!std::isfinite(x)) throw numeric_error(name + " is non-finite");
}

/// SplitMix64 step; used to derive independent sub-stream seeds so that
/// repetition r of an experiment sees the same stream no matter how work is
/// scheduled across threads.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

/// FNV-1a over raw bytes.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace boo

#endif
