#include "embp/rng.hpp"

#include <cmath>
#include <numbers>

namespace embp {

namespace {
// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag_a,
                          std::uint64_t tag_b, std::uint64_t tag_c) {
    std::uint64_t s = mix(master);
    s = mix(s ^ tag_a);
    s = mix(s ^ tag_b);
    s = mix(s ^ tag_c);
    return s;
}

double Rng::uniform() {
    // 53-bit mantissa from the top bits
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::uint32_t Rng::uniform_index(std::uint32_t n) {
    // multiply-shift; bias is < 2^-32 per draw which is irrelevant here
    return static_cast<std::uint32_t>(
        (static_cast<__uint128_t>(gen_()) * n) >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) { // exclude log(0)
        u1 = uniform();
    }
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

cplx Rng::cnormal(double var) {
    const double s = std::sqrt(var * 0.5);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

} // namespace embp
