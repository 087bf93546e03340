#ifndef EMBP_RNG_HPP
#define EMBP_RNG_HPP

#include <complex>
#include <cstdint>
#include <random>

namespace embp {

using cplx = std::complex<double>;

/// Mixes a master seed with stream tags into an independent substream seed.
/// Every random draw in the project is reachable from (master seed, tags),
/// which is what makes parallel runs byte-reproducible.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag_a,
                          std::uint64_t tag_b = 0, std::uint64_t tag_c = 0);

/// Deterministic random stream. Gaussian variates are produced by an
/// explicit Box-Muller transform so the byte stream does not depend on the
/// standard library's unspecified normal_distribution algorithm.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform integer in [0, n).
    std::uint32_t uniform_index(std::uint32_t n);

    /// Standard normal, mean 0 variance 1.
    double normal();

    /// Circular complex Gaussian with E|w|^2 = var (re/im each var/2).
    cplx cnormal(double var);

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace embp

#endif
