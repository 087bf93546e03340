#ifndef EMBP_CONSTELLATION_HPP
#define EMBP_CONSTELLATION_HPP

#include <string>
#include <vector>

#include "embp/rng.hpp"

namespace embp {

/// Symbol alphabet. Points are indexed; detectors work with indices and map
/// to complex values only where arithmetic needs them.
class Constellation {
  public:
    explicit Constellation(std::vector<cplx> points);

    static Constellation bpsk(); // {+1, -1}
    static Constellation psk(int order);
    static Constellation by_name(const std::string& name); // "bpsk", "qpsk", "8psk"

    int size() const { return static_cast<int>(points_.size()); }
    const cplx& point(int i) const { return points_[i]; }
    const std::vector<cplx>& points() const { return points_; }

    double bits_per_symbol() const { return bits_; }
    /// Mean symbol energy E|c|^2 under a uniform prior.
    double mean_energy() const { return mean_energy_; }

    /// Index of the point nearest to z (Euclidean).
    int nearest(cplx z) const;

    /// Index permutation mapping each point to the nearest point of its
    /// negation, or empty if some -c_i is not in the alphabet. For BPSK this
    /// is the swap {1, 0}; it drives blind sign-ambiguity resolution.
    std::vector<int> negation_map() const;

  private:
    std::vector<cplx> points_;
    double bits_ = 0.0;
    double mean_energy_ = 0.0;
};

/// Uniform i.i.d. symbol indices.
std::vector<int> sample_symbols(const Constellation& cst, int n, Rng& rng);

} // namespace embp

#endif
