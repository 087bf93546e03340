#ifndef EMBP_MATCHED_HPP
#define EMBP_MATCHED_HPP

#include <vector>

#include "embp/channel.hpp"

namespace embp {

/// Hermitian band matrix with bandwidth `band`. Stores the main diagonal and
/// the `band` upper diagonals; lower entries are conjugates by construction.
class BandHermitian {
  public:
    BandHermitian() = default;
    BandHermitian(int n, int band);

    int size() const { return n_; }
    int bandwidth() const { return band_; }

    /// Entry (r, c); zero outside the band.
    cplx at(int r, int c) const;

    /// Upper-diagonal storage: entry (m, m+d) for 0 <= d <= band.
    cplx& upper(int m, int d) { return diag_[d][m]; }
    const cplx& upper(int m, int d) const { return diag_[d][m]; }

  private:
    int n_ = 0;
    int band_ = 0;
    std::vector<std::vector<cplx>> diag_; // diag_[d] has n-d entries
};

/// Matched-filter sufficient statistics: x = H^H y and G = H^H H.
struct MatchedStats {
    std::vector<cplx> x; // length N
    BandHermitian g;     // N x N, bandwidth L
    double sigma2 = 0.0;

    int block_length() const { return static_cast<int>(x.size()); }
};

/// Builds x and G from the channel estimate; G comes out Toeplitz within the
/// band because every column of H carries the full impulse response.
MatchedStats build_matched_stats(const ChannelParams& params,
                                 const std::vector<cplx>& observation);

} // namespace embp

#endif
