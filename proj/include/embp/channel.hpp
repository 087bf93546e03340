#ifndef EMBP_CHANNEL_HPP
#define EMBP_CHANNEL_HPP

#include <vector>

#include "embp/constellation.hpp"
#include "embp/rng.hpp"

namespace embp {

/// One block's channel state: impulse response h (length L+1) and complex
/// noise variance sigma2. The parameter vector theta is (h_0..h_L, sigma2).
struct ChannelParams {
    std::vector<cplx> h;
    double sigma2 = 0.0;

    int memory() const { return static_cast<int>(h.size()) - 1; }
    double h_energy() const; // ||h||^2
};

/// A simulated block: transmitted symbol indices, the observation y of
/// length N+L, and the ground-truth parameters kept for evaluation only.
struct TransmissionBlock {
    std::vector<int> symbols;
    std::vector<cplx> observation;
    ChannelParams truth;

    int block_length() const { return static_cast<int>(symbols.size()); }
};

/// i.i.d. CN(0,1) taps normalized to ||h|| = 1; sigma2 is left at 0 and is
/// set separately from the target SNR.
ChannelParams sample_channel(int memory, Rng& rng);

/// snr = ||h||^2 * N * E|c|^2 / ((N+L) * sigma2), solved for sigma2.
double snr_to_sigma2(double snr_db, const std::vector<cplx>& h,
                     const Constellation& cst, int n);

/// Inverse of snr_to_sigma2 (reported in dB).
double snr_of(const std::vector<cplx>& h, double sigma2,
              const Constellation& cst, int n);

/// y = H c + w with H the (N+L) x N convolution matrix of h and
/// w_n ~ CN(0, sigma2). Symbols outside the block are zero.
TransmissionBlock transmit(const ChannelParams& params,
                           const std::vector<int>& symbols,
                           const Constellation& cst, Rng& rng);

/// Noiseless convolution H c, exposed for oracles and residual checks.
std::vector<cplx> convolve(const std::vector<cplx>& h,
                           const std::vector<int>& symbols,
                           const Constellation& cst);

} // namespace embp

#endif
