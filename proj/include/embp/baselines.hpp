#ifndef EMBP_BASELINES_HPP
#define EMBP_BASELINES_HPP

#include <vector>

#include "embp/bp.hpp"
#include "embp/em.hpp"

namespace embp {

/// Exact enumeration references. These run in exponential time and guard
/// their input sizes; they are meant for tests, selftest and small studies.

struct BruteForceResult {
    BeliefSet marginals;           // exact symbol-wise posteriors
    std::vector<double> log_joint; // normalized log posterior, M^N entries
};

/// Exact P(c | y, theta) by enumerating all M^N sequences. Rejects
/// instances with M^N > 2^20.
BruteForceResult brute_force_posterior(const std::vector<cplx>& observation,
                                       const ChannelParams& params,
                                       const Constellation& cst);

/// Evidence of the block model with the noise term normalized per symbol:
/// log sum_c M^-N (pi sigma2)^-N exp(-||y - Hc||^2 / sigma2).
/// The per-symbol constant keeps the closed-form variance update (the /N
/// normalization) exactly stationary, so EM ascent statements are checked
/// against this likelihood. Same enumeration guard as above.
double log_likelihood(const std::vector<cplx>& observation,
                      const ChannelParams& params, const Constellation& cst);

/// Evidence lower bound of a factorized trial distribution Q given as
/// per-symbol beliefs: sum_c Q(c) log(p(c, y | theta) / Q(c)), same
/// normalization convention as log_likelihood. elbo <= log_likelihood.
double elbo(const BeliefSet& q, const std::vector<cplx>& observation,
            const ChannelParams& params, const Constellation& cst);

/// Exact symbol-wise posteriors via forward-backward over the M^L-state ISI
/// trellis. `known` may fix symbols (index >= 0) at given positions, e.g.
/// pilots; pass an empty vector for fully unknown data. Guards M^L <= 4096.
BeliefSet trellis_map_detect(const std::vector<cplx>& observation,
                             const ChannelParams& params,
                             const Constellation& cst,
                             const std::vector<int>& known = {});

/// Pseudo-random pilot prefix configuration.
struct PilotConfig {
    double fraction = 0.05;
    std::uint64_t seed = 1;

    int count(int n) const; // round(fraction * N)
};

/// Pilot symbol indices for the preamble, drawn from a seeded stream.
std::vector<int> make_pilot_symbols(const Constellation& cst, int count,
                                    std::uint64_t seed);

/// Least-squares channel estimate from the pilot preamble. Only output
/// samples whose entire receptive field lies inside the preamble enter the
/// fit, so data symbols never interfere. sigma2 is the mean residual power.
/// Throws on a rank-deficient pilot matrix.
ChannelParams pilot_ls_estimate(const std::vector<cplx>& observation,
                                const std::vector<int>& pilot_symbols,
                                const Constellation& cst, int memory);

/// One full EM iteration (all parameters, beta = 1) with the E-step taken
/// from exact trellis marginals instead of BP beliefs. Shares the M-step
/// code path with em_step, so the two are bit-identical on equal inputs.
/// Note: the closed-form updates treat the posterior as a product of its
/// marginals and refresh all coordinates simultaneously, so this iteration
/// does NOT inherit the EM ascent guarantee (see exact_em_step_full).
ChannelParams exact_em_step(const std::vector<cplx>& observation,
                            const ChannelParams& params,
                            const Constellation& cst);

/// Full-posterior trellis statistics: symbol marginals plus the pairwise
/// moments E[c_{a+d} c_a^*] for 1 <= d <= L that the exact M-step needs.
struct TrellisPosterior {
    BeliefSet marginals;
    std::vector<std::vector<cplx>> mom2; // mom2[d-1][a] = E[c_{a+d} c_a^*]
    std::vector<double> s2nd;            // E|c_n|^2
};
TrellisPosterior trellis_posterior(const std::vector<cplx>& observation,
                                   const ChannelParams& params,
                                   const Constellation& cst,
                                   const std::vector<int>& known = {});

/// True EM iteration: the E-step keeps the full sequence posterior (its
/// first and second moments from the trellis) and the M-step maximizes the
/// expected complete-data likelihood jointly — taps via the normal
/// equations, then the variance from the expected residual. This is the
/// construction covered by the EM ascent inequality: log_likelihood is
/// non-decreasing along its iterates.
ChannelParams exact_em_step_full(const std::vector<cplx>& observation,
                                 const ChannelParams& params,
                                 const Constellation& cst);

} // namespace embp

#endif
