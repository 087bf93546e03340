#ifndef EMBP_LOSSES_HPP
#define EMBP_LOSSES_HPP

#include "embp/embp.hpp"

namespace embp {

/// Squared channel estimation error min(||h_hat - h||^2, ||h_hat + h||^2);
/// the min absorbs the global sign ambiguity of symmetric constellations.
double loss_mse(const std::vector<cplx>& h_hat, const std::vector<cplx>& h);
double loss_mse(const EmbpResult& result, const ChannelParams& truth);

/// Bitwise mutual information of soft outputs against the true symbols:
/// log2(M) minus the per-symbol cross entropy, beliefs floored at 1e-30.
/// Unclipped (can go negative); clip only for reporting.
double bmi(const BeliefSet& beliefs, const std::vector<int>& true_symbols,
           const Constellation& cst);
double bmi_clipped(const BeliefSet& beliefs,
                   const std::vector<int>& true_symbols,
                   const Constellation& cst);

/// Training loss for the detection objective: -BMI.
double loss_bmi(const BeliefSet& beliefs, const std::vector<int>& true_symbols,
                const Constellation& cst);

/// Sum of |beta| over the k_prime smallest-|beta| entries of beta_em, ties
/// broken by (iteration, parameter index) order.
double l1_penalty(const Schedule& schedule, int k_prime);

/// Flat positions (t * width + k) of the k_prime smallest-|beta| entries,
/// same tie-break as l1_penalty. Used for both the penalty and the final
/// hard pruning.
std::vector<int> smallest_beta_entries(const Schedule& schedule, int k_prime);

} // namespace embp

#endif
