#ifndef EMBP_UNROLLED_HPP
#define EMBP_UNROLLED_HPP

#include "embp/embp.hpp"

namespace embp {

enum class Objective { mse_h, neg_bmi };

/// What the training loss is measured against at the final iteration.
struct LossTarget {
    Objective objective = Objective::mse_h;
    const std::vector<int>* symbols = nullptr; // required for neg_bmi
    const ChannelParams* truth = nullptr;      // required for mse_h
};

struct UnrolledOutput {
    double loss = 0.0;
    std::vector<std::vector<double>> d_beta_em; // T x (L+2)
    std::vector<double> d_beta_bp;              // T
    ChannelParams final_params;
    BeliefSet final_beliefs;
};

/// Forward EMBP with a recorded trace followed by a hand-written
/// reverse-mode sweep over the unrolled computation; returns the loss and
/// its exact derivative with respect to every momentum weight. The forward
/// pass computes raw parameter updates even where beta_em is 0 so that the
/// sensitivity d loss / d beta exists at the boundary; outputs equal
/// run_embp for the same inputs.
UnrolledOutput unrolled_gradient(const std::vector<cplx>& observation,
                                 const Constellation& cst, int memory,
                                 const Schedule& schedule,
                                 const ChannelParams& init,
                                 const LossTarget& target);

/// Forward-only evaluation of the same loss through the production path.
double embp_loss(const std::vector<cplx>& observation,
                 const Constellation& cst, int memory,
                 const Schedule& schedule, const ChannelParams& init,
                 const LossTarget& target);

} // namespace embp

#endif
