#ifndef EMBP_EMBP_HPP
#define EMBP_EMBP_HPP

#include <optional>

#include "embp/em.hpp"

namespace embp {

/// Initial parameter guess for blind operation or testing. impulse_power
/// splits the observed power between a single leading tap and the noise;
/// genie_perturbed adds scaled CN(0,1) noise to the true taps (tests only);
/// external passes a caller-supplied estimate through.
struct InitStrategy {
    enum class Kind { impulse_power, genie_perturbed, external };

    Kind kind = Kind::impulse_power;
    double alpha = 0.1; // impulse_power noise share
    double scale = 0.0; // genie_perturbed tap noise scale
    std::optional<ChannelParams> external;

    static InitStrategy impulse_power(double alpha = 0.1);
    static InitStrategy genie_perturbed(double scale);
    static InitStrategy external_params(ChannelParams params);
};

ChannelParams initialize(const InitStrategy& strategy,
                         const std::vector<cplx>& observation, int memory,
                         const Constellation& cst,
                         const ChannelParams* truth, Rng& rng);

struct EmbpResult {
    ChannelParams final_params;
    BeliefSet final_beliefs;
    ParamTrajectory trajectory;                // T+1 entries
    std::vector<BeliefSet> belief_history;     // optional, per options
};

struct EmbpOptions {
    bool record_belief_history = false;
    EmCounters* counters = nullptr;
};

/// The interleaved estimator-detector: per iteration, factor tables are
/// rebuilt from the previous estimate, one momentum BP message-passing step
/// runs (messages persist across iterations), beliefs are recomputed, and
/// one momentum M-step updates the parameters.
EmbpResult run_embp(const std::vector<cplx>& observation,
                    const Constellation& cst, int memory,
                    const Schedule& schedule, const ChannelParams& init,
                    const EmbpOptions& options = {});

/// Convenience overload applying the init strategy first.
EmbpResult run_embp(const std::vector<cplx>& observation,
                    const Constellation& cst, int memory,
                    const Schedule& schedule, const InitStrategy& strategy,
                    const ChannelParams* truth, Rng& rng,
                    const EmbpOptions& options = {});

} // namespace embp

#endif
