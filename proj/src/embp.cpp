#include "embp/embp.hpp"

#include <cmath>
#include <stdexcept>

namespace embp {

InitStrategy InitStrategy::impulse_power(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("impulse_power: alpha must be in (0,1)");
    }
    InitStrategy s;
    s.kind = Kind::impulse_power;
    s.alpha = alpha;
    return s;
}

InitStrategy InitStrategy::genie_perturbed(double scale) {
    if (scale < 0.0) {
        throw std::invalid_argument("genie_perturbed: scale must be >= 0");
    }
    InitStrategy s;
    s.kind = Kind::genie_perturbed;
    s.scale = scale;
    return s;
}

InitStrategy InitStrategy::external_params(ChannelParams params) {
    if (params.h.empty() || params.sigma2 <= 0.0) {
        throw std::invalid_argument("external init: malformed parameters");
    }
    InitStrategy s;
    s.kind = Kind::external;
    s.external = std::move(params);
    return s;
}

ChannelParams initialize(const InitStrategy& strategy,
                         const std::vector<cplx>& observation, int memory,
                         const Constellation& cst,
                         const ChannelParams* truth, Rng& rng) {
    (void)cst;
    if (observation.empty()) {
        throw std::invalid_argument("initialize: empty observation");
    }
    switch (strategy.kind) {
        case InitStrategy::Kind::impulse_power: {
            double p = 0.0;
            for (const auto& v : observation) p += std::norm(v);
            p /= static_cast<double>(observation.size());
            ChannelParams init;
            init.h.assign(memory + 1, cplx(0.0, 0.0));
            init.h[0] = cplx(std::sqrt((1.0 - strategy.alpha) * p), 0.0);
            init.sigma2 = strategy.alpha * p;
            return init;
        }
        case InitStrategy::Kind::genie_perturbed: {
            if (truth == nullptr) {
                throw std::invalid_argument(
                    "genie_perturbed init requires ground truth");
            }
            ChannelParams init = *truth;
            if (strategy.scale > 0.0) {
                for (auto& tap : init.h) {
                    tap += strategy.scale * rng.cnormal(1.0);
                }
            }
            return init;
        }
        case InitStrategy::Kind::external:
            return *strategy.external;
    }
    throw std::logic_error("initialize: unreachable");
}

EmbpResult run_embp(const std::vector<cplx>& observation,
                    const Constellation& cst, int memory,
                    const Schedule& schedule, const ChannelParams& init,
                    const EmbpOptions& options) {
    schedule.validate();
    if (memory < 0 || schedule.memory() != memory) {
        throw std::invalid_argument("run_embp: schedule width != L+2");
    }
    if (init.memory() != memory || init.sigma2 <= 0.0) {
        throw std::invalid_argument("run_embp: malformed initial estimate");
    }
    const int n = static_cast<int>(observation.size()) - memory;
    if (n < 1) {
        throw std::invalid_argument("run_embp: observation too short");
    }

    const int t_max = schedule.iterations();
    EmbpResult res;
    res.trajectory.estimates.reserve(t_max + 1);
    res.trajectory.estimates.push_back(init);

    MessageSet msgs = MessageSet::uniform(n, memory, cst.size());
    BeliefSet beliefs = BeliefSet::uniform(n, cst.size());
    ChannelParams est = init;

    for (int t = 1; t <= t_max; ++t) {
        const MatchedStats stats = build_matched_stats(est, observation);
        const FactorTables factors = compute_factors(stats, cst);

        auto [m, b] = bp_iteration(msgs, beliefs, factors,
                                   schedule.beta_bp[t - 1]);
        msgs = std::move(m);
        beliefs = std::move(b);
        if (options.counters) ++options.counters->bp_iterations;

        est = em_step(t, schedule, beliefs, observation, est, cst,
                      options.counters);
        for (const auto& tap : est.h) {
            if (!std::isfinite(tap.real()) || !std::isfinite(tap.imag())) {
                throw std::runtime_error(
                    "embp: non-finite tap estimate at iteration " +
                    std::to_string(t));
            }
        }
        if (!std::isfinite(est.sigma2) || est.sigma2 <= 0.0) {
            throw std::runtime_error(
                "embp: non-finite noise estimate at iteration " +
                std::to_string(t));
        }

        res.trajectory.estimates.push_back(est);
        if (options.record_belief_history) {
            res.belief_history.push_back(beliefs);
        }
    }

    res.final_params = est;
    res.final_beliefs = std::move(beliefs);
    return res;
}

EmbpResult run_embp(const std::vector<cplx>& observation,
                    const Constellation& cst, int memory,
                    const Schedule& schedule, const InitStrategy& strategy,
                    const ChannelParams* truth, Rng& rng,
                    const EmbpOptions& options) {
    const ChannelParams init =
        initialize(strategy, observation, memory, cst, truth, rng);
    return run_embp(observation, cst, memory, schedule, init, options);
}

} // namespace embp
