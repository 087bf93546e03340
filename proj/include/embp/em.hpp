#ifndef EMBP_EM_HPP
#define EMBP_EM_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "embp/bp.hpp"
#include "embp/channel.hpp"
#include "embp/matched.hpp"

namespace embp {

/// Momentum update plan: beta_em is T x (L+2) with columns (h_0..h_L,
/// sigma2), beta_bp has one weight per iteration. An exact 0 entry means the
/// parameter is copied and its raw update is never computed.
struct Schedule {
    std::vector<std::vector<double>> beta_em;
    std::vector<double> beta_bp;

    int iterations() const { return static_cast<int>(beta_em.size()); }
    int width() const {
        return beta_em.empty() ? 0 : static_cast<int>(beta_em.front().size());
    }
    int memory() const { return width() - 2; }

    /// Count of nonzero beta_em entries = raw parameter updates per block.
    int update_count() const;

    void validate() const; // throws on shape/range violations
};

Schedule make_serial_schedule(int t, int memory);
Schedule make_parallel_schedule(int t, int memory);
Schedule make_custom_schedule(std::vector<std::vector<double>> beta_em,
                              std::vector<double> beta_bp);

/// "serial" or "parallel"; anything else is treated as a schedule file path.
Schedule schedule_by_name(const std::string& name, int t, int memory);

/// Text format: first line T, then T rows of L+2 reals (beta_em), then one
/// row of T reals (beta_bp). Printed with enough digits that reading the
/// file back reproduces every double exactly.
void save_schedule(const Schedule& s, std::ostream& os);
void save_schedule_file(const Schedule& s, const std::string& path);
Schedule load_schedule(std::istream& is);
Schedule load_schedule_file(const std::string& path);

/// Estimates theta_hat^(0..T) of one run.
struct ParamTrajectory {
    std::vector<ChannelParams> estimates;
};

/// Posterior symbol moments under factorized beliefs: z_n = E[c_n],
/// s_n = E[|c_n|^2].
struct SymbolMoments {
    std::vector<cplx> z;
    std::vector<double> s;
};
SymbolMoments symbol_moments(const BeliefSet& beliefs,
                             const Constellation& cst);

/// Noise floor: 1e-8 times the mean observed power. Keeps the variance
/// estimate positive on noiseless data, where the raw update reaches 0.
double sigma2_floor(const std::vector<cplx>& observation);

/// Raw variance update: the expected residual power ||y - Hc||^2 under the
/// beliefs, normalized by N, floored. x and G are built from `current`.
double update_sigma2(const BeliefSet& beliefs,
                     const std::vector<cplx>& observation,
                     const ChannelParams& current, const Constellation& cst);

/// Raw tap update for h_ell: belief-weighted correlation of y against the
/// symbol estimate, minus the cross-tap interference attributed to the other
/// taps at their current values, over the total symbol energy.
cplx update_tap(int ell, const BeliefSet& beliefs,
                const std::vector<cplx>& observation,
                const ChannelParams& current, const Constellation& cst);

/// Internal forms reusing precomputed stats/moments (used by em_step and the
/// unrolled trainer; results are identical to the public operations).
double raw_sigma2_update(const MatchedStats& stats, const SymbolMoments& mom,
                         const std::vector<cplx>& observation);
cplx raw_tap_update(int ell, const SymbolMoments& mom,
                    const std::vector<cplx>& observation,
                    const std::vector<cplx>& h_current);

struct EmCounters {
    std::uint64_t tap_updates = 0;
    std::uint64_t sigma2_updates = 0;
    std::uint64_t bp_iterations = 0;
};

/// One M-step with momentum row t (1-based). All raw updates read the
/// previous estimate; the momentum combinations are applied afterwards.
ChannelParams em_step(int t, const Schedule& schedule,
                      const BeliefSet& beliefs,
                      const std::vector<cplx>& observation,
                      const ChannelParams& current, const Constellation& cst,
                      EmCounters* counters = nullptr);

} // namespace embp

#endif
