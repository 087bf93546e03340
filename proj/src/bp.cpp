#include "embp/bp.hpp"

#include <cmath>
#include <stdexcept>

namespace embp {

BeliefSet BeliefSet::uniform(int n, int order) {
    BeliefSet b;
    b.n = n;
    b.order = order;
    b.logb.assign(static_cast<std::size_t>(n) * order,
                  -std::log(static_cast<double>(order)));
    return b;
}

MessageSet MessageSet::uniform(int n, int band, int order) {
    MessageSet m;
    m.n_ = n;
    m.band_ = band;
    m.order_ = order;
    m.raw_.assign(static_cast<std::size_t>(n) * 2 * band * order,
                  -std::log(static_cast<double>(order)));
    return m;
}

MessageSet message_update(const MessageSet& msgs, const BeliefSet& beliefs,
                          const FactorTables& factors) {
    const int n = msgs.block_length();
    const int band = msgs.bandwidth();
    const int order = msgs.order();

    MessageSet out = msgs;
    std::vector<double> ext(order);
    std::vector<double> terms(order);

    for (int u = 0; u < n; ++u) {
        for (int off = -band; off <= band; ++off) {
            if (off == 0 || !msgs.edge_valid(u, off)) continue;
            const int v = u + off;
            const auto rev = msgs.mu(v, -off);
            const auto b_u = beliefs.row(u);
            for (int i = 0; i < order; ++i) {
                ext[i] = b_u[i] - std::max(rev[i], kLogFloor);
            }
            auto dst = out.mu(u, off);
            for (int j = 0; j < order; ++j) {
                for (int i = 0; i < order; ++i) {
                    const double li = v > u ? factors.log_i(u, off, j, i)
                                            : factors.log_i(v, -off, i, j);
                    terms[i] = li + ext[i];
                }
                dst[j] = logsumexp(terms);
            }
            const double z = logsumexp(dst);
            if (!std::isfinite(z)) {
                throw std::runtime_error(
                    "bp: message underflowed to an all-zero distribution");
            }
            for (int j = 0; j < order; ++j) dst[j] -= z;
        }
    }
    return out;
}

BeliefSet beliefs_from(const MessageSet& msgs, const FactorTables& factors) {
    const int n = msgs.block_length();
    const int band = msgs.bandwidth();
    const int order = msgs.order();

    BeliefSet out;
    out.n = n;
    out.order = order;
    out.logb.resize(static_cast<std::size_t>(n) * order);

    for (int k = 0; k < n; ++k) {
        auto row = out.row(k);
        for (int i = 0; i < order; ++i) row[i] = factors.log_f(k, i);
        for (int off = -band; off <= band; ++off) {
            if (off == 0) continue;
            const int src = k - off;
            if (src < 0 || src >= n) continue;
            const auto in = msgs.mu(src, off);
            for (int i = 0; i < order; ++i) row[i] += in[i];
        }
        const double z = logsumexp(row);
        if (!std::isfinite(z)) {
            throw std::runtime_error("bp: belief underflowed");
        }
        for (int i = 0; i < order; ++i) row[i] -= z;
    }
    return out;
}

std::pair<MessageSet, BeliefSet> bp_iteration(const MessageSet& msgs,
                                              const BeliefSet& beliefs,
                                              const FactorTables& factors,
                                              double beta_bp) {
    if (beta_bp < 0.0 || beta_bp > 1.0) {
        throw std::invalid_argument("beta_bp must lie in [0, 1]");
    }
    MessageSet next;
    if (beta_bp == 0.0) {
        next = msgs;
    } else if (beta_bp == 1.0) {
        next = message_update(msgs, beliefs, factors);
    } else {
        next = message_update(msgs, beliefs, factors);
        const double lb = std::log(beta_bp);
        const double lb1 = std::log1p(-beta_bp);
        auto& fresh = next.storage();
        const auto& old = msgs.storage();
        for (std::size_t k = 0; k < fresh.size(); ++k) {
            fresh[k] = logsumexp2(lb + fresh[k], lb1 + old[k]);
        }
    }
    BeliefSet nb = beliefs_from(next, factors);
    return {std::move(next), std::move(nb)};
}

BeliefSet run_bp(const MatchedStats& stats, const Constellation& cst, int t,
                 std::span<const double> beta_bp) {
    if (t < 1) {
        throw std::invalid_argument("run_bp: need at least one iteration");
    }
    if (static_cast<int>(beta_bp.size()) != t) {
        throw std::invalid_argument("run_bp: beta_bp length must equal T");
    }
    const FactorTables factors = compute_factors(stats, cst);
    const int n = stats.block_length();
    MessageSet msgs = MessageSet::uniform(n, stats.g.bandwidth(), cst.size());
    BeliefSet beliefs = BeliefSet::uniform(n, cst.size());
    for (int it = 0; it < t; ++it) {
        auto [m, b] = bp_iteration(msgs, beliefs, factors, beta_bp[it]);
        msgs = std::move(m);
        beliefs = std::move(b);
    }
    return beliefs;
}

BeliefSet run_bp(const MatchedStats& stats, const Constellation& cst, int t,
                 double beta_bp) {
    std::vector<double> betas(static_cast<std::size_t>(std::max(t, 0)),
                              beta_bp);
    return run_bp(stats, cst, t, betas);
}

std::vector<int> detect(const BeliefSet& beliefs) {
    std::vector<int> out(beliefs.n);
    for (int k = 0; k < beliefs.n; ++k) {
        const auto row = beliefs.row(k);
        int best = 0;
        for (int i = 1; i < beliefs.order; ++i) {
            if (row[i] > row[best]) best = i;
        }
        out[k] = best;
    }
    return out;
}

} // namespace embp
