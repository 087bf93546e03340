#include "embp/baselines.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "embp/log_domain.hpp"

namespace embp {

namespace {

double enumeration_size_or_throw(int n, int order) {
    const double total = std::pow(static_cast<double>(order), n);
    if (total > static_cast<double>(1 << 20)) {
        throw std::invalid_argument("enumeration oracle: M^N exceeds 2^20");
    }
    return total;
}

/// ||y - Hc||^2 for one candidate sequence (digits little-endian in `seq`).
double residual_norm2(const std::vector<cplx>& observation,
                      const std::vector<cplx>& h, const Constellation& cst,
                      const std::vector<int>& seq) {
    const int mem = static_cast<int>(h.size()) - 1;
    const int n = static_cast<int>(seq.size());
    double acc = 0.0;
    for (int i = 0; i < n + mem; ++i) {
        cplx mean(0.0, 0.0);
        for (int l = 0; l <= mem; ++l) {
            const int k = i - l;
            if (k >= 0 && k < n) mean += h[l] * cst.point(seq[k]);
        }
        acc += std::norm(observation[i] - mean);
    }
    return acc;
}

bool next_sequence(std::vector<int>& seq, int order) {
    for (auto& d : seq) {
        if (++d < order) return true;
        d = 0;
    }
    return false;
}

// Per-symbol Gaussian constant of the evidence; see log_likelihood docs.
double gaussian_log_const(int n, double sigma2, int order) {
    return -n * (std::log(std::numbers::pi * sigma2) +
                 std::log(static_cast<double>(order)));
}

/// Solves A x = b for a small complex system by partial-pivot elimination.
std::vector<cplx> solve_dense(std::vector<std::vector<cplx>> a,
                              std::vector<cplx> b) {
    const int n = static_cast<int>(a.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (std::abs(a[piv][col]) < 1e-12) {
            throw std::runtime_error("linear solve: rank-deficient system");
        }
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < n; ++r) {
            const cplx f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<cplx> x(n);
    for (int r = n - 1; r >= 0; --r) {
        cplx acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

} // namespace

BruteForceResult brute_force_posterior(const std::vector<cplx>& observation,
                                       const ChannelParams& params,
                                       const Constellation& cst) {
    const int mem = params.memory();
    const int n = static_cast<int>(observation.size()) - mem;
    if (n < 1) throw std::invalid_argument("observation too short");
    if (params.sigma2 <= 0.0) throw std::invalid_argument("sigma2 <= 0");
    const int order = cst.size();
    const auto total =
        static_cast<std::size_t>(enumeration_size_or_throw(n, order));

    std::vector<double> logp(total);
    std::vector<int> seq(n, 0);
    std::size_t idx = 0;
    do {
        logp[idx++] =
            -residual_norm2(observation, params.h, cst, seq) / params.sigma2;
    } while (next_sequence(seq, order));

    const double z = logsumexp(logp);
    for (auto& v : logp) v -= z;

    BruteForceResult res;
    res.marginals = BeliefSet::uniform(n, order);
    std::vector<double> acc(static_cast<std::size_t>(n) * order, kNegInf);
    seq.assign(n, 0);
    idx = 0;
    do {
        for (int k = 0; k < n; ++k) {
            double& slot = acc[static_cast<std::size_t>(k) * order + seq[k]];
            slot = logsumexp2(slot, logp[idx]);
        }
        ++idx;
    } while (next_sequence(seq, order));
    res.marginals.logb = std::move(acc);
    for (int k = 0; k < n; ++k) log_normalize(res.marginals.row(k));
    res.log_joint = std::move(logp);
    return res;
}

double log_likelihood(const std::vector<cplx>& observation,
                      const ChannelParams& params, const Constellation& cst) {
    const int mem = params.memory();
    const int n = static_cast<int>(observation.size()) - mem;
    if (n < 1) throw std::invalid_argument("observation too short");
    if (params.sigma2 <= 0.0) throw std::invalid_argument("sigma2 <= 0");
    const int order = cst.size();
    enumeration_size_or_throw(n, order);

    double lse = kNegInf;
    std::vector<int> seq(n, 0);
    do {
        lse = logsumexp2(lse, -residual_norm2(observation, params.h, cst,
                                              seq) /
                                  params.sigma2);
    } while (next_sequence(seq, order));
    return lse + gaussian_log_const(n, params.sigma2, order);
}

double elbo(const BeliefSet& q, const std::vector<cplx>& observation,
            const ChannelParams& params, const Constellation& cst) {
    const int mem = params.memory();
    const int n = static_cast<int>(observation.size()) - mem;
    if (n != q.n || q.order != cst.size()) {
        throw std::invalid_argument("elbo: belief shape mismatch");
    }
    if (params.sigma2 <= 0.0) throw std::invalid_argument("sigma2 <= 0");
    enumeration_size_or_throw(n, q.order);

    const double log_const = gaussian_log_const(n, params.sigma2, q.order);
    double acc = 0.0;
    std::vector<int> seq(n, 0);
    do {
        double logq = 0.0;
        for (int k = 0; k < n; ++k) logq += q.row(k)[seq[k]];
        const double qc = std::exp(logq);
        if (qc > 0.0) {
            const double logp =
                -residual_norm2(observation, params.h, cst, seq) /
                    params.sigma2 +
                log_const;
            acc += qc * (logp - logq);
        }
    } while (next_sequence(seq, q.order));
    return acc;
}

TrellisPosterior trellis_posterior(const std::vector<cplx>& observation,
                                   const ChannelParams& params,
                                   const Constellation& cst,
                                   const std::vector<int>& known) {
    const int mem = params.memory();
    const int n = static_cast<int>(observation.size()) - mem;
    if (n < 1) throw std::invalid_argument("observation too short");
    if (params.sigma2 <= 0.0) throw std::invalid_argument("sigma2 <= 0");
    const int order = cst.size();
    if (std::pow(static_cast<double>(order), mem) > 4096.0) {
        throw std::invalid_argument("trellis: M^L exceeds the 4096 guard");
    }
    if (!known.empty() && static_cast<int>(known.size()) != n) {
        throw std::invalid_argument("trellis: known-symbol vector length");
    }

    // States encode the last L symbols in base M+1 digits; digit 0 stands
    // for positions outside the block (start-up and tail).
    const int base = order + 1;
    int n_states = 1;
    for (int l = 0; l < mem; ++l) n_states *= base;
    const int strip = n_states / (mem > 0 ? base : 1);

    const double inv_s2 = 1.0 / params.sigma2;
    const int steps = n + mem;

    auto symbol_of = [&](int digit) {
        return digit == 0 ? cplx(0.0, 0.0) : cst.point(digit - 1);
    };
    auto branch_mean = [&](int state, int digit) {
        cplx mean = params.h[0] * symbol_of(digit);
        int s = state;
        for (int l = 1; l <= mem; ++l) {
            mean += params.h[l] * symbol_of(s % base);
            s /= base;
        }
        return mean;
    };
    auto next_state = [&](int state, int digit) {
        return mem == 0 ? 0 : (state % strip) * base + digit;
    };
    auto inputs_at = [&](int i) -> std::pair<int, int> {
        // returns [first, last] digit range for step i
        if (i >= n) return {0, 0};
        if (!known.empty() && known[i] >= 0) {
            return {known[i] + 1, known[i] + 1};
        }
        return {1, order};
    };

    std::vector<std::vector<double>> alpha(
        steps + 1, std::vector<double>(n_states, kNegInf));
    alpha[0][0] = 0.0;
    for (int i = 0; i < steps; ++i) {
        const auto [lo, hi] = inputs_at(i);
        for (int s = 0; s < n_states; ++s) {
            if (alpha[i][s] == kNegInf) continue;
            for (int g = lo; g <= hi; ++g) {
                const double metric =
                    -std::norm(observation[i] - branch_mean(s, g)) * inv_s2;
                const int ns = next_state(s, g);
                alpha[i + 1][ns] =
                    logsumexp2(alpha[i + 1][ns], alpha[i][s] + metric);
            }
        }
    }

    std::vector<std::vector<double>> beta(
        steps + 1, std::vector<double>(n_states, kNegInf));
    beta[steps].assign(n_states, 0.0);
    for (int i = steps - 1; i >= 0; --i) {
        const auto [lo, hi] = inputs_at(i);
        for (int s = 0; s < n_states; ++s) {
            double acc = kNegInf;
            for (int g = lo; g <= hi; ++g) {
                const double metric =
                    -std::norm(observation[i] - branch_mean(s, g)) * inv_s2;
                acc = logsumexp2(acc,
                                 metric + beta[i + 1][next_state(s, g)]);
            }
            beta[i][s] = acc;
        }
    }

    TrellisPosterior post;
    post.marginals = BeliefSet::uniform(n, order);
    post.mom2.assign(mem, {});
    for (int d = 1; d <= mem; ++d) {
        post.mom2[d - 1].assign(std::max(0, n - d), cplx(0.0, 0.0));
    }
    post.s2nd.assign(n, 0.0);

    // branch posteriors at step i cover the window (c_{i-L}, ..., c_i);
    // the pair (i-d, i) is accumulated exactly once, at step i
    std::vector<double> w(static_cast<std::size_t>(n_states) * order);
    for (int i = 0; i < n; ++i) {
        const auto [lo, hi] = inputs_at(i);
        double z = kNegInf;
        for (int s = 0; s < n_states; ++s) {
            for (int g = lo; g <= hi; ++g) {
                const double metric =
                    -std::norm(observation[i] - branch_mean(s, g)) * inv_s2;
                const double v = alpha[i][s] + metric +
                                 beta[i + 1][next_state(s, g)];
                w[static_cast<std::size_t>(s) * order + (g - 1)] = v;
                z = logsumexp2(z, v);
            }
        }
        auto row = post.marginals.row(i);
        for (int a = 0; a < order; ++a) row[a] = kNegInf;
        for (int s = 0; s < n_states; ++s) {
            for (int g = lo; g <= hi; ++g) {
                const double lp =
                    w[static_cast<std::size_t>(s) * order + (g - 1)] - z;
                row[g - 1] = logsumexp2(row[g - 1], lp);
                const double p = std::exp(lp);
                if (p == 0.0) continue;
                const cplx ci = cst.point(g - 1);
                post.s2nd[i] += p * std::norm(ci);
                int digits = s;
                for (int d = 1; d <= mem; ++d) {
                    const int dg = digits % base;
                    digits /= base;
                    const int a_idx = i - d;
                    if (dg != 0 && a_idx >= 0) {
                        // E[c_i c_{i-d}^*]
                        post.mom2[d - 1][a_idx] +=
                            p * ci * std::conj(symbol_of(dg));
                    }
                }
            }
        }
        // pilots leave the other symbols at probability zero; flooring keeps
        // downstream log arithmetic finite
        for (int a = 0; a < order; ++a) {
            row[a] = std::max(row[a], 2.0 * kLogFloor);
        }
        log_normalize(row);
    }
    return post;
}

BeliefSet trellis_map_detect(const std::vector<cplx>& observation,
                             const ChannelParams& params,
                             const Constellation& cst,
                             const std::vector<int>& known) {
    return trellis_posterior(observation, params, cst, known).marginals;
}

int PilotConfig::count(int n) const {
    return static_cast<int>(std::lround(fraction * n));
}

std::vector<int> make_pilot_symbols(const Constellation& cst, int count,
                                    std::uint64_t seed) {
    Rng rng(seed);
    return sample_symbols(cst, count, rng);
}

ChannelParams pilot_ls_estimate(const std::vector<cplx>& observation,
                                const std::vector<int>& pilot_symbols,
                                const Constellation& cst, int memory) {
    const int np = static_cast<int>(pilot_symbols.size());
    const int rows = np - memory;
    if (rows < memory + 1) {
        throw std::invalid_argument(
            "pilot_ls_estimate: need at least L+1 interference-free samples");
    }
    // rows are observation indices L..Np-1, whose receptive fields only
    // touch pilot positions
    std::vector<std::vector<cplx>> ata(
        memory + 1, std::vector<cplx>(memory + 1, cplx(0.0, 0.0)));
    std::vector<cplx> atb(memory + 1, cplx(0.0, 0.0));
    for (int r = 0; r < rows; ++r) {
        const int i = memory + r;
        for (int a = 0; a <= memory; ++a) {
            const cplx ca = cst.point(pilot_symbols[i - a]);
            atb[a] += std::conj(ca) * observation[i];
            for (int b = 0; b <= memory; ++b) {
                ata[a][b] +=
                    std::conj(ca) * cst.point(pilot_symbols[i - b]);
            }
        }
    }
    ChannelParams est;
    est.h = solve_dense(std::move(ata), std::move(atb));

    double resid = 0.0;
    for (int r = 0; r < rows; ++r) {
        const int i = memory + r;
        cplx mean(0.0, 0.0);
        for (int a = 0; a <= memory; ++a) {
            mean += est.h[a] * cst.point(pilot_symbols[i - a]);
        }
        resid += std::norm(observation[i] - mean);
    }
    est.sigma2 = std::max(resid / rows, sigma2_floor(observation));
    return est;
}

ChannelParams exact_em_step(const std::vector<cplx>& observation,
                            const ChannelParams& params,
                            const Constellation& cst) {
    const BeliefSet marginals = trellis_map_detect(observation, params, cst);
    const Schedule full = make_parallel_schedule(1, params.memory());
    return em_step(1, full, marginals, observation, params, cst);
}

ChannelParams exact_em_step_full(const std::vector<cplx>& observation,
                                 const ChannelParams& params,
                                 const Constellation& cst) {
    const int mem = params.memory();
    const int n = static_cast<int>(observation.size()) - mem;
    const TrellisPosterior post =
        trellis_posterior(observation, params, cst);
    const SymbolMoments first = symbol_moments(post.marginals, cst);

    // rho_l = sum_n y_{n+l} E[c_n]^*
    std::vector<cplx> rho(mem + 1, cplx(0.0, 0.0));
    for (int l = 0; l <= mem; ++l) {
        for (int k = 0; k < n; ++k) {
            rho[l] += observation[k + l] * std::conj(first.z[k]);
        }
    }

    // R_{k,l} = sum_i E[c_{i-l} c_{i-k}^*], true pairwise moments
    std::vector<std::vector<cplx>> r(mem + 1,
                                     std::vector<cplx>(mem + 1));
    for (int k = 0; k <= mem; ++k) {
        for (int l = 0; l <= mem; ++l) {
            const int delta = l - k; // = (i-k) - (i-l) so pair (a, a+delta)
            cplx acc(0.0, 0.0);
            if (delta == 0) {
                for (double s : post.s2nd) acc += s;
            } else if (delta > 0) {
                for (const auto& m : post.mom2[delta - 1]) {
                    acc += std::conj(m); // E[c_a c_{a+delta}^*]
                }
            } else {
                for (const auto& m : post.mom2[-delta - 1]) acc += m;
            }
            r[k][l] = acc;
        }
    }

    ChannelParams next = params;
    next.h = solve_dense(r, rho);

    double a_resid = 0.0;
    for (const auto& v : observation) a_resid += std::norm(v);
    for (int l = 0; l <= mem; ++l) {
        a_resid -= 2.0 * (std::conj(rho[l]) * next.h[l]).real();
    }
    for (int k = 0; k <= mem; ++k) {
        for (int l = 0; l <= mem; ++l) {
            a_resid +=
                (std::conj(next.h[k]) * r[k][l] * next.h[l]).real();
        }
    }
    next.sigma2 = std::max(a_resid / n, sigma2_floor(observation));
    return next;
}

} // namespace embp
