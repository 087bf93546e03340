#include "embp/selftest.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "embp/experiment.hpp"
#include "embp/losses.hpp"

namespace embp {

namespace {

struct Ctx {
    std::ostream* os;
    bool all_ok = true;

    void check(const std::string& name, bool ok, const std::string& detail) {
        *os << (ok ? "[ok]   " : "[FAIL] ") << name;
        if (!ok && !detail.empty()) *os << "  (" << detail << ")";
        *os << "\n";
        all_ok &= ok;
    }
};

struct Instance {
    ChannelParams params;
    TransmissionBlock block;
};

Instance make_instance(int memory, int n, double snr_db, std::uint64_t seed,
                       const Constellation& cst) {
    Rng ch(derive_seed(seed, 81));
    Rng tx(derive_seed(seed, 82));
    auto p = sample_channel(memory, ch);
    p.sigma2 = snr_to_sigma2(snr_db, p.h, cst, n);
    return {p, transmit(p, sample_symbols(cst, n, tx), cst, tx)};
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// literal transcription of the closed-form variance update with full-matrix
// indexing, independent of the banded implementation
double sigma2_literal(const BeliefSet& b, const std::vector<cplx>& y,
                      const ChannelParams& cur, const Constellation& cst) {
    const auto st = build_matched_stats(cur, y);
    const int n = st.block_length();
    double total = 0.0;
    for (const auto& v : y) total += std::norm(v);
    for (int nn = 0; nn < n; ++nn) {
        for (int cn = 0; cn < cst.size(); ++cn) {
            double inner = 2.0 * (st.x[nn] * std::conj(cst.point(cn))).real() -
                           st.g.at(nn, nn).real() * std::norm(cst.point(cn));
            for (int mm = 0; mm < nn; ++mm) {
                for (int cm = 0; cm < cst.size(); ++cm) {
                    inner -= b.prob(mm, cm) * 2.0 *
                             (st.g.at(nn, mm) * cst.point(cm) *
                              std::conj(cst.point(cn)))
                                 .real();
                }
            }
            total -= b.prob(nn, cn) * inner;
        }
    }
    return total / n;
}

// literal tap update with the Re/Im sign template
cplx tap_literal(int ell, const BeliefSet& b, const std::vector<cplx>& y,
                 const ChannelParams& cur, const Constellation& cst) {
    const int n = b.n;
    const int mem = cur.memory();
    cplx numer(0.0, 0.0);
    double denom = 0.0;
    for (int nn = 0; nn < n; ++nn) {
        for (int cn = 0; cn < cst.size(); ++cn) {
            const double w = b.prob(nn, cn);
            const cplx c_n = cst.point(cn);
            numer += w * y[nn + ell] * std::conj(c_n);
            denom += w * std::norm(c_n);
            for (int k = 0; k <= mem; ++k) {
                if (k == ell) continue;
                const int other = nn - std::abs(ell - k);
                if (other < 0 || other >= n) continue;
                const double sgn = ell > k ? 1.0 : -1.0;
                for (int cm = 0; cm < cst.size(); ++cm) {
                    const cplx prod = cst.point(cm) * std::conj(c_n);
                    numer -= w * b.prob(other, cm) * cur.h[k] *
                             cplx(prod.real(), -prod.imag() * sgn);
                }
            }
        }
    }
    return numer / denom;
}

BeliefSet random_beliefs(int n, int order, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 83));
    BeliefSet b = BeliefSet::uniform(n, order);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < order; ++i) b.row(k)[i] = 3.0 * rng.uniform();
        log_normalize(b.row(k));
    }
    return b;
}

} // namespace

bool run_selftest(std::ostream& os) {
    Ctx ctx{&os};
    const auto bpsk = Constellation::bpsk();

    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const int mem = 1 + static_cast<int>(seed % 2);
            const auto inst = make_instance(mem, 6, 6.0, seed, bpsk);
            const auto bf = brute_force_posterior(inst.block.observation,
                                                  inst.params, bpsk);
            const auto tr = trellis_map_detect(inst.block.observation,
                                               inst.params, bpsk);
            for (int k = 0; k < 6; ++k) {
                for (int i = 0; i < 2; ++i) {
                    worst = std::max(
                        worst, std::abs(std::exp(tr.row(k)[i]) -
                                        std::exp(bf.marginals.row(k)[i])));
                }
            }
        }
        ctx.check("trellis MAP == enumeration (10 instances)", worst < 1e-9,
                  "worst " + std::to_string(worst));
    }
    {
        const auto inst = make_instance(1, 2, 5.0, 3, bpsk);
        const auto beliefs =
            run_bp(build_matched_stats(inst.params, inst.block.observation),
                   bpsk, 50, 1.0);
        const auto bf = brute_force_posterior(inst.block.observation,
                                              inst.params, bpsk);
        double worst = 0.0;
        for (int k = 0; k < 2; ++k) {
            for (int i = 0; i < 2; ++i) {
                worst = std::max(worst,
                                 std::abs(std::exp(beliefs.row(k)[i]) -
                                          std::exp(bf.marginals.row(k)[i])));
            }
        }
        ctx.check("BP beliefs exact on the single-edge graph", worst < 1e-6,
                  "worst " + std::to_string(worst));
    }
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto inst = make_instance(2, 5, 7.0, 40 + seed, bpsk);
            const auto b = random_beliefs(5, 2, seed);
            const double mine = update_sigma2(b, inst.block.observation,
                                              inst.params, bpsk);
            const double lit = sigma2_literal(b, inst.block.observation,
                                              inst.params, bpsk);
            worst = std::max(worst, std::abs(mine - lit));
            for (int l = 0; l <= 2; ++l) {
                const cplx m2 = update_tap(l, b, inst.block.observation,
                                           inst.params, bpsk);
                const cplx l2 = tap_literal(l, b, inst.block.observation,
                                            inst.params, bpsk);
                worst = std::max(worst, std::abs(m2 - l2));
            }
        }
        ctx.check("closed-form updates == literal transcription",
                  worst < 1e-9, "worst " + std::to_string(worst));
    }
    {
        bool ok = true;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto inst = make_instance(1, 4, 5.0, 60 + seed, bpsk);
            const auto q = random_beliefs(4, 2, 100 + seed);
            const double lb =
                elbo(q, inst.block.observation, inst.params, bpsk);
            const double ll =
                log_likelihood(inst.block.observation, inst.params, bpsk);
            ok &= lb <= ll + 1e-9;
        }
        ctx.check("evidence bound: elbo <= log_likelihood", ok, "");
    }
    {
        const auto inst = make_instance(2, 24, 8.0, 71, bpsk);
        Schedule s = make_parallel_schedule(6, 2);
        for (auto& row : s.beta_em) {
            for (auto& v : row) v = 0.0;
        }
        const auto res =
            run_embp(inst.block.observation, bpsk, 2, s, inst.params);
        const auto coh =
            run_bp(build_matched_stats(inst.params, inst.block.observation),
                   bpsk, 6, 1.0);
        ctx.check("frozen M-steps degenerate to coherent BP bit-exactly",
                  res.final_beliefs.logb == coh.logb, "");
    }
    {
        const auto inst = make_instance(2, 12, 8.0, 72, bpsk);
        const auto st =
            build_matched_stats(inst.params, inst.block.observation);
        const auto factors = compute_factors(st, bpsk);
        auto msgs = MessageSet::uniform(12, 2, 2);
        auto beliefs = BeliefSet::uniform(12, 2);
        std::tie(msgs, beliefs) = bp_iteration(msgs, beliefs, factors, 1.0);
        const auto plain = message_update(msgs, beliefs, factors);
        const auto [m1, b1] = bp_iteration(msgs, beliefs, factors, 1.0);
        const auto [m0, b0] = bp_iteration(msgs, beliefs, factors, 0.0);
        ctx.check("momentum degeneracies (beta 1 plain, beta 0 frozen)",
                  m1.storage() == plain.storage() &&
                      m0.storage() == msgs.storage(),
                  "");
    }
    {
        int worst_count = 0;
        for (int rep = 0; rep < 10; ++rep) {
            const auto inst = make_instance(2, 8, 8.0, 900 + rep, bpsk);
            Rng ir(derive_seed(900 + rep, 84));
            ChannelParams est = inst.params;
            for (auto& t : est.h) t += 0.1 * ir.cnormal(1.0);
            double prev =
                log_likelihood(inst.block.observation, est, bpsk);
            for (int it = 0; it < 20; ++it) {
                est = exact_em_step_full(inst.block.observation, est, bpsk);
                const double cur =
                    log_likelihood(inst.block.observation, est, bpsk);
                if (cur < prev - 1e-9) ++worst_count;
                prev = cur;
            }
        }
        ctx.check("full-posterior EM likelihood ascent", worst_count == 0,
                  std::to_string(worst_count) + " drops");
    }
    {
        const double snr_db = 4.0;
        long errors = 0, bits = 0;
        for (int b = 0; b < 200; ++b) {
            const auto inst = make_instance(0, 500, snr_db, 1200 + b, bpsk);
            const auto tr = trellis_map_detect(inst.block.observation,
                                               inst.params, bpsk);
            const auto dec = detect(tr);
            for (int k = 0; k < 500; ++k) {
                errors += dec[k] != inst.block.symbols[k];
            }
            bits += 500;
        }
        const double p =
            q_function(std::sqrt(2.0 * std::pow(10.0, snr_db / 10.0)));
        const double sd = std::sqrt(p * (1.0 - p) / bits);
        const double ber = static_cast<double>(errors) / bits;
        ctx.check("analytic AWGN BER anchor (1e5 bits)",
                  std::abs(ber - p) < 3.0 * sd,
                  "ber " + std::to_string(ber) + " expected " +
                      std::to_string(p));
    }
    {
        ExperimentConfig cfg;
        cfg.n = 32;
        cfg.memory = 2;
        cfg.snr_db = {6.0};
        cfg.blocks = 64;
        cfg.seed = 99;
        cfg.iterations = 6;
        cfg.init = InitStrategy::genie_perturbed(0.1);
        std::ostringstream a, b;
        write_sweep_csv(a, cfg, run_ber_sweep(cfg));
        write_sweep_csv(b, cfg, run_ber_sweep(cfg));
        ctx.check("mini sweep rerun is byte-identical", a.str() == b.str(),
                  "");
    }
    os << (ctx.all_ok ? "selftest: all checks passed\n"
                      : "selftest: FAILURES present\n");
    return ctx.all_ok;
}

} // namespace embp
