#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "embp/baselines.hpp"
#include "embp/em.hpp"

using namespace embp;

namespace {

ChannelParams random_channel(int memory, double sigma2, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 300));
    auto p = sample_channel(memory, rng);
    p.sigma2 = sigma2;
    return p;
}

BeliefSet delta_beliefs(const std::vector<int>& symbols, int order) {
    BeliefSet b = BeliefSet::uniform(static_cast<int>(symbols.size()), order);
    for (int k = 0; k < b.n; ++k) {
        for (int i = 0; i < order; ++i) {
            b.row(k)[i] = i == symbols[k] ? 0.0 : 2.0 * kLogFloor;
        }
        log_normalize(b.row(k));
    }
    return b;
}

BeliefSet random_beliefs(int n, int order, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 400));
    BeliefSet b = BeliefSet::uniform(n, order);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < order; ++i) b.row(k)[i] = 3.0 * rng.uniform();
        log_normalize(b.row(k));
    }
    return b;
}

double residual_mean_power(const std::vector<cplx>& y,
                           const std::vector<cplx>& h,
                           const std::vector<int>& symbols,
                           const Constellation& cst) {
    const auto clean = convolve(h, symbols, cst);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::norm(y[i] - clean[i]);
    return acc / static_cast<double>(symbols.size());
}

/// Literal transcription of the closed-form variance update, written with
/// explicit symbol sums and full-matrix indexing as an independent check on
/// the banded implementation. The lower-triangle Gram entry pairs with
/// c_m c_n^* so the expression reduces to E||y - Hc||^2 for any alphabet.
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

/// Literal transcription of the tap update with the Re/Im sign template and
/// the belief at index n - |l - k|; out-of-range terms are dropped.
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
                    const cplx factor(prod.real(), -prod.imag() * sgn);
                    numer -= w * b.prob(other, cm) * cur.h[k] * factor;
                }
            }
        }
    }
    return numer / denom;
}

} // namespace

TEST_CASE("update_sigma2") {
    const auto bpsk = Constellation::bpsk();
    Rng rng(derive_seed(1, 500));
    SUBCASE("delta beliefs, noiseless: floored at a small positive value") {
        auto p = random_channel(1, 0.0, 11);
        const auto syms = sample_symbols(bpsk, 6, rng);
        const auto y = convolve(p.h, syms, bpsk);
        p.sigma2 = 0.2; // current estimate, not the true (zero) noise
        const double s2 =
            update_sigma2(delta_beliefs(syms, 2), y, p, bpsk);
        CHECK(s2 == doctest::Approx(sigma2_floor(y)));
        CHECK(s2 > 0.0);
    }
    SUBCASE("delta beliefs, noisy: mean residual power") {
        auto p = random_channel(2, 0.15, 12);
        const auto syms = sample_symbols(bpsk, 8, rng);
        const auto blk = transmit(p, syms, bpsk, rng);
        const double s2 =
            update_sigma2(delta_beliefs(syms, 2), blk.observation, p, bpsk);
        CHECK(s2 == doctest::Approx(residual_mean_power(
                        blk.observation, p.h, syms, bpsk))
                        .epsilon(1e-12));
    }
    SUBCASE("random beliefs match the literal transcription") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto p = random_channel(1, 0.4, seed);
            Rng r2(derive_seed(seed, 501));
            const auto syms = sample_symbols(bpsk, 4, r2);
            const auto blk = transmit(p, syms, bpsk, r2);
            const auto b = random_beliefs(4, 2, seed);
            CHECK(update_sigma2(b, blk.observation, p, bpsk) ==
                  doctest::Approx(
                      sigma2_literal(b, blk.observation, p, bpsk))
                      .epsilon(1e-9));
        }
    }
    SUBCASE("complex constellation: literal check and residual identity") {
        const auto qpsk = Constellation::psk(4);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto p = random_channel(2, 0.3, seed + 40);
            Rng r2(derive_seed(seed, 502));
            const auto syms = sample_symbols(qpsk, 5, r2);
            const auto blk = transmit(p, syms, qpsk, r2);
            const auto b = random_beliefs(5, 4, seed + 40);
            CHECK(update_sigma2(b, blk.observation, p, qpsk) ==
                  doctest::Approx(
                      sigma2_literal(b, blk.observation, p, qpsk))
                      .epsilon(1e-9));
            // delta beliefs reduce the bracket to the true residual
            CHECK(update_sigma2(delta_beliefs(syms, 4), blk.observation, p,
                                qpsk) ==
                  doctest::Approx(residual_mean_power(blk.observation, p.h,
                                                      syms, qpsk))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("update_tap") {
    const auto bpsk = Constellation::bpsk();
    Rng rng(derive_seed(2, 600));
    SUBCASE("memoryless correlation estimator is exact on clean data") {
        auto p = random_channel(0, 0.0, 13);
        const auto syms = sample_symbols(bpsk, 12, rng);
        const auto y = convolve(p.h, syms, bpsk);
        p.sigma2 = 0.1;
        const cplx h0 =
            update_tap(0, delta_beliefs(syms, 2), y, p, bpsk);
        CHECK(std::abs(h0 - p.h[0]) < 1e-12);
    }
    SUBCASE("noiseless fixed point at the truth") {
        auto p = random_channel(1, 0.0, 14);
        const auto syms = sample_symbols(bpsk, 10, rng);
        const auto y = convolve(p.h, syms, bpsk);
        p.sigma2 = 0.05;
        const auto b = delta_beliefs(syms, 2);
        for (int l = 0; l <= 1; ++l) {
            CHECK(std::abs(update_tap(l, b, y, p, bpsk) - p.h[l]) < 1e-9);
        }
    }
    SUBCASE("random beliefs match the literal Re/Im template") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto p = random_channel(2, 0.5, seed + 70);
            Rng r2(derive_seed(seed, 601));
            const auto syms = sample_symbols(bpsk, 6, r2);
            const auto blk = transmit(p, syms, bpsk, r2);
            const auto b = random_beliefs(6, 2, seed + 70);
            for (int l = 0; l <= 2; ++l) {
                const cplx mine = update_tap(l, b, blk.observation, p, bpsk);
                const cplx lit = tap_literal(l, b, blk.observation, p, bpsk);
                CHECK(std::abs(mine - lit) < 1e-9);
            }
        }
    }
    SUBCASE("complex constellation literal agreement") {
        const auto qpsk = Constellation::psk(4);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto p = random_channel(2, 0.5, seed + 90);
            Rng r2(derive_seed(seed, 602));
            const auto syms = sample_symbols(qpsk, 5, r2);
            const auto blk = transmit(p, syms, qpsk, r2);
            const auto b = random_beliefs(5, 4, seed + 90);
            for (int l = 0; l <= 2; ++l) {
                const cplx mine = update_tap(l, b, blk.observation, p, qpsk);
                const cplx lit = tap_literal(l, b, blk.observation, p, qpsk);
                CHECK(std::abs(mine - lit) < 1e-9);
            }
        }
    }
    SUBCASE("finite-difference stationarity of the evidence bound") {
        auto p = random_channel(2, 0.6, 15);
        Rng r2(derive_seed(15, 603));
        const auto syms = sample_symbols(bpsk, 4, r2);
        const auto blk = transmit(p, syms, bpsk, r2);
        const auto b = random_beliefs(4, 2, 15);

        const double eps = 1e-5;
        for (int l = 0; l <= 2; ++l) {
            const cplx raw = update_tap(l, b, blk.observation, p, bpsk);
            ChannelParams at = p;
            at.h[l] = raw;
            for (int part = 0; part < 2; ++part) {
                ChannelParams hi = at;
                ChannelParams lo = at;
                const cplx d = part == 0 ? cplx(eps, 0.0) : cplx(0.0, eps);
                hi.h[l] += d;
                lo.h[l] -= d;
                const double g = (elbo(b, blk.observation, hi, bpsk) -
                                  elbo(b, blk.observation, lo, bpsk)) /
                                 (2.0 * eps);
                CHECK(std::abs(g) < 1e-6);
            }
        }
    }
    SUBCASE("finite-difference stationarity of the variance update") {
        auto p = random_channel(1, 0.5, 16);
        Rng r2(derive_seed(16, 604));
        const auto syms = sample_symbols(bpsk, 5, r2);
        const auto blk = transmit(p, syms, bpsk, r2);
        const auto b = random_beliefs(5, 2, 16);

        const double raw = update_sigma2(b, blk.observation, p, bpsk);
        ChannelParams at = p;
        const double eps = 1e-6 * raw;
        at.sigma2 = raw + eps;
        const double up = elbo(b, blk.observation, at, bpsk);
        at.sigma2 = raw - eps;
        const double dn = elbo(b, blk.observation, at, bpsk);
        const double g = (up - dn) / (2.0 * eps);
        CHECK(std::abs(g) < 1e-5 * std::abs(up));
    }
}

TEST_CASE("em_step momentum semantics") {
    const auto bpsk = Constellation::bpsk();
    auto p = random_channel(1, 0.4, 17);
    Rng rng(derive_seed(17, 700));
    const auto syms = sample_symbols(bpsk, 8, rng);
    const auto blk = transmit(p, syms, bpsk, rng);
    const auto b = random_beliefs(8, 2, 17);

    SUBCASE("all-zero row copies and computes nothing") {
        Schedule s = make_custom_schedule({{0.0, 0.0, 0.0}}, {1.0});
        EmCounters counters;
        const auto next =
            em_step(1, s, b, blk.observation, p, bpsk, &counters);
        CHECK(next.h == p.h);
        CHECK(next.sigma2 == p.sigma2);
        CHECK(counters.tap_updates == 0);
        CHECK(counters.sigma2_updates == 0);
    }
    SUBCASE("all-ones row returns raw updates, jacobi style") {
        Schedule s = make_custom_schedule({{1.0, 1.0, 1.0}}, {1.0});
        EmCounters counters;
        const auto next =
            em_step(1, s, b, blk.observation, p, bpsk, &counters);
        CHECK(next.h[0] == update_tap(0, b, blk.observation, p, bpsk));
        CHECK(next.h[1] == update_tap(1, b, blk.observation, p, bpsk));
        CHECK(next.sigma2 ==
              doctest::Approx(update_sigma2(b, blk.observation, p, bpsk))
                  .epsilon(1e-15));
        CHECK(counters.tap_updates == 2);
        CHECK(counters.sigma2_updates == 1);
    }
    SUBCASE("beta 0.5 on h_0 only gives the arithmetic midpoint") {
        Schedule s = make_custom_schedule({{0.5, 0.0, 0.0}}, {1.0});
        const auto next = em_step(1, s, b, blk.observation, p, bpsk);
        const cplx raw = update_tap(0, b, blk.observation, p, bpsk);
        CHECK(std::abs(next.h[0] - 0.5 * (raw + p.h[0])) < 1e-15);
        CHECK(next.h[1] == p.h[1]);
        CHECK(next.sigma2 == p.sigma2);
    }
}

TEST_CASE("schedules") {
    SUBCASE("serial cycles each parameter three times over 3(L+2) steps") {
        const auto s = make_serial_schedule(12, 2);
        for (int col = 0; col < 4; ++col) {
            int ones = 0;
            for (int t = 0; t < 12; ++t) {
                CHECK((s.beta_em[t][col] == 0.0 || s.beta_em[t][col] == 1.0));
                ones += s.beta_em[t][col] == 1.0 ? 1 : 0;
            }
            CHECK(ones == 3);
        }
        for (int t = 0; t < 12; ++t) {
            int ones = 0;
            for (int col = 0; col < 4; ++col) ones += s.beta_em[t][col] != 0.0;
            CHECK(ones == 1);
        }
    }
    SUBCASE("parallel is all ones") {
        const auto s = make_parallel_schedule(5, 3);
        for (const auto& row : s.beta_em) {
            for (double v : row) CHECK(v == 1.0);
        }
    }
    SUBCASE("out-of-range custom entries rejected") {
        CHECK_THROWS_AS(
            make_custom_schedule({{1.5, 0.0, 0.0}}, {1.0}),
            std::invalid_argument);
        CHECK_THROWS_AS(
            make_custom_schedule({{0.5, 0.0, -0.1}}, {1.0}),
            std::invalid_argument);
    }
    SUBCASE("text round-trip is exact") {
        Rng rng(derive_seed(23, 800));
        Schedule s = make_parallel_schedule(4, 2);
        for (auto& row : s.beta_em) {
            for (auto& v : row) v = rng.uniform();
        }
        for (auto& v : s.beta_bp) v = rng.uniform();
        std::stringstream ss;
        save_schedule(s, ss);
        const Schedule r = load_schedule(ss);
        CHECK(r.beta_em == s.beta_em);
        CHECK(r.beta_bp == s.beta_bp);
    }
}
