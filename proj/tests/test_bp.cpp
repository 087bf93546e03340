#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "embp/baselines.hpp"
#include "embp/bp.hpp"

using namespace embp;

namespace {

MatchedStats stats_for(const ChannelParams& p, const std::vector<cplx>& y) {
    return build_matched_stats(p, y);
}

ChannelParams random_channel(int memory, double sigma2, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 100));
    auto p = sample_channel(memory, rng);
    p.sigma2 = sigma2;
    return p;
}

TransmissionBlock random_block(const ChannelParams& p, int n,
                               const Constellation& cst, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 200));
    return transmit(p, sample_symbols(cst, n, rng), cst, rng);
}

} // namespace

TEST_CASE("factor tables") {
    const auto bpsk = Constellation::bpsk();
    SUBCASE("scalar evaluation of the single-symbol factor") {
        ChannelParams p{{cplx(1.0, 0.0)}, 1.0};
        const std::vector<cplx> y = {cplx(1.0, 0.0)};
        const auto t = compute_factors(stats_for(p, y), bpsk);
        // x_0 = 1, G_00 = 1: logF(+1) = 2*1 - 1 = 1
        CHECK(t.log_f(0, 0) == doctest::Approx(1.0));
        CHECK(t.log_f(0, 1) == doctest::Approx(-3.0));
    }
    SUBCASE("zero interference entry means a unit factor") {
        ChannelParams p{{cplx(1.0, 0.0), cplx(0.0, 0.0)}, 0.5};
        const std::vector<cplx> y(5, cplx(0.2, 0.1));
        const auto t = compute_factors(stats_for(p, y), bpsk);
        for (int m = 0; m + 1 < 4; ++m) {
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    CHECK(t.log_i(m, 1, a, b) == 0.0);
                }
            }
        }
    }
    SUBCASE("BPSK sign antisymmetry of the pair factor") {
        const auto p = random_channel(2, 0.3, 5);
        const std::vector<cplx> y(10, cplx(0.4, -0.3));
        const auto t = compute_factors(stats_for(p, y), bpsk);
        for (int d = 1; d <= 2; ++d) {
            CHECK(t.log_i(0, d, 0, 0) == doctest::Approx(-t.log_i(0, d, 0, 1)));
            CHECK(t.log_i(0, d, 0, 0) == doctest::Approx(-t.log_i(0, d, 1, 0)));
            CHECK(t.log_i(0, d, 0, 0) == doctest::Approx(t.log_i(0, d, 1, 1)));
        }
    }
    SUBCASE("pair factor symmetry I_nm(a,b) = I_mn(b,a)") {
        const auto qpsk = Constellation::psk(4);
        const auto p = random_channel(2, 0.7, 6);
        const auto blk = random_block(p, 8, qpsk, 6);
        const auto t = compute_factors(stats_for(p, blk.observation), qpsk);
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                CHECK(t.log_i_pair(3, 1, a, b) ==
                      doctest::Approx(t.log_i_pair(1, 3, b, a)));
            }
        }
    }
    SUBCASE("nonpositive sigma2 rejected") {
        ChannelParams p{{cplx(1.0, 0.0)}, 0.0};
        const std::vector<cplx> y = {cplx(1.0, 0.0)};
        CHECK_THROWS_AS(compute_factors(stats_for(p, y), bpsk),
                        std::invalid_argument);
    }
}

TEST_CASE("bp_iteration edge cases") {
    const auto bpsk = Constellation::bpsk();
    SUBCASE("no edges: messages stay uniform, beliefs are softmax(logF)") {
        ChannelParams p{{cplx(0.8, 0.6)}, 0.4}; // L=0, no pair factors
        const auto blk = random_block(p, 6, bpsk, 7);
        // embed into an L=1 graph with a zero second tap: G_nm = 0
        ChannelParams padded{{p.h[0], cplx(0.0, 0.0)}, p.sigma2};
        std::vector<cplx> y = blk.observation;
        y.push_back(cplx(0.0, 0.0));
        const auto st = stats_for(padded, y);
        const auto t = compute_factors(st, bpsk);
        auto msgs = MessageSet::uniform(6, 1, 2);
        auto beliefs = BeliefSet::uniform(6, 2);
        const auto [m2, b2] = bp_iteration(msgs, beliefs, t, 1.0);
        for (int u = 0; u < 6; ++u) {
            for (int off : {-1, 1}) {
                if (!m2.edge_valid(u, off)) continue;
                CHECK(m2.mu(u, off)[0] == doctest::Approx(-std::log(2.0)));
            }
            std::vector<double> expect = {t.log_f(u, 0), t.log_f(u, 1)};
            log_normalize(expect);
            CHECK(b2.row(u)[0] == doctest::Approx(expect[0]));
            CHECK(b2.row(u)[1] == doctest::Approx(expect[1]));
        }
    }
    SUBCASE("beta 1 is bitwise the plain update; beta 0 freezes") {
        const auto p = random_channel(2, 0.25, 8);
        const auto blk = random_block(p, 12, bpsk, 8);
        const auto t = compute_factors(stats_for(p, blk.observation), bpsk);
        auto msgs = MessageSet::uniform(12, 2, 2);
        auto beliefs = BeliefSet::uniform(12, 2);
        // advance two iterations to leave the uniform point
        for (int it = 0; it < 2; ++it) {
            std::tie(msgs, beliefs) = bp_iteration(msgs, beliefs, t, 1.0);
        }
        const auto plain = message_update(msgs, beliefs, t);
        const auto [m1, b1] = bp_iteration(msgs, beliefs, t, 1.0);
        CHECK(m1.storage() == plain.storage());
        const auto [m0, b0] = bp_iteration(msgs, beliefs, t, 0.0);
        CHECK(m0.storage() == msgs.storage());
    }
    SUBCASE("normalization preserved through momentum iterations") {
        const auto p = random_channel(2, 0.1, 9);
        const auto blk = random_block(p, 16, bpsk, 9);
        const auto t = compute_factors(stats_for(p, blk.observation), bpsk);
        auto msgs = MessageSet::uniform(16, 2, 2);
        auto beliefs = BeliefSet::uniform(16, 2);
        for (int it = 0; it < 20; ++it) {
            std::tie(msgs, beliefs) = bp_iteration(msgs, beliefs, t, 0.6);
        }
        for (int u = 0; u < 16; ++u) {
            for (int off : {-2, -1, 1, 2}) {
                if (!msgs.edge_valid(u, off)) continue;
                CHECK(std::abs(logsumexp(msgs.mu(u, off))) < 1e-9);
            }
            CHECK(std::abs(logsumexp(beliefs.row(u))) < 1e-9);
        }
    }
    SUBCASE("momentum keeps converged fixed points") {
        const auto p = random_channel(1, 0.5, 10);
        const auto blk = random_block(p, 8, bpsk, 10);
        const auto t = compute_factors(stats_for(p, blk.observation), bpsk);
        auto msgs = MessageSet::uniform(8, 1, 2);
        auto beliefs = BeliefSet::uniform(8, 2);
        for (int it = 0; it < 200; ++it) {
            std::tie(msgs, beliefs) = bp_iteration(msgs, beliefs, t, 1.0);
        }
        const auto [m, b] = bp_iteration(msgs, beliefs, t, 0.37);
        for (std::size_t k = 0; k < m.storage().size(); ++k) {
            CHECK(std::abs(m.storage()[k] - msgs.storage()[k]) < 1e-9);
        }
    }
}

TEST_CASE("run_bp against the exact posterior") {
    const auto bpsk = Constellation::bpsk();
    SUBCASE("single-edge graph matches brute force") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto p = random_channel(1, 0.4, seed);
            const auto blk = random_block(p, 2, bpsk, seed);
            const auto beliefs =
                run_bp(stats_for(p, blk.observation), bpsk, 50, 1.0);
            const auto exact =
                brute_force_posterior(blk.observation, p, bpsk);
            for (int k = 0; k < 2; ++k) {
                for (int i = 0; i < 2; ++i) {
                    CHECK(std::abs(std::exp(beliefs.row(k)[i]) -
                                   std::exp(exact.marginals.row(k)[i])) <
                          1e-6);
                }
            }
        }
    }
    SUBCASE("L=1 chain (a tree) matches brute force") {
        const auto p = random_channel(1, 0.3, 21);
        const auto blk = random_block(p, 3, bpsk, 21);
        const auto beliefs =
            run_bp(stats_for(p, blk.observation), bpsk, 50, 1.0);
        const auto exact = brute_force_posterior(blk.observation, p, bpsk);
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < 2; ++i) {
                CHECK(std::abs(std::exp(beliefs.row(k)[i]) -
                               std::exp(exact.marginals.row(k)[i])) < 1e-6);
            }
        }
    }
    SUBCASE("T must be at least 1") {
        const auto p = random_channel(1, 0.4, 3);
        const auto blk = random_block(p, 4, bpsk, 3);
        CHECK_THROWS_AS(
            run_bp(stats_for(p, blk.observation), bpsk, 0, 1.0),
            std::invalid_argument);
    }
    SUBCASE("one iteration, no edges: matched-filter decision") {
        ChannelParams p{{cplx(1.0, 0.0)}, 0.5};
        const auto blk = random_block(p, 10, bpsk, 13);
        const auto beliefs =
            run_bp(stats_for(p, blk.observation), bpsk, 1, 1.0);
        const auto dec = detect(beliefs);
        for (int k = 0; k < 10; ++k) {
            const int mf = blk.observation[k].real() >= 0.0 ? 0 : 1;
            CHECK(dec[k] == mf);
        }
    }
    SUBCASE("permuting constellation points permutes belief rows") {
        const auto flipped =
            Constellation({cplx(-1.0, 0.0), cplx(1.0, 0.0)});
        const auto p = random_channel(2, 0.6, 30);
        const auto blk = random_block(p, 9, bpsk, 30);
        const auto st = stats_for(p, blk.observation);
        const auto b0 = run_bp(st, bpsk, 10, 1.0);
        const auto b1 = run_bp(st, flipped, 10, 1.0);
        for (int k = 0; k < 9; ++k) {
            CHECK(b0.row(k)[0] == doctest::Approx(b1.row(k)[1]));
            CHECK(b0.row(k)[1] == doctest::Approx(b1.row(k)[0]));
        }
    }
}

TEST_CASE("detect") {
    SUBCASE("argmax and documented tie-break") {
        BeliefSet b = BeliefSet::uniform(2, 2);
        b.row(0)[0] = std::log(0.9);
        b.row(0)[1] = std::log(0.1);
        b.row(1)[0] = std::log(0.5);
        b.row(1)[1] = std::log(0.5);
        const auto d = detect(b);
        CHECK(d[0] == 0);
        CHECK(d[1] == 0); // tie goes to the first point
    }
    SUBCASE("random rows match an independent argmax scan") {
        Rng rng(derive_seed(77, 1));
        BeliefSet b = BeliefSet::uniform(100, 4);
        for (int k = 0; k < 100; ++k) {
            for (int i = 0; i < 4; ++i) b.row(k)[i] = rng.uniform();
            log_normalize(b.row(k));
        }
        const auto d = detect(b);
        for (int k = 0; k < 100; ++k) {
            int best = 0;
            double bv = b.row(k)[0];
            for (int i = 1; i < 4; ++i) {
                if (b.row(k)[i] > bv) {
                    bv = b.row(k)[i];
                    best = i;
                }
            }
            CHECK(d[k] == best);
        }
    }
}
