#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "embp/channel.hpp"
#include "embp/matched.hpp"

using namespace embp;

TEST_CASE("sample_channel normalizes the impulse response") {
    Rng rng(derive_seed(42, 1));
    SUBCASE("L=0 gives a unit-modulus tap") {
        const auto p = sample_channel(0, rng);
        CHECK(p.h.size() == 1);
        CHECK(std::abs(std::abs(p.h[0]) - 1.0) < 1e-12);
    }
    SUBCASE("L=2 has unit energy") {
        const auto p = sample_channel(2, rng);
        CHECK(std::abs(p.h_energy() - 1.0) < 1e-12);
    }
    SUBCASE("equal seeds give identical taps") {
        Rng a(derive_seed(7, 2));
        Rng b(derive_seed(7, 2));
        const auto pa = sample_channel(3, a);
        const auto pb = sample_channel(3, b);
        for (std::size_t k = 0; k < pa.h.size(); ++k) {
            CHECK(pa.h[k] == pb.h[k]);
        }
    }
}

TEST_CASE("snr_to_sigma2 matches the receiver SNR definition") {
    const auto bpsk = Constellation::bpsk();
    SUBCASE("all factors unity") {
        const std::vector<cplx> h = {cplx(1.0, 0.0)};
        CHECK(snr_to_sigma2(0.0, h, bpsk, 100) == doctest::Approx(1.0));
    }
    SUBCASE("N=100, L=1, 10 dB") {
        const std::vector<cplx> h = {cplx(1.0, 0.0), cplx(0.0, 0.0)};
        CHECK(snr_to_sigma2(10.0, h, bpsk, 100) ==
              doctest::Approx(100.0 / 1010.0).epsilon(1e-12));
    }
    SUBCASE("round trip") {
        Rng rng(derive_seed(3, 9));
        const auto p = sample_channel(2, rng);
        for (double snr_db : {-3.0, 0.0, 7.5, 12.0}) {
            const double s2 = snr_to_sigma2(snr_db, p.h, bpsk, 64);
            CHECK(std::abs(snr_of(p.h, s2, bpsk, 64) - snr_db) < 1e-10);
        }
    }
    SUBCASE("N = 0 rejected") {
        const std::vector<cplx> h = {cplx(1.0, 0.0)};
        CHECK_THROWS_AS(snr_to_sigma2(0.0, h, bpsk, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("transmit convolves and adds calibrated noise") {
    const auto bpsk = Constellation::bpsk();
    Rng rng(derive_seed(11, 0));
    SUBCASE("identity channel, noiseless") {
        ChannelParams p{{cplx(1.0, 0.0)}, 0.0};
        const auto blk = transmit(p, {0, 1}, bpsk, rng);
        REQUIRE(blk.observation.size() == 2);
        CHECK(blk.observation[0] == cplx(1.0, 0.0));
        CHECK(blk.observation[1] == cplx(-1.0, 0.0));
    }
    SUBCASE("two-tap convolution") {
        ChannelParams p{{cplx(1.0, 0.0), cplx(0.5, 0.0)}, 0.0};
        const auto blk = transmit(p, {0, 0}, bpsk, rng);
        REQUIRE(blk.observation.size() == 3);
        CHECK(std::abs(blk.observation[0] - cplx(1.0, 0.0)) < 1e-15);
        CHECK(std::abs(blk.observation[1] - cplx(1.5, 0.0)) < 1e-15);
        CHECK(std::abs(blk.observation[2] - cplx(0.5, 0.0)) < 1e-15);
    }
    SUBCASE("empirical noise variance within 1%") {
        ChannelParams p{{cplx(0.0, 0.0)}, 0.37}; // zero channel: y is noise
        std::vector<int> syms(1000, 0);
        double acc = 0.0;
        std::size_t count = 0;
        for (int rep = 0; rep < 1000; ++rep) {
            const auto blk = transmit(p, syms, bpsk, rng);
            for (const auto& v : blk.observation) acc += std::norm(v);
            count += blk.observation.size();
        }
        const double est = acc / static_cast<double>(count);
        CHECK(std::abs(est - 0.37) / 0.37 < 0.01);
    }
}

TEST_CASE("matched statistics") {
    const auto bpsk = Constellation::bpsk();
    SUBCASE("identity channel: G = I, x = truncated y") {
        ChannelParams p{{cplx(1.0, 0.0)}, 1.0};
        const std::vector<cplx> y = {cplx(0.3, -0.2), cplx(-1.1, 0.4)};
        const auto st = build_matched_stats(p, y);
        CHECK(st.block_length() == 2);
        CHECK(st.x[0] == y[0]);
        CHECK(st.x[1] == y[1]);
        CHECK(st.g.at(0, 0) == cplx(1.0, 0.0));
        CHECK(st.g.at(1, 1) == cplx(1.0, 0.0));
        CHECK(st.g.at(0, 1) == cplx(0.0, 0.0));
    }
    SUBCASE("explicit two-tap Gram matrix") {
        ChannelParams p{{cplx(1.0, 0.0), cplx(0.5, 0.0)}, 1.0};
        const std::vector<cplx> y(3, cplx(0.0, 0.0));
        const auto st = build_matched_stats(p, y);
        CHECK(st.g.at(0, 0).real() == doctest::Approx(1.25));
        CHECK(st.g.at(1, 1).real() == doctest::Approx(1.25));
        CHECK(st.g.at(0, 1).real() == doctest::Approx(0.5));
        CHECK(st.g.at(1, 0).real() == doctest::Approx(0.5));
    }
    SUBCASE("Hermitian band structure for a random channel") {
        Rng rng(derive_seed(5, 4));
        auto p = sample_channel(3, rng);
        p.sigma2 = 0.1;
        std::vector<cplx> y(16 + 3);
        for (auto& v : y) v = rng.cnormal(1.0);
        const auto st = build_matched_stats(p, y);
        for (int r = 0; r < 16; ++r) {
            for (int c = 0; c < 16; ++c) {
                const cplx grc = st.g.at(r, c);
                const cplx gcr = st.g.at(c, r);
                CHECK(std::abs(grc - std::conj(gcr)) == 0.0);
                if (std::abs(r - c) > 3) {
                    CHECK(grc == cplx(0.0, 0.0));
                }
            }
        }
        CHECK(st.g.at(2, 2).imag() == 0.0);
    }
    SUBCASE("energy identity: ||Hc||^2 = c^H G c") {
        Rng rng(derive_seed(17, 8));
        auto p = sample_channel(3, rng);
        p.sigma2 = 0.0;
        const auto syms = sample_symbols(bpsk, 16, rng);
        const auto y = convolve(p.h, syms, bpsk);
        p.sigma2 = 1.0;
        const auto st = build_matched_stats(p, y);
        double y2 = 0.0;
        for (const auto& v : y) y2 += std::norm(v);
        cplx quad(0.0, 0.0);
        for (int r = 0; r < 16; ++r) {
            for (int c = 0; c < 16; ++c) {
                quad += std::conj(bpsk.point(syms[r])) * st.g.at(r, c) *
                        bpsk.point(syms[c]);
            }
        }
        CHECK(std::abs(quad.imag()) < 1e-9);
        CHECK(std::abs(quad.real() - y2) / y2 < 1e-9);
    }
}
