#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "embp/embp.hpp"
#include "embp/losses.hpp"

using namespace embp;

namespace {

struct Instance {
    ChannelParams params;
    TransmissionBlock block;
};

Instance make_instance(int memory, int n, double snr_db, std::uint64_t seed,
                       const Constellation& cst) {
    Rng ch(derive_seed(seed, 1));
    Rng tx(derive_seed(seed, 2));
    auto p = sample_channel(memory, ch);
    p.sigma2 = snr_to_sigma2(snr_db, p.h, cst, n);
    return {p, transmit(p, sample_symbols(cst, n, tx), cst, tx)};
}

} // namespace

TEST_CASE("initialize") {
    const auto bpsk = Constellation::bpsk();
    Rng rng(derive_seed(31, 3));
    SUBCASE("impulse_power splits observed power") {
        // ||y||^2 = N+L so P_y = 1
        std::vector<cplx> y(12, cplx(1.0, 0.0));
        const auto init = initialize(InitStrategy::impulse_power(0.1), y, 2,
                                     bpsk, nullptr, rng);
        CHECK(init.h.size() == 3);
        CHECK(init.h[0].real() == doctest::Approx(std::sqrt(0.9)));
        CHECK(init.h[1] == cplx(0.0, 0.0));
        CHECK(init.sigma2 == doctest::Approx(0.1));
    }
    SUBCASE("genie_perturbed(0) returns the exact truth") {
        const auto inst = make_instance(2, 16, 10.0, 5, bpsk);
        const auto init =
            initialize(InitStrategy::genie_perturbed(0.0),
                       inst.block.observation, 2, bpsk, &inst.params, rng);
        CHECK(init.h == inst.params.h);
        CHECK(init.sigma2 == inst.params.sigma2);
    }
    SUBCASE("genie_perturbed without truth is an error") {
        std::vector<cplx> y(8, cplx(1.0, 0.0));
        CHECK_THROWS_AS(initialize(InitStrategy::genie_perturbed(0.1), y, 1,
                                   bpsk, nullptr, rng),
                        std::invalid_argument);
    }
    SUBCASE("external passes through unchanged") {
        ChannelParams p{{cplx(0.3, -0.4)}, 0.25};
        std::vector<cplx> y(4, cplx(1.0, 0.0));
        const auto init = initialize(InitStrategy::external_params(p), y, 0,
                                     bpsk, nullptr, rng);
        CHECK(init.h == p.h);
        CHECK(init.sigma2 == p.sigma2);
    }
}

TEST_CASE("run_embp") {
    const auto bpsk = Constellation::bpsk();
    SUBCASE("frozen M-steps with genie init degenerate to coherent BP") {
        const auto inst = make_instance(2, 24, 8.0, 7, bpsk);
        Schedule s = make_parallel_schedule(6, 2);
        for (auto& row : s.beta_em) {
            for (auto& v : row) v = 0.0;
        }
        const auto res = run_embp(inst.block.observation, bpsk, 2, s,
                                  inst.params);
        const auto coherent =
            run_bp(build_matched_stats(inst.params, inst.block.observation),
                   bpsk, 6, 1.0);
        CHECK(res.final_beliefs.logb == coherent.logb);
        CHECK(res.final_params.h == inst.params.h);
    }
    SUBCASE("noiseless memoryless channel decodes exactly") {
        Rng rng(derive_seed(9, 4));
        auto p = sample_channel(0, rng);
        p.sigma2 = 0.0;
        const auto syms = sample_symbols(bpsk, 20, rng);
        auto y = convolve(p.h, syms, bpsk);
        p.sigma2 = 1e-6;
        const auto res = run_embp(y, bpsk, 0, make_serial_schedule(6, 0), p);
        CHECK(detect(res.final_beliefs) == syms);
    }
    SUBCASE("trajectory bookkeeping and update counters") {
        const auto inst = make_instance(2, 16, 8.0, 8, bpsk);
        EmCounters counters;
        EmbpOptions opt;
        opt.counters = &counters;
        opt.record_belief_history = true;
        const auto res =
            run_embp(inst.block.observation, bpsk, 2,
                     make_serial_schedule(12, 2), inst.params, opt);
        CHECK(res.trajectory.estimates.size() == 13);
        CHECK(res.belief_history.size() == 12);
        CHECK(counters.bp_iterations == 12);
        CHECK(counters.tap_updates == 9);   // h_0..h_2 three times each
        CHECK(counters.sigma2_updates == 3);
        for (const auto& est : res.trajectory.estimates) {
            CHECK(est.sigma2 > 0.0);
        }
    }
    SUBCASE("estimates improve on average from a perturbed start") {
        // needs a block long enough that the estimator's own noise floor
        // sits below the 0.05-perturbed starting error
        const int blocks = 300;
        double mse0 = 0.0;
        double mse_t = 0.0;
        for (int b = 0; b < blocks; ++b) {
            const auto inst = make_instance(2, 200, 8.0, 1000 + b, bpsk);
            Rng init_rng(derive_seed(2000 + b, 5));
            const auto init = initialize(
                InitStrategy::genie_perturbed(0.05), inst.block.observation,
                2, bpsk, &inst.params, init_rng);
            const auto res = run_embp(inst.block.observation, bpsk, 2,
                                      make_serial_schedule(12, 2), init);
            mse0 += loss_mse(init.h, inst.params.h);
            mse_t += loss_mse(res.final_params.h, inst.params.h);
        }
        CHECK(mse_t / blocks < mse0 / blocks);
    }
}
