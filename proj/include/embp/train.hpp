#ifndef EMBP_TRAIN_HPP
#define EMBP_TRAIN_HPP

#include <iosfwd>

#include "embp/unrolled.hpp"

namespace embp {

/// Index-addressable training data: record d is regenerable from (seed, d)
/// alone, so data sets are never materialized and runs are reproducible.
struct TrainingSet {
    int n = 100;
    int memory = 2;
    Constellation cst = Constellation::bpsk();
    double snr_lo_db = 0.0;
    double snr_hi_db = 12.0;
    std::uint64_t seed = 1;

    struct Record {
        ChannelParams params;
        TransmissionBlock block;
        std::uint64_t init_seed; // stream for the initializer draw
    };
    Record make_record(std::uint64_t index) const;
};

enum class GradientMode { exact_unrolled, stochastic_perturbation };

struct TrainConfig {
    Objective objective = Objective::mse_h;
    int batches = 250;
    int batch_size = 256;
    double step_size = 0.02;
    int k_em_target = 0; // 0 disables the update budget
    double lambda_l1 = 0.1;
    GradientMode gradient_mode = GradientMode::exact_unrolled;
    bool train_beta_em = true;
    bool train_beta_bp = true;
    InitStrategy init = InitStrategy::impulse_power();
    int spsa_pairs = 4;
    double spsa_step = 1e-3;
    std::uint64_t seed = 7;
    int val_blocks = 0;          // >0 logs a held-out MSE column
    std::ostream* log = nullptr; // CSV: batch,loss,k_prime,val_mse
    int threads = 0;
};

struct ScheduleGradient {
    double mean_loss = 0.0;
    std::vector<std::vector<double>> beta_em; // T x (L+2)
    std::vector<double> beta_bp;              // T
};

/// Mean gradient of the batch objective with respect to every momentum
/// weight. exact_unrolled runs the reverse-mode sweep per block;
/// stochastic_perturbation averages antithetic simultaneous-perturbation
/// estimates with common random numbers across the batch.
ScheduleGradient gradient_estimate(const Schedule& schedule,
                                   const TrainingSet& train,
                                   std::uint64_t first_record, int count,
                                   const TrainConfig& config,
                                   std::uint64_t perturb_seed);

/// Adam over the momentum weights with the sparsity staircase: K' grows
/// linearly to T*(L+2) - k_em_target, the L1 penalty acts on the K'
/// smallest |beta_em| entries, weights are clamped to [0,1] after every
/// step, and the K' smallest entries are hard-set to zero at the end.
Schedule train_schedule(const TrainingSet& train, const TrainConfig& config,
                        const Schedule& initial);

} // namespace embp

#endif
