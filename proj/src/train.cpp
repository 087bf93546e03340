#include "embp/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "embp/losses.hpp"
#include "embp/parallel.hpp"

namespace embp {

namespace {

// beta_em rows first (t-major), then beta_bp
struct FlatSchedule {
    static int em_count(const Schedule& s) {
        return s.iterations() * s.width();
    }
    static int total(const Schedule& s) {
        return em_count(s) + s.iterations();
    }
    static double get(const Schedule& s, int flat) {
        const int ec = em_count(s);
        return flat < ec ? s.beta_em[flat / s.width()][flat % s.width()]
                         : s.beta_bp[flat - ec];
    }
    static void set(Schedule& s, int flat, double v) {
        const int ec = em_count(s);
        if (flat < ec) {
            s.beta_em[flat / s.width()][flat % s.width()] = v;
        } else {
            s.beta_bp[flat - ec] = v;
        }
    }
    static bool trainable(const Schedule& s, int flat,
                          const TrainConfig& cfg) {
        return flat < em_count(s) ? cfg.train_beta_em : cfg.train_beta_bp;
    }
};

LossTarget target_for(const TrainConfig& cfg,
                      const TrainingSet::Record& rec) {
    LossTarget t;
    t.objective = cfg.objective;
    t.truth = &rec.params;
    t.symbols = &rec.block.symbols;
    return t;
}

ChannelParams init_for(const TrainConfig& cfg,
                       const TrainingSet::Record& rec, int memory,
                       const Constellation& cst) {
    Rng rng(rec.init_seed);
    return initialize(cfg.init, rec.block.observation, memory, cst,
                      &rec.params, rng);
}

} // namespace

TrainingSet::Record TrainingSet::make_record(std::uint64_t index) const {
    Record rec;
    Rng ch(derive_seed(seed, 0xC0DE, index, 1));
    Rng tx(derive_seed(seed, 0xC0DE, index, 2));
    rec.init_seed = derive_seed(seed, 0xC0DE, index, 3);
    rec.params = sample_channel(memory, ch);
    const double snr_db = snr_lo_db + (snr_hi_db - snr_lo_db) * ch.uniform();
    rec.params.sigma2 = snr_to_sigma2(snr_db, rec.params.h, cst, n);
    rec.block = transmit(rec.params, sample_symbols(cst, n, tx), cst, tx);
    return rec;
}

ScheduleGradient gradient_estimate(const Schedule& schedule,
                                   const TrainingSet& train,
                                   std::uint64_t first_record, int count,
                                   const TrainConfig& config,
                                   std::uint64_t perturb_seed) {
    schedule.validate();
    if (count < 1) {
        throw std::invalid_argument("gradient_estimate: empty batch");
    }
    const int total = FlatSchedule::total(schedule);
    const int ec = FlatSchedule::em_count(schedule);

    ScheduleGradient out;
    out.beta_em.assign(schedule.iterations(),
                       std::vector<double>(schedule.width(), 0.0));
    out.beta_bp.assign(schedule.iterations(), 0.0);

    std::vector<double> losses(count, 0.0);
    std::vector<std::vector<double>> per_block(count);

    if (config.gradient_mode == GradientMode::exact_unrolled) {
        parallel_for(
            count,
            [&](std::uint64_t b) {
                const auto rec = train.make_record(first_record + b);
                const auto init =
                    init_for(config, rec, train.memory, train.cst);
                const auto res = unrolled_gradient(
                    rec.block.observation, train.cst, train.memory, schedule,
                    init, target_for(config, rec));
                losses[b] = res.loss;
                auto& g = per_block[b];
                g.resize(total);
                for (int f = 0; f < ec; ++f) {
                    g[f] = res.d_beta_em[f / schedule.width()]
                                        [f % schedule.width()];
                }
                for (int t = 0; t < schedule.iterations(); ++t) {
                    g[ec + t] = res.d_beta_bp[t];
                }
            },
            config.threads);
    } else {
        // antithetic simultaneous perturbations, common random numbers
        const int pairs = std::max(1, config.spsa_pairs);
        const double c = config.spsa_step;
        parallel_for(
            count,
            [&](std::uint64_t b) {
                const auto rec = train.make_record(first_record + b);
                const auto init =
                    init_for(config, rec, train.memory, train.cst);
                const auto target = target_for(config, rec);
                auto& g = per_block[b];
                g.assign(total, 0.0);
                losses[b] = embp_loss(rec.block.observation, train.cst,
                                      train.memory, schedule, init, target);
                Rng pr(derive_seed(perturb_seed, 0x5B5A, first_record + b));
                std::vector<double> delta(total, 0.0);
                for (int p = 0; p < pairs; ++p) {
                    Schedule plus = schedule;
                    Schedule minus = schedule;
                    for (int f = 0; f < total; ++f) {
                        if (!FlatSchedule::trainable(schedule, f, config)) {
                            delta[f] = 0.0;
                            continue;
                        }
                        delta[f] = pr.uniform() < 0.5 ? -1.0 : 1.0;
                        const double v = FlatSchedule::get(schedule, f);
                        FlatSchedule::set(
                            plus, f, std::clamp(v + c * delta[f], 0.0, 1.0));
                        FlatSchedule::set(
                            minus, f, std::clamp(v - c * delta[f], 0.0, 1.0));
                    }
                    const double lp =
                        embp_loss(rec.block.observation, train.cst,
                                  train.memory, plus, init, target);
                    const double lm =
                        embp_loss(rec.block.observation, train.cst,
                                  train.memory, minus, init, target);
                    const double scale = (lp - lm) / (2.0 * c * pairs);
                    for (int f = 0; f < total; ++f) {
                        g[f] += scale * delta[f];
                    }
                }
            },
            config.threads);
    }

    std::vector<double> flat_grad(total, 0.0);
    double loss_acc = 0.0;
    for (int b = 0; b < count; ++b) {
        loss_acc += losses[b];
        for (int f = 0; f < total; ++f) flat_grad[f] += per_block[b][f];
    }
    for (int f = 0; f < total; ++f) {
        if (!std::isfinite(flat_grad[f])) {
            throw std::runtime_error("gradient_estimate: non-finite entry");
        }
    }
    out.mean_loss = loss_acc / count;
    const double inv = 1.0 / count;
    for (int f = 0; f < ec; ++f) {
        out.beta_em[f / schedule.width()][f % schedule.width()] =
            flat_grad[f] * inv;
    }
    for (int t = 0; t < schedule.iterations(); ++t) {
        out.beta_bp[t] = flat_grad[ec + t] * inv;
    }
    return out;
}

Schedule train_schedule(const TrainingSet& train, const TrainConfig& config,
                        const Schedule& initial) {
    initial.validate();
    if (config.batch_size < 1) {
        throw std::invalid_argument("train_schedule: batch_size must be >= 1");
    }
    Schedule sched = initial;
    const int width = sched.width();
    const int total = FlatSchedule::total(sched);
    const int ec = FlatSchedule::em_count(sched);
    const int k_target =
        config.k_em_target > 0 ? std::max(0, ec - config.k_em_target) : 0;

    std::vector<double> m1(total, 0.0), m2(total, 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    const int stair =
        config.batches > 0
            ? std::max(1, (config.batches + k_target) / (k_target + 1))
            : 1;

    if (config.log) {
        *config.log << "batch,loss,k_prime,val_mse\n";
    }

    auto validation_mse = [&]() {
        if (config.val_blocks <= 0) return -1.0;
        std::vector<double> mses(config.val_blocks, 0.0);
        TrainingSet vset = train;
        vset.seed = derive_seed(train.seed, 0xBEEF);
        parallel_for(
            config.val_blocks,
            [&](std::uint64_t b) {
                const auto rec = vset.make_record(b);
                const auto init =
                    init_for(config, rec, train.memory, train.cst);
                const auto res = run_embp(rec.block.observation, train.cst,
                                          train.memory, sched, init);
                mses[b] = loss_mse(res.final_params.h, rec.params.h);
            },
            config.threads);
        double acc = 0.0;
        for (double v : mses) acc += v;
        return acc / config.val_blocks;
    };

    for (int batch = 0; batch < config.batches; ++batch) {
        const int k_prime = std::min(k_target, batch / stair);
        const auto grad = gradient_estimate(
            sched, train,
            static_cast<std::uint64_t>(batch) * config.batch_size,
            config.batch_size, config,
            derive_seed(config.seed, 0xADA0, batch));
        if (!std::isfinite(grad.mean_loss)) {
            throw std::runtime_error(
                "train_schedule: non-finite batch loss at batch " +
                std::to_string(batch));
        }

        std::vector<double> g(total, 0.0);
        for (int f = 0; f < ec; ++f) {
            g[f] = grad.beta_em[f / width][f % width];
        }
        for (int t = 0; t < sched.iterations(); ++t) {
            g[ec + t] = grad.beta_bp[t];
        }
        // L1 pressure on the current K' smallest beta_em entries
        if (k_prime > 0 && config.lambda_l1 != 0.0) {
            for (int flat : smallest_beta_entries(sched, k_prime)) {
                if (sched.beta_em[flat / width][flat % width] > 0.0) {
                    g[flat] += config.lambda_l1;
                }
            }
        }

        for (int f = 0; f < total; ++f) {
            if (!FlatSchedule::trainable(sched, f, config)) continue;
            m1[f] = b1 * m1[f] + (1.0 - b1) * g[f];
            m2[f] = b2 * m2[f] + (1.0 - b2) * g[f] * g[f];
            const double mhat = m1[f] / (1.0 - std::pow(b1, batch + 1));
            const double vhat = m2[f] / (1.0 - std::pow(b2, batch + 1));
            const double step =
                config.step_size * mhat / (std::sqrt(vhat) + eps);
            FlatSchedule::set(
                sched, f,
                std::clamp(FlatSchedule::get(sched, f) - step, 0.0, 1.0));
        }

        if (config.log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d,%.8g,%d,%.8g\n", batch,
                          grad.mean_loss, k_prime, validation_mse());
            *config.log << buf;
        }
    }

    // hard pruning: the K' smallest |beta_em| entries become exact zeros
    if (k_target > 0) {
        const auto prune = smallest_beta_entries(sched, k_target);
        std::vector<char> pruned(ec, 0);
        for (int flat : prune) {
            sched.beta_em[flat / width][flat % width] = 0.0;
            pruned[flat] = 1;
        }
        // entries clamped to zero by the optimizer outside the prune set
        // are lifted to a negligible weight, keeping the executed-update
        // count at exactly T*(L+2) - K'
        for (int f = 0; f < ec; ++f) {
            if (!pruned[f] && sched.beta_em[f / width][f % width] == 0.0) {
                sched.beta_em[f / width][f % width] = 1e-3;
            }
        }
    }
    sched.validate();
    return sched;
}

} // namespace embp
