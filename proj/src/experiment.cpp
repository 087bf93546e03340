#include "embp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "embp/losses.hpp"
#include "embp/parallel.hpp"

namespace embp {

namespace {

// substream tags
constexpr std::uint64_t kTagChannel = 11;
constexpr std::uint64_t kTagTx = 12;
constexpr std::uint64_t kTagInit = 13;
constexpr std::uint64_t kTagPilot = 14;
constexpr std::uint64_t kTagAdvChannel = 21;
constexpr std::uint64_t kTagAdvTx = 22;

std::uint64_t block_key(int snr_index, std::uint64_t block) {
    return (static_cast<std::uint64_t>(snr_index) << 40) | block;
}

struct DetOutcome {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
    double mse = 0.0;
    bool has_mse = false;
    double bmi = 0.0;
    bool has_bmi = false;
    bool flipped = false;
    bool failed = false;
};

int pilot_pct(double fraction) {
    return static_cast<int>(std::lround(fraction * 100.0));
}

} // namespace

std::string DetectorSpec::name() const {
    switch (kind) {
        case Kind::embp: return "embp";
        case Kind::bp_coherent: return "bp_coherent";
        case Kind::bp_with_embp_estimate: return "bp_embp_est";
        case Kind::map_coherent: return "map_coherent";
        case Kind::map_pilot:
            return "map_pilot" + std::to_string(pilot_pct(pilot_fraction)) +
                   "pct";
    }
    return "unknown";
}

DetectorSpec DetectorSpec::parse(const std::string& token) {
    DetectorSpec d;
    if (token == "embp") {
        d.kind = Kind::embp;
    } else if (token == "bp_coherent") {
        d.kind = Kind::bp_coherent;
    } else if (token == "bp_embp_est") {
        d.kind = Kind::bp_with_embp_estimate;
    } else if (token == "map_coherent") {
        d.kind = Kind::map_coherent;
    } else if (token.rfind("map_pilot", 0) == 0) {
        d.kind = Kind::map_pilot;
        const std::string rest = token.substr(9);
        if (!rest.empty()) {
            d.pilot_fraction = std::stod(rest) / 100.0;
        }
    } else {
        throw std::invalid_argument("unknown detector: " + token);
    }
    return d;
}

Schedule ExperimentConfig::resolve_schedule() const {
    return schedule_by_name(schedule_source, resolved_iterations(), memory);
}

namespace {

void run_one_block(const ExperimentConfig& cfg, const Constellation& cst,
                   const Schedule& schedule, int snr_index,
                   std::uint64_t block, std::vector<DetOutcome>& out) {
    const double snr = cfg.snr_db[snr_index];
    const std::uint64_t key = block_key(snr_index, block);
    Rng ch(derive_seed(cfg.seed, kTagChannel, key));
    Rng tx(derive_seed(cfg.seed, kTagTx, key));
    Rng init_rng(derive_seed(cfg.seed, kTagInit, key));

    ChannelParams params = sample_channel(cfg.memory, ch);
    params.sigma2 = snr_to_sigma2(snr, params.h, cst, cfg.n);
    const auto data_syms = sample_symbols(cst, cfg.n, tx);
    Rng noise(derive_seed(cfg.seed, kTagTx, key, 1));
    const auto data_blk = transmit(params, data_syms, cst, noise);

    const auto neg = cst.negation_map();

    bool needs_embp = false;
    for (const auto& d : cfg.detectors) {
        needs_embp |= d.kind == DetectorSpec::Kind::embp ||
                      d.kind == DetectorSpec::Kind::bp_with_embp_estimate;
    }
    std::optional<EmbpResult> embp_res;
    bool embp_failed = false;
    bool embp_flip = false;
    if (needs_embp) {
        try {
            const auto init = initialize(cfg.init, data_blk.observation,
                                         cfg.memory, cst, &params, init_rng);
            embp_res = run_embp(data_blk.observation, cst, cfg.memory,
                                schedule, init);
            if (!neg.empty()) {
                double minus = 0.0, plus = 0.0;
                for (int l = 0; l <= cfg.memory; ++l) {
                    minus += std::norm(embp_res->final_params.h[l] -
                                       params.h[l]);
                    plus += std::norm(embp_res->final_params.h[l] +
                                      params.h[l]);
                }
                embp_flip = plus < minus;
            }
        } catch (const std::exception&) {
            embp_failed = true;
        }
    }

    auto count_errors = [&](const std::vector<int>& dec, bool flip,
                            int from) {
        std::uint64_t e = 0;
        for (int k = from; k < cfg.n; ++k) {
            const int d = flip && !neg.empty() ? neg[dec[k]] : dec[k];
            e += d != data_syms[k];
        }
        return e;
    };
    auto bmi_of = [&](const BeliefSet& beliefs, bool flip) {
        if (!flip || neg.empty()) {
            return bmi_clipped(beliefs, data_syms, cst);
        }
        BeliefSet flipped = beliefs;
        for (int k = 0; k < beliefs.n; ++k) {
            for (int i = 0; i < beliefs.order; ++i) {
                flipped.row(k)[i] = beliefs.row(k)[neg[i]];
            }
        }
        return bmi_clipped(flipped, data_syms, cst);
    };

    for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
        const auto& spec = cfg.detectors[di];
        DetOutcome& o = out[di];
        try {
            switch (spec.kind) {
                case DetectorSpec::Kind::embp: {
                    if (embp_failed) throw std::runtime_error("embp failed");
                    o.errors = count_errors(detect(embp_res->final_beliefs),
                                            embp_flip, 0);
                    o.bits = cfg.n;
                    o.mse = loss_mse(embp_res->final_params.h, params.h);
                    o.has_mse = true;
                    o.bmi = bmi_of(embp_res->final_beliefs, embp_flip);
                    o.has_bmi = true;
                    o.flipped = embp_flip;
                    break;
                }
                case DetectorSpec::Kind::bp_coherent: {
                    const auto beliefs = run_bp(
                        build_matched_stats(params, data_blk.observation),
                        cst, schedule.iterations(), schedule.beta_bp);
                    o.errors = count_errors(detect(beliefs), false, 0);
                    o.bits = cfg.n;
                    o.bmi = bmi_of(beliefs, false);
                    o.has_bmi = true;
                    break;
                }
                case DetectorSpec::Kind::bp_with_embp_estimate: {
                    if (embp_failed) throw std::runtime_error("embp failed");
                    const auto beliefs = run_bp(
                        build_matched_stats(embp_res->final_params,
                                            data_blk.observation),
                        cst, schedule.iterations(), schedule.beta_bp);
                    o.errors =
                        count_errors(detect(beliefs), embp_flip, 0);
                    o.bits = cfg.n;
                    o.mse = loss_mse(embp_res->final_params.h, params.h);
                    o.has_mse = true;
                    o.bmi = bmi_of(beliefs, embp_flip);
                    o.has_bmi = true;
                    o.flipped = embp_flip;
                    break;
                }
                case DetectorSpec::Kind::map_coherent: {
                    const auto beliefs = trellis_map_detect(
                        data_blk.observation, params, cst);
                    o.errors = count_errors(detect(beliefs), false, 0);
                    o.bits = cfg.n;
                    o.bmi = bmi_of(beliefs, false);
                    o.has_bmi = true;
                    break;
                }
                case DetectorSpec::Kind::map_pilot: {
                    const int np = static_cast<int>(
                        std::lround(spec.pilot_fraction * cfg.n));
                    if (np < cfg.memory + 1) {
                        throw std::runtime_error("pilot preamble too short");
                    }
                    // pilot-bearing variant of the block, common noise seed
                    ChannelParams est;
                    std::vector<int> psyms;
                    TransmissionBlock pblk;
                    bool ok = false;
                    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
                        const auto pilots = make_pilot_symbols(
                            cst, np,
                            derive_seed(cfg.seed, kTagPilot, key, attempt));
                        psyms = data_syms;
                        for (int k = 0; k < np; ++k) psyms[k] = pilots[k];
                        Rng pnoise(derive_seed(cfg.seed, kTagTx, key, 1));
                        pblk = transmit(params, psyms, cst, pnoise);
                        try {
                            est = pilot_ls_estimate(
                                pblk.observation,
                                {psyms.begin(), psyms.begin() + np}, cst,
                                cfg.memory);
                            ok = true;
                        } catch (const std::runtime_error&) {
                        }
                    }
                    if (!ok) {
                        throw std::runtime_error("pilot LS rank-deficient");
                    }
                    std::vector<int> known(cfg.n, -1);
                    for (int k = 0; k < np; ++k) known[k] = psyms[k];
                    const auto beliefs = trellis_map_detect(
                        pblk.observation, est, cst, known);
                    const auto dec = detect(beliefs);
                    std::uint64_t e = 0;
                    for (int k = np; k < cfg.n; ++k) {
                        e += dec[k] != psyms[k];
                    }
                    o.errors = e;
                    o.bits = cfg.n - np;
                    // cross entropy over information positions only
                    double ce = 0.0;
                    for (int k = np; k < cfg.n; ++k) {
                        ce -= std::max(beliefs.row(k)[psyms[k]],
                                       std::log(1e-30));
                    }
                    ce /= (cfg.n - np) * std::log(2.0);
                    o.bmi = std::clamp(cst.bits_per_symbol() - ce, 0.0,
                                       cst.bits_per_symbol());
                    o.has_bmi = true;
                    o.mse = loss_mse(est.h, params.h);
                    o.has_mse = true;
                    break;
                }
            }
        } catch (const std::exception&) {
            o = DetOutcome{};
            o.failed = true;
        }
    }
}

} // namespace

std::vector<ResultRow> run_ber_sweep(const ExperimentConfig& cfg) {
    if (cfg.blocks < 1 || cfg.snr_db.empty()) {
        throw std::invalid_argument("sweep: need blocks >= 1 and snr points");
    }
    const auto cst = Constellation::by_name(cfg.constellation);
    const Schedule schedule = cfg.resolve_schedule();
    schedule.validate();

    std::ofstream dump;
    if (!cfg.dump_path.empty()) {
        dump.open(cfg.dump_path);
        if (!dump) {
            throw std::runtime_error("cannot open dump file: " +
                                     cfg.dump_path);
        }
    }

    std::vector<ResultRow> rows;
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::vector<DetOutcome>> outcomes(
            cfg.blocks, std::vector<DetOutcome>(cfg.detectors.size()));
        parallel_for(
            cfg.blocks,
            [&](std::uint64_t b) {
                run_one_block(cfg, cst, schedule, static_cast<int>(si), b,
                              outcomes[b]);
            },
            cfg.threads);

        ResultRow row;
        row.snr_db = cfg.snr_db[si];
        row.blocks = cfg.blocks;
        row.per_detector.assign(cfg.detectors.size(), DetectorMetrics{});
        for (int b = 0; b < cfg.blocks; ++b) {
            for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
                const auto& o = outcomes[b][di];
                auto& m = row.per_detector[di];
                if (o.failed) {
                    ++m.failures;
                    continue;
                }
                m.bit_errors += o.errors;
                m.bits += o.bits;
                if (o.has_mse) {
                    m.mse_sum += o.mse;
                    ++m.mse_count;
                }
                if (o.has_bmi) {
                    m.bmi_sum += o.bmi;
                    ++m.bmi_count;
                }
            }
        }
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        rows.push_back(std::move(row));

        if (dump.is_open()) {
            char buf[256];
            for (int b = 0; b < cfg.blocks; ++b) {
                for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
                    const auto& o = outcomes[b][di];
                    std::snprintf(
                        buf, sizeof buf,
                        "{\"snr_db\":%.8g,\"block\":%d,\"detector\":\"%s\","
                        "\"errors\":%llu,\"bits\":%llu,\"mse\":%.8g,"
                        "\"bmi\":%.8g,\"flip\":%d,\"failed\":%d}\n",
                        cfg.snr_db[si], b, cfg.detectors[di].name().c_str(),
                        static_cast<unsigned long long>(o.errors),
                        static_cast<unsigned long long>(o.bits),
                        o.has_mse ? o.mse : -1.0, o.has_bmi ? o.bmi : -1.0,
                        o.flipped ? 1 : 0, o.failed ? 1 : 0);
                    dump << buf;
                }
            }
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const ExperimentConfig& cfg,
                     const std::vector<ResultRow>& rows) {
    os << "snr_db";
    for (const auto& d : cfg.detectors) {
        const auto n = d.name();
        os << "," << n << "_ber," << n << "_mse," << n << "_bmi," << n
           << "_fail";
    }
    os << ",blocks\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%.8g", row.snr_db);
        os << buf;
        for (const auto& m : row.per_detector) {
            std::snprintf(buf, sizeof buf, ",%.8g", m.ber());
            os << buf;
            if (m.mse_count) {
                std::snprintf(buf, sizeof buf, ",%.8g", m.mse());
                os << buf;
            } else {
                os << ",";
            }
            std::snprintf(buf, sizeof buf, ",%.8g", m.bmi());
            os << buf;
            os << "," << m.failures;
        }
        os << "," << row.blocks << "\n";
    }
}

std::vector<MseTrace> run_mse_over_iters(
    const ExperimentConfig& cfg,
    const std::vector<std::pair<std::string, Schedule>>& schedules) {
    if (schedules.empty()) {
        throw std::invalid_argument("run_mse_over_iters: no schedules");
    }
    const auto cst = Constellation::by_name(cfg.constellation);
    if (cfg.snr_db.size() != 1) {
        throw std::invalid_argument(
            "run_mse_over_iters: exactly one SNR point expected");
    }
    for (const auto& [name, s] : schedules) {
        s.validate();
        if (s.memory() != cfg.memory) {
            throw std::invalid_argument("schedule " + name +
                                        ": width != L+2");
        }
    }

    // per block and schedule: T+1 squared errors
    std::vector<std::vector<std::vector<double>>> errs(
        schedules.size());
    for (std::size_t siq = 0; siq < schedules.size(); ++siq) {
        errs[siq].assign(cfg.blocks, {});
    }
    std::vector<char> failed(cfg.blocks, 0);

    parallel_for(
        cfg.blocks,
        [&](std::uint64_t b) {
            const std::uint64_t key = block_key(0, b);
            Rng ch(derive_seed(cfg.seed, kTagChannel, key));
            Rng tx(derive_seed(cfg.seed, kTagTx, key));
            ChannelParams params = sample_channel(cfg.memory, ch);
            params.sigma2 =
                snr_to_sigma2(cfg.snr_db[0], params.h, cst, cfg.n);
            const auto syms = sample_symbols(cst, cfg.n, tx);
            Rng noise(derive_seed(cfg.seed, kTagTx, key, 1));
            const auto blk = transmit(params, syms, cst, noise);
            // identical init draw for every schedule
            for (std::size_t q = 0; q < schedules.size(); ++q) {
                Rng init_rng(derive_seed(cfg.seed, kTagInit, key));
                try {
                    const auto init =
                        initialize(cfg.init, blk.observation, cfg.memory,
                                   cst, &params, init_rng);
                    const auto res =
                        run_embp(blk.observation, cst, cfg.memory,
                                 schedules[q].second, init);
                    auto& dst = errs[q][b];
                    dst.reserve(res.trajectory.estimates.size());
                    for (const auto& est : res.trajectory.estimates) {
                        dst.push_back(loss_mse(est.h, params.h));
                    }
                } catch (const std::exception&) {
                    failed[b] = 1;
                }
            }
        },
        cfg.threads);

    std::vector<MseTrace> traces;
    for (std::size_t q = 0; q < schedules.size(); ++q) {
        MseTrace tr;
        tr.name = schedules[q].first;
        const int t_len = schedules[q].second.iterations() + 1;
        tr.mse.assign(t_len, 0.0);
        tr.se.assign(t_len, 0.0);
        std::uint64_t n_ok = 0;
        for (int b = 0; b < cfg.blocks; ++b) {
            if (failed[b]) continue;
            ++n_ok;
            for (int t = 0; t < t_len; ++t) tr.mse[t] += errs[q][b][t];
        }
        if (n_ok == 0) throw std::runtime_error("all blocks failed");
        for (int t = 0; t < t_len; ++t) tr.mse[t] /= n_ok;
        for (int b = 0; b < cfg.blocks; ++b) {
            if (failed[b]) continue;
            for (int t = 0; t < t_len; ++t) {
                const double d = errs[q][b][t] - tr.mse[t];
                tr.se[t] += d * d;
            }
        }
        for (int t = 0; t < t_len; ++t) {
            tr.se[t] = std::sqrt(tr.se[t] / n_ok / std::max<std::uint64_t>(
                                                       1, n_ok - 1));
        }
        traces.push_back(std::move(tr));
    }
    return traces;
}

void write_iters_csv(std::ostream& os, const std::vector<MseTrace>& traces) {
    os << "t";
    for (const auto& tr : traces) {
        os << "," << tr.name << "," << tr.name << "_se";
    }
    os << "\n";
    std::size_t t_max = 0;
    for (const auto& tr : traces) t_max = std::max(t_max, tr.mse.size());
    char buf[64];
    for (std::size_t t = 0; t < t_max; ++t) {
        os << t;
        for (const auto& tr : traces) {
            if (t < tr.mse.size()) {
                std::snprintf(buf, sizeof buf, ",%.8g", tr.mse[t]);
                os << buf;
                std::snprintf(buf, sizeof buf, ",%.8g", tr.se[t]);
                os << buf;
            } else {
                os << ",,";
            }
        }
        os << "\n";
    }
}

namespace {

TransmissionBlock adversarial_block(const ExperimentConfig& cfg,
                                    const Constellation& cst, double snr_db,
                                    std::uint64_t id,
                                    ChannelParams* params_out) {
    Rng ch(derive_seed(cfg.seed, kTagAdvChannel, id));
    Rng tx(derive_seed(cfg.seed, kTagAdvTx, id));
    ChannelParams params = sample_channel(cfg.memory, ch);
    params.sigma2 = snr_to_sigma2(snr_db, params.h, cst, cfg.n);
    const auto syms = sample_symbols(cst, cfg.n, tx);
    Rng noise(derive_seed(cfg.seed, kTagAdvTx, id, 1));
    auto blk = transmit(params, syms, cst, noise);
    if (params_out) *params_out = params;
    return blk;
}

} // namespace

std::vector<std::uint64_t> find_adversarial_channels(
    const ExperimentConfig& cfg, double snr_db, int want, int probe_t,
    double tv_threshold) {
    const auto cst = Constellation::by_name(cfg.constellation);
    std::vector<std::uint64_t> found;
    const std::uint64_t cap =
        static_cast<std::uint64_t>(want) * 1000 + 1000;
    std::uint64_t next_id = 0;
    const int chunk = 256;
    std::vector<char> hits(chunk);
    while (static_cast<int>(found.size()) < want && next_id < cap) {
        const std::uint64_t base = next_id;
        const int batch = static_cast<int>(
            std::min<std::uint64_t>(chunk, cap - base));
        std::fill(hits.begin(), hits.end(), 0);
        parallel_for(
            batch,
            [&](std::uint64_t k) {
                ChannelParams params;
                const auto blk = adversarial_block(cfg, cst, snr_db,
                                                   base + k, &params);
                const auto stats =
                    build_matched_stats(params, blk.observation);
                const auto factors = compute_factors(stats, cst);
                auto msgs =
                    MessageSet::uniform(cfg.n, cfg.memory, cst.size());
                auto beliefs = BeliefSet::uniform(cfg.n, cst.size());
                BeliefSet prev = beliefs;
                for (int t = 0; t < probe_t; ++t) {
                    prev = beliefs;
                    auto [m, b] = bp_iteration(msgs, beliefs, factors, 1.0);
                    msgs = std::move(m);
                    beliefs = std::move(b);
                }
                double tv = 0.0;
                for (int kk = 0; kk < cfg.n; ++kk) {
                    double acc = 0.0;
                    for (int i = 0; i < cst.size(); ++i) {
                        acc += 0.5 * std::abs(std::exp(beliefs.row(kk)[i]) -
                                              std::exp(prev.row(kk)[i]));
                    }
                    tv = std::max(tv, acc);
                }
                hits[k] = tv > tv_threshold ? 1 : 0;
            },
            cfg.threads);
        for (int k = 0; k < batch; ++k) {
            if (hits[k] && static_cast<int>(found.size()) < want) {
                found.push_back(base + k);
            }
        }
        next_id += batch;
    }
    return found;
}

std::pair<std::uint64_t, std::uint64_t> coherent_bp_errors(
    const ExperimentConfig& cfg, double snr_db,
    const std::vector<std::uint64_t>& block_ids,
    const std::vector<double>& beta_bp) {
    const auto cst = Constellation::by_name(cfg.constellation);
    std::vector<std::uint64_t> errors(block_ids.size(), 0);
    parallel_for(
        block_ids.size(),
        [&](std::uint64_t k) {
            ChannelParams params;
            const auto blk = adversarial_block(cfg, cst, snr_db,
                                               block_ids[k], &params);
            const auto beliefs = run_bp(
                build_matched_stats(params, blk.observation), cst,
                static_cast<int>(beta_bp.size()), beta_bp);
            const auto dec = detect(beliefs);
            Rng tx(derive_seed(cfg.seed, kTagAdvTx, block_ids[k]));
            const auto syms = sample_symbols(cst, cfg.n, tx);
            std::uint64_t e = 0;
            for (int i = 0; i < cfg.n; ++i) e += dec[i] != syms[i];
            errors[k] = e;
        },
        cfg.threads);
    std::uint64_t total = 0;
    for (auto e : errors) total += e;
    return {total, static_cast<std::uint64_t>(block_ids.size()) *
                       static_cast<std::uint64_t>(cfg.n)};
}

} // namespace embp
