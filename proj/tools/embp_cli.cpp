// Experiment runner: BER sweeps, per-iteration MSE traces, schedule
// training, schedule evaluation, and the oracle selftest.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "embp/experiment.hpp"
#include "embp/losses.hpp"
#include "embp/selftest.hpp"
#include "embp/train.hpp"

namespace {

using namespace embp;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) out.push_back(std::stod(tok));
    return out;
}

InitStrategy parse_init(const std::string& spec) {
    const auto parts = split(spec, ':');
    if (parts.empty()) throw CLI::ValidationError("init", "empty init spec");
    if (parts[0] == "impulse_power") {
        return InitStrategy::impulse_power(
            parts.size() > 1 ? std::stod(parts[1]) : 0.1);
    }
    if (parts[0] == "genie") {
        return InitStrategy::genie_perturbed(
            parts.size() > 1 ? std::stod(parts[1]) : 0.0);
    }
    throw CLI::ValidationError("init", "unknown init strategy: " + spec);
}

struct SweepArgs {
    int n = 100;
    int memory = 2;
    std::string constellation = "bpsk";
    std::string snr = "0,3,6,9,12";
    int blocks = 10000;
    std::string detectors = "embp,bp_coherent,map_coherent";
    std::string schedule = "serial";
    int iterations = 0;
    std::string init = "impulse_power:0.1";
    std::uint64_t seed = 1;
    int threads = 0;
    std::string dump;
    std::string out;
};

void add_sweep_options(CLI::App* cmd, SweepArgs& a) {
    cmd->add_option("--N", a.n, "block length (information symbols)");
    cmd->add_option("--L", a.memory, "channel memory");
    cmd->add_option("--constellation", a.constellation, "bpsk, qpsk or 8psk");
    cmd->add_option("--snr", a.snr, "comma-separated SNR grid in dB");
    cmd->add_option("--blocks", a.blocks, "blocks per SNR point");
    cmd->add_option("--detectors", a.detectors,
                    "comma list: embp,bp_coherent,bp_embp_est,map_coherent,"
                    "map_pilot5,map_pilot10");
    cmd->add_option("--schedule", a.schedule,
                    "serial, parallel, or a schedule file");
    cmd->add_option("--T", a.iterations,
                    "iteration count for named schedules (0: 3*(L+2))");
    cmd->add_option("--init", a.init,
                    "impulse_power[:alpha] or genie[:scale]");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--threads", a.threads, "worker threads (0: auto)");
    cmd->add_option("--dump-blocks", a.dump, "JSON-lines per-block records");
    cmd->add_option("--out", a.out, "CSV output path (default stdout)");
}

ExperimentConfig to_config(const SweepArgs& a) {
    ExperimentConfig cfg;
    cfg.n = a.n;
    cfg.memory = a.memory;
    cfg.constellation = a.constellation;
    cfg.snr_db = parse_doubles(a.snr);
    cfg.blocks = a.blocks;
    cfg.detectors.clear();
    for (const auto& tok : split(a.detectors, ',')) {
        cfg.detectors.push_back(DetectorSpec::parse(tok));
    }
    cfg.schedule_source = a.schedule;
    cfg.iterations = a.iterations;
    cfg.init = parse_init(a.init);
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.dump_path = a.dump;
    return cfg;
}

void print_config(const SweepArgs& a, const std::string& mode) {
    std::cerr << mode << ": N=" << a.n << " L=" << a.memory << " cst="
              << a.constellation << " snr=" << a.snr << " blocks="
              << a.blocks << " detectors=" << a.detectors << " schedule="
              << a.schedule << " T=" << a.iterations << " init=" << a.init
              << " seed=" << a.seed << "\n";
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write: " + path);
    os << text;
}

int cmd_sweep(const SweepArgs& a) {
    print_config(a, "sweep");
    const auto cfg = to_config(a);
    const auto rows = run_ber_sweep(cfg);
    std::ostringstream csv;
    write_sweep_csv(csv, cfg, rows);
    emit(a.out, csv.str());
    for (const auto& row : rows) {
        std::cerr << "snr " << row.snr_db << " dB: " << row.blocks
                  << " blocks in " << row.wall_seconds << " s\n";
    }
    return 0;
}

struct ItersArgs {
    SweepArgs base;
    std::string schedules = "serial=serial,parallel=parallel";
};

int cmd_iters(const ItersArgs& a) {
    print_config(a.base, "iters");
    std::cerr << "schedules: " << a.schedules << "\n";
    auto cfg = to_config(a.base);
    std::vector<std::pair<std::string, Schedule>> schedules;
    for (const auto& tok : split(a.schedules, ',')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("schedules",
                                       "expected label=source: " + tok);
        }
        schedules.emplace_back(
            tok.substr(0, eq),
            schedule_by_name(tok.substr(eq + 1), cfg.resolved_iterations(),
                             cfg.memory));
    }
    const auto traces = run_mse_over_iters(cfg, schedules);
    std::ostringstream csv;
    write_iters_csv(csv, traces);
    emit(a.base.out, csv.str());
    return 0;
}

struct TrainArgs {
    int n = 100;
    int memory = 5;
    std::string constellation = "bpsk";
    double snr_lo = 10.0;
    double snr_hi = 10.0;
    std::string objective = "mse_h";
    int batches = 250;
    int batch_size = 256;
    double lr = 0.02;
    int kem = 0;
    double lambda = 0.1;
    std::string grad = "exact";
    std::string mask = "both";
    std::string init = "genie:0.2";
    int iterations = 3;
    std::string schedule_init = "ones";
    std::uint64_t seed = 7;
    std::uint64_t data_seed = 1;
    int threads = 0;
    int val_blocks = 0;
    int spsa_pairs = 4;
    std::string out = "learned.sched";
    std::string log;
};

int cmd_train(const TrainArgs& a) {
    std::cerr << "train: L=" << a.memory << " T=" << a.iterations
              << " objective=" << a.objective << " batches=" << a.batches
              << "x" << a.batch_size << " lr=" << a.lr << " kem=" << a.kem
              << " lambda=" << a.lambda << " grad=" << a.grad << " mask="
              << a.mask << " snr=[" << a.snr_lo << "," << a.snr_hi
              << "] init=" << a.init << " seed=" << a.seed << " data_seed="
              << a.data_seed << "\n";
    TrainingSet train;
    train.n = a.n;
    train.memory = a.memory;
    train.cst = Constellation::by_name(a.constellation);
    train.snr_lo_db = a.snr_lo;
    train.snr_hi_db = a.snr_hi;
    train.seed = a.data_seed;

    TrainConfig cfg;
    cfg.objective =
        a.objective == "neg_bmi" ? Objective::neg_bmi : Objective::mse_h;
    cfg.batches = a.batches;
    cfg.batch_size = a.batch_size;
    cfg.step_size = a.lr;
    cfg.k_em_target = a.kem;
    cfg.lambda_l1 = a.lambda;
    cfg.gradient_mode = a.grad == "spsa"
                            ? GradientMode::stochastic_perturbation
                            : GradientMode::exact_unrolled;
    cfg.train_beta_em = a.mask != "bp";
    cfg.train_beta_bp = a.mask != "em";
    cfg.init = parse_init(a.init);
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.val_blocks = a.val_blocks;
    cfg.spsa_pairs = a.spsa_pairs;

    std::ofstream log;
    if (!a.log.empty()) {
        log.open(a.log);
        if (!log) throw std::runtime_error("cannot write: " + a.log);
        cfg.log = &log;
    }

    Schedule initial;
    if (a.schedule_init == "ones") {
        initial = make_parallel_schedule(a.iterations, a.memory);
    } else if (a.schedule_init == "serial") {
        initial = make_serial_schedule(a.iterations, a.memory);
    } else {
        initial = load_schedule_file(a.schedule_init);
    }

    const Schedule learned = train_schedule(train, cfg, initial);
    save_schedule_file(learned, a.out);
    std::cerr << "train: wrote " << a.out << " (" << learned.update_count()
              << " raw updates per block)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"blind ISI estimation-detection experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file ([section] key=value)");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "BER/MSE over an SNR grid");
    add_sweep_options(sweep, sweep_args);

    ItersArgs iters_args;
    auto* iters =
        app.add_subcommand("iters", "mean MSE after every iteration");
    add_sweep_options(iters, iters_args.base);
    iters->add_option("--schedules", iters_args.schedules,
                      "comma list of label=source");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "learn momentum schedules");
    train->add_option("--N", train_args.n, "block length");
    train->add_option("--L", train_args.memory, "channel memory");
    train->add_option("--constellation", train_args.constellation, "");
    train->add_option("--snr-lo", train_args.snr_lo, "training SNR low (dB)");
    train->add_option("--snr-hi", train_args.snr_hi, "training SNR high (dB)");
    train->add_option("--objective", train_args.objective, "mse_h or neg_bmi");
    train->add_option("--batches", train_args.batches, "");
    train->add_option("--batch-size", train_args.batch_size, "");
    train->add_option("--lr", train_args.lr, "Adam step size");
    train->add_option("--kem", train_args.kem,
                      "max raw EM updates per block (0: no budget)");
    train->add_option("--lambda", train_args.lambda, "L1 weight");
    train->add_option("--grad", train_args.grad, "exact or spsa");
    train->add_option("--mask", train_args.mask, "both, em, or bp");
    train->add_option("--init", train_args.init, "EMBP initializer");
    train->add_option("--T", train_args.iterations, "unrolled iterations");
    train->add_option("--schedule-init", train_args.schedule_init,
                      "ones, serial, or a schedule file");
    train->add_option("--seed", train_args.seed, "optimizer seed");
    train->add_option("--data-seed", train_args.data_seed,
                      "training data seed");
    train->add_option("--threads", train_args.threads, "");
    train->add_option("--val-blocks", train_args.val_blocks,
                      "held-out blocks for the log");
    train->add_option("--spsa-pairs", train_args.spsa_pairs, "");
    train->add_option("--out", train_args.out, "schedule output file");
    train->add_option("--log", train_args.log, "training CSV log");

    SweepArgs eval_args;
    eval_args.detectors = "embp";
    auto* eval = app.add_subcommand("eval-schedule", "run a saved schedule");
    add_sweep_options(eval, eval_args);

    auto* selftest =
        app.add_subcommand("selftest", "small-instance oracle battery");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (iters->parsed()) return cmd_iters(iters_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) {
            print_config(eval_args, "eval-schedule");
            const auto cfg = to_config(eval_args);
            const auto rows = run_ber_sweep(cfg);
            std::ostringstream csv;
            write_sweep_csv(csv, cfg, rows);
            emit(eval_args.out, csv.str());
            return 0;
        }
        if (selftest->parsed()) {
            return run_selftest(std::cout) ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
