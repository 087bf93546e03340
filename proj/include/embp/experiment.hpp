#ifndef EMBP_EXPERIMENT_HPP
#define EMBP_EXPERIMENT_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "embp/baselines.hpp"
#include "embp/embp.hpp"

namespace embp {

struct DetectorSpec {
    enum class Kind {
        embp,                  // blind joint estimation and detection
        bp_coherent,           // BP with the true channel
        bp_with_embp_estimate, // fresh BP run on the EMBP channel estimate
        map_coherent,          // exact trellis MAP with the true channel
        map_pilot               // pilot LS estimate + trellis MAP
    };
    Kind kind = Kind::embp;
    double pilot_fraction = 0.05; // map_pilot only

    std::string name() const;
    static DetectorSpec parse(const std::string& token);
};

struct ExperimentConfig {
    int n = 100;
    int memory = 2;
    std::string constellation = "bpsk";
    std::vector<double> snr_db = {0, 3, 6, 9, 12};
    int blocks = 10000;
    std::vector<DetectorSpec> detectors = {
        {DetectorSpec::Kind::embp, 0.0},
        {DetectorSpec::Kind::bp_coherent, 0.0},
        {DetectorSpec::Kind::map_coherent, 0.0}};
    std::string schedule_source = "serial"; // named or a schedule file path
    int iterations = 0;                     // 0 selects 3*(L+2)
    InitStrategy init = InitStrategy::impulse_power();
    std::uint64_t seed = 1;
    int threads = 0;
    std::string dump_path; // JSON-lines per-block records when nonempty

    Schedule resolve_schedule() const;
    int resolved_iterations() const {
        return iterations > 0 ? iterations : 3 * (memory + 2);
    }
};

struct DetectorMetrics {
    std::uint64_t bit_errors = 0;
    std::uint64_t bits = 0;
    double mse_sum = 0.0;      // sign-resolved ||h_hat - h||^2, where defined
    std::uint64_t mse_count = 0;
    double bmi_sum = 0.0;
    std::uint64_t bmi_count = 0;
    std::uint64_t failures = 0;

    double ber() const {
        return bits ? static_cast<double>(bit_errors) / bits : 0.0;
    }
    double mse() const { return mse_count ? mse_sum / mse_count : 0.0; }
    double bmi() const { return bmi_count ? bmi_sum / bmi_count : 0.0; }
};

struct ResultRow {
    double snr_db = 0.0;
    std::vector<DetectorMetrics> per_detector;
    std::uint64_t blocks = 0;
    double wall_seconds = 0.0;
};

std::vector<ResultRow> run_ber_sweep(const ExperimentConfig& config);
void write_sweep_csv(std::ostream& os, const ExperimentConfig& config,
                     const std::vector<ResultRow>& rows);

/// Mean sign-resolved squared channel error after every iteration t = 0..T,
/// one trace per schedule, all schedules sharing blocks and initializers.
struct MseTrace {
    std::string name;
    std::vector<double> mse;       // T+1 means
    std::vector<double> se;        // standard errors of the means
};
std::vector<MseTrace> run_mse_over_iters(
    const ExperimentConfig& config,
    const std::vector<std::pair<std::string, Schedule>>& schedules);
void write_iters_csv(std::ostream& os,
                     const std::vector<MseTrace>& traces);

/// Block indices (under this config's seed derivation) whose coherent-BP
/// beliefs have not settled after probe_t flooding iterations: the total
/// variation between the last two belief sets exceeds the threshold.
std::vector<std::uint64_t> find_adversarial_channels(
    const ExperimentConfig& config, double snr_db, int want, int probe_t,
    double tv_threshold);

/// Mean coherent-BP BER over the given blocks with a given per-iteration
/// momentum sequence (used by the error-floor study).
std::pair<std::uint64_t, std::uint64_t> coherent_bp_errors(
    const ExperimentConfig& config, double snr_db,
    const std::vector<std::uint64_t>& block_ids,
    const std::vector<double>& beta_bp);

} // namespace embp

#endif
