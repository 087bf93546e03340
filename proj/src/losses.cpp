#include "embp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace embp {

double loss_mse(const std::vector<cplx>& h_hat, const std::vector<cplx>& h) {
    if (h_hat.size() != h.size()) {
        throw std::invalid_argument("loss_mse: length mismatch");
    }
    double minus = 0.0;
    double plus = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        minus += std::norm(h_hat[k] - h[k]);
        plus += std::norm(h_hat[k] + h[k]);
    }
    return std::min(minus, plus);
}

double loss_mse(const EmbpResult& result, const ChannelParams& truth) {
    return loss_mse(result.final_params.h, truth.h);
}

double bmi(const BeliefSet& beliefs, const std::vector<int>& true_symbols,
           const Constellation& cst) {
    if (static_cast<int>(true_symbols.size()) != beliefs.n) {
        throw std::invalid_argument("bmi: symbol count mismatch");
    }
    constexpr double kFloorLog = -69.07755278982137; // log(1e-30)
    double ce = 0.0; // cross entropy in bits
    for (int k = 0; k < beliefs.n; ++k) {
        const double lb = std::max(beliefs.row(k)[true_symbols[k]], kFloorLog);
        ce -= lb;
    }
    ce /= beliefs.n * std::log(2.0);
    return cst.bits_per_symbol() - ce;
}

double bmi_clipped(const BeliefSet& beliefs,
                   const std::vector<int>& true_symbols,
                   const Constellation& cst) {
    return std::clamp(bmi(beliefs, true_symbols, cst), 0.0,
                      cst.bits_per_symbol());
}

double loss_bmi(const BeliefSet& beliefs, const std::vector<int>& true_symbols,
                const Constellation& cst) {
    return -bmi(beliefs, true_symbols, cst);
}

std::vector<int> smallest_beta_entries(const Schedule& schedule, int k_prime) {
    const int width = schedule.width();
    const int total = schedule.iterations() * width;
    if (k_prime < 0 || k_prime > total) {
        throw std::invalid_argument("k_prime outside 0..T*(L+2)");
    }
    std::vector<int> idx(total);
    for (int i = 0; i < total; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double va = std::abs(schedule.beta_em[a / width][a % width]);
        const double vb = std::abs(schedule.beta_em[b / width][b % width]);
        if (va != vb) return va < vb;
        return a < b; // (t, parameter index) order
    });
    idx.resize(k_prime);
    return idx;
}

double l1_penalty(const Schedule& schedule, int k_prime) {
    const int width = schedule.width();
    double acc = 0.0;
    for (int flat : smallest_beta_entries(schedule, k_prime)) {
        acc += std::abs(schedule.beta_em[flat / width][flat % width]);
    }
    return acc;
}

} // namespace embp
