#include "embp/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace embp {

double ChannelParams::h_energy() const {
    double e = 0.0;
    for (const auto& t : h) {
        e += std::norm(t);
    }
    return e;
}

ChannelParams sample_channel(int memory, Rng& rng) {
    if (memory < 0) {
        throw std::invalid_argument("channel memory must be >= 0");
    }
    ChannelParams p;
    p.h.resize(memory + 1);
    double e = 0.0;
    for (auto& t : p.h) {
        t = rng.cnormal(1.0);
        e += std::norm(t);
    }
    const double inv = 1.0 / std::sqrt(e);
    for (auto& t : p.h) {
        t *= inv;
    }
    p.sigma2 = 0.0;
    return p;
}

double snr_to_sigma2(double snr_db, const std::vector<cplx>& h,
                     const Constellation& cst, int n) {
    if (n <= 0) {
        throw std::invalid_argument("block length must be positive");
    }
    double he = 0.0;
    for (const auto& t : h) {
        he += std::norm(t);
    }
    if (he <= 0.0) {
        throw std::invalid_argument("channel energy must be positive");
    }
    const int mem = static_cast<int>(h.size()) - 1;
    const double snr = std::pow(10.0, snr_db / 10.0);
    return he * n * cst.mean_energy() / ((n + mem) * snr);
}

double snr_of(const std::vector<cplx>& h, double sigma2,
              const Constellation& cst, int n) {
    if (sigma2 <= 0.0) {
        throw std::invalid_argument("sigma2 must be positive");
    }
    double he = 0.0;
    for (const auto& t : h) {
        he += std::norm(t);
    }
    const int mem = static_cast<int>(h.size()) - 1;
    const double snr = he * n * cst.mean_energy() / ((n + mem) * sigma2);
    return 10.0 * std::log10(snr);
}

std::vector<cplx> convolve(const std::vector<cplx>& h,
                           const std::vector<int>& symbols,
                           const Constellation& cst) {
    const int n = static_cast<int>(symbols.size());
    const int mem = static_cast<int>(h.size()) - 1;
    std::vector<cplx> y(n + mem, cplx(0.0, 0.0));
    for (int i = 0; i < n + mem; ++i) {
        cplx acc(0.0, 0.0);
        for (int l = 0; l <= mem; ++l) {
            const int k = i - l;
            if (k >= 0 && k < n) {
                acc += h[l] * cst.point(symbols[k]);
            }
        }
        y[i] = acc;
    }
    return y;
}

TransmissionBlock transmit(const ChannelParams& params,
                           const std::vector<int>& symbols,
                           const Constellation& cst, Rng& rng) {
    if (symbols.empty()) {
        throw std::invalid_argument("transmit: empty symbol block");
    }
    TransmissionBlock blk;
    blk.symbols = symbols;
    blk.truth = params;
    blk.observation = convolve(params.h, symbols, cst);
    if (params.sigma2 > 0.0) {
        for (auto& v : blk.observation) {
            v += rng.cnormal(params.sigma2);
        }
    }
    return blk;
}

} // namespace embp
