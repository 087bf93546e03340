#include "embp/factors.hpp"

#include <stdexcept>

namespace embp {

FactorTables::FactorTables(int n, int band, int order)
    : n_(n), band_(band), m_(order) {
    logf_.assign(static_cast<std::size_t>(n) * order, 0.0);
    logi_.assign(static_cast<std::size_t>(band) * n * order * order, 0.0);
}

FactorTables compute_factors(const MatchedStats& stats,
                             const Constellation& cst) {
    if (stats.sigma2 <= 0.0) {
        throw std::invalid_argument("compute_factors: sigma2 must be positive");
    }
    const int n = stats.block_length();
    const int band = stats.g.bandwidth();
    const int order = cst.size();
    const double inv_s2 = 1.0 / stats.sigma2;

    FactorTables t(n, band, order);
    for (int k = 0; k < n; ++k) {
        const double gkk = stats.g.upper(k, 0).real();
        for (int i = 0; i < order; ++i) {
            const cplx c = cst.point(i);
            t.log_f(k, i) =
                inv_s2 * (2.0 * (stats.x[k] * std::conj(c)).real() -
                          gkk * std::norm(c));
        }
    }
    for (int d = 1; d <= band; ++d) {
        for (int m = 0; m + d < n; ++m) {
            // G_{m+d, m} = conj(G_{m, m+d})
            const cplx g_low = std::conj(stats.g.upper(m, d));
            for (int a = 0; a < order; ++a) {
                for (int b = 0; b < order; ++b) {
                    const cplx prod =
                        g_low * cst.point(b) * std::conj(cst.point(a));
                    t.log_i(m, d, a, b) = -2.0 * inv_s2 * prod.real();
                }
            }
        }
    }
    return t;
}

} // namespace embp
