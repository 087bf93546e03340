#ifndef EMBP_FACTORS_HPP
#define EMBP_FACTORS_HPP

#include <vector>

#include "embp/constellation.hpp"
#include "embp/matched.hpp"

namespace embp {

/// Log-domain local factors of the matched-filter factor graph.
///
/// logF is N x M. logI holds one M x M table per coupled pair (m, m+d),
/// 1 <= d <= L, indexed as table(a, b) with `a` the symbol at the upper
/// index m+d and `b` the symbol at the lower index m. The table equals the
/// factor read from either side, so one copy serves both directions.
class FactorTables {
  public:
    FactorTables() = default;
    FactorTables(int n, int band, int order);

    int block_length() const { return n_; }
    int bandwidth() const { return band_; }
    int order() const { return m_; }

    double& log_f(int n, int i) { return logf_[n * m_ + i]; }
    double log_f(int n, int i) const { return logf_[n * m_ + i]; }

    /// Pair table entry for the pair (lower, lower+d).
    double& log_i(int lower, int d, int a, int b) {
        return logi_[pair_base(lower, d) + a * m_ + b];
    }
    double log_i(int lower, int d, int a, int b) const {
        return logi_[pair_base(lower, d) + a * m_ + b];
    }

    /// Factor value I_nm(c_n, c_m) for arbitrary coupled (n, m).
    double log_i_pair(int n, int m, int cn, int cm) const {
        return n > m ? log_i(m, n - m, cn, cm) : log_i(n, m - n, cm, cn);
    }

  private:
    std::size_t pair_base(int lower, int d) const {
        return static_cast<std::size_t>((d - 1) * n_ + lower) * m_ * m_;
    }

    int n_ = 0;
    int band_ = 0;
    int m_ = 0;
    std::vector<double> logf_;
    std::vector<double> logi_;
};

/// Fills the tables from matched statistics:
///   log F_n(c)      = Re{2 x_n c* - G_nn |c|^2} / sigma2
///   log I_nm(a, b)  = -2 Re{G_nm b a*} / sigma2   (n > m)
FactorTables compute_factors(const MatchedStats& stats,
                             const Constellation& cst);

} // namespace embp

#endif
