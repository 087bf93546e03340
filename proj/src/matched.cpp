#include "embp/matched.hpp"

#include <stdexcept>

namespace embp {

BandHermitian::BandHermitian(int n, int band) : n_(n), band_(band) {
    if (n < 1 || band < 0) {
        throw std::invalid_argument("bad band matrix shape");
    }
    diag_.resize(band + 1);
    for (int d = 0; d <= band; ++d) {
        diag_[d].assign(std::max(0, n - d), cplx(0.0, 0.0));
    }
}

cplx BandHermitian::at(int r, int c) const {
    if (r < 0 || c < 0 || r >= n_ || c >= n_) {
        throw std::out_of_range("band matrix index");
    }
    const int d = c - r;
    if (d >= 0) {
        return d <= band_ ? diag_[d][r] : cplx(0.0, 0.0);
    }
    return -d <= band_ ? std::conj(diag_[-d][c]) : cplx(0.0, 0.0);
}

MatchedStats build_matched_stats(const ChannelParams& params,
                                 const std::vector<cplx>& observation) {
    const int mem = params.memory();
    const int n = static_cast<int>(observation.size()) - mem;
    if (n < 1) {
        throw std::invalid_argument("observation shorter than channel memory");
    }
    MatchedStats st;
    st.sigma2 = params.sigma2;
    st.x.resize(n);
    for (int i = 0; i < n; ++i) {
        cplx acc(0.0, 0.0);
        for (int l = 0; l <= mem; ++l) {
            acc += std::conj(params.h[l]) * observation[i + l];
        }
        st.x[i] = acc;
    }
    st.g = BandHermitian(n, mem);
    for (int d = 0; d <= mem; ++d) {
        cplx gd(0.0, 0.0);
        for (int u = 0; u + d <= mem; ++u) {
            gd += params.h[u] * std::conj(params.h[u + d]);
        }
        if (d == 0) {
            gd = cplx(gd.real(), 0.0); // diagonal of G is real
        }
        for (int m = 0; m + d < n; ++m) {
            st.g.upper(m, d) = gd;
        }
    }
    return st;
}

} // namespace embp
