#include "embp/unrolled.hpp"

#include <cmath>
#include <stdexcept>

#include "embp/log_domain.hpp"
#include "embp/losses.hpp"

namespace embp {

namespace {

constexpr double kBeliefFloorLog = -69.07755278982137; // log(1e-30)

struct Edge {
    int u;
    int off;
    int v;
    int rev; // index of the reverse edge
};

// Adjoints of complex values store (dL/dRe, dL/dIm) as a complex number;
// for w = p * q the chain rule is dp += dw * conj(q).

struct Engine {
    int n = 0, mem = 0, m = 0, t_max = 0;
    const Constellation* cst = nullptr;
    const std::vector<cplx>* y = nullptr;
    const Schedule* schedule = nullptr;
    double floor_s2 = 0.0;
    double y_power = 0.0;

    std::vector<Edge> edges;

    // trace; per-iteration rows t = 1..T live at index t-1, state rows 0..T
    std::vector<ChannelParams> theta;
    std::vector<double> logb, mu, raw, logf, logi, s, s_sum, raw_s2;
    std::vector<cplx> x, g, z, raw_h;
    std::vector<char> raw_s2_floored, mix_s2_floored;

    std::size_t bi(int t, int k, int i) const {
        return (static_cast<std::size_t>(t) * n + k) * m + i;
    }
    std::size_t mi(int t, int e, int j) const {
        return (static_cast<std::size_t>(t) * edges.size() + e) * m + j;
    }
    std::size_t ri(int t, int e, int j) const {
        return (static_cast<std::size_t>(t - 1) * edges.size() + e) * m + j;
    }
    std::size_t fi(int t, int k, int i) const {
        return (static_cast<std::size_t>(t - 1) * n + k) * m + i;
    }
    std::size_t ii(int t, int d, int a, int b) const {
        return ((static_cast<std::size_t>(t - 1) * mem + (d - 1)) * m + a) * m +
               b;
    }

    double log_i_oriented(int t, const Edge& e, int i, int j) const {
        // i indexes c_u, j indexes c_v; table(a, b) has a at the upper index
        return e.off > 0 ? logi[ii(t, e.off, j, i)]
                         : logi[ii(t, -e.off, i, j)];
    }

    void build_edges() {
        edges.clear();
        for (int u = 0; u < n; ++u) {
            for (int off = -mem; off <= mem; ++off) {
                const int v = u + off;
                if (off == 0 || v < 0 || v >= n) continue;
                edges.push_back({u, off, v, -1});
            }
        }
        // dense index for reverse lookup
        std::vector<int> table(static_cast<std::size_t>(n) * 2 * mem + 1, -1);
        auto slot = [&](int u, int off) {
            return static_cast<std::size_t>(u) * 2 * mem +
                   (off < 0 ? off + mem : mem + off - 1);
        };
        for (std::size_t k = 0; k < edges.size(); ++k) {
            table[slot(edges[k].u, edges[k].off)] = static_cast<int>(k);
        }
        for (auto& e : edges) e.rev = table[slot(e.v, -e.off)];
    }

    void forward(const ChannelParams& init) {
        const int e_cnt = static_cast<int>(edges.size());
        theta.assign(1, init);
        const double uni = -std::log(static_cast<double>(m));
        logb.assign(static_cast<std::size_t>(t_max + 1) * n * m, uni);
        mu.assign(static_cast<std::size_t>(t_max + 1) * e_cnt * m, uni);
        raw.assign(static_cast<std::size_t>(t_max) * e_cnt * m, 0.0);
        x.assign(static_cast<std::size_t>(t_max) * n, cplx(0, 0));
        g.assign(static_cast<std::size_t>(t_max) * (mem + 1), cplx(0, 0));
        logf.assign(static_cast<std::size_t>(t_max) * n * m, 0.0);
        logi.assign(static_cast<std::size_t>(t_max) * mem * m * m, 0.0);
        z.assign(static_cast<std::size_t>(t_max) * n, cplx(0, 0));
        s.assign(static_cast<std::size_t>(t_max) * n, 0.0);
        s_sum.assign(t_max, 0.0);
        raw_h.assign(static_cast<std::size_t>(t_max) * (mem + 1), cplx(0, 0));
        raw_s2.assign(t_max, 0.0);
        raw_s2_floored.assign(t_max, 0);
        mix_s2_floored.assign(t_max, 0);

        y_power = 0.0;
        for (const auto& v : *y) y_power += std::norm(v);
        floor_s2 = 1e-8 * y_power / static_cast<double>(y->size());

        std::vector<double> terms(m);
        for (int t = 1; t <= t_max; ++t) {
            const ChannelParams& th = theta[t - 1];
            const double inv_s2 = 1.0 / th.sigma2;

            for (int k = 0; k < n; ++k) {
                cplx acc(0, 0);
                for (int l = 0; l <= mem; ++l) {
                    acc += std::conj(th.h[l]) * (*y)[k + l];
                }
                x[(t - 1) * n + k] = acc;
            }
            for (int d = 0; d <= mem; ++d) {
                cplx acc(0, 0);
                for (int u = 0; u + d <= mem; ++u) {
                    acc += th.h[u] * std::conj(th.h[u + d]);
                }
                g[(t - 1) * (mem + 1) + d] = acc;
            }
            const double g0r = g[(t - 1) * (mem + 1)].real();

            for (int k = 0; k < n; ++k) {
                for (int i = 0; i < m; ++i) {
                    const cplx c = cst->point(i);
                    logf[fi(t, k, i)] =
                        inv_s2 *
                        (2.0 * (x[(t - 1) * n + k] * std::conj(c)).real() -
                         g0r * std::norm(c));
                }
            }
            for (int d = 1; d <= mem; ++d) {
                const cplx g_low = std::conj(g[(t - 1) * (mem + 1) + d]);
                for (int a = 0; a < m; ++a) {
                    for (int b = 0; b < m; ++b) {
                        const cplx prod =
                            g_low * cst->point(b) * std::conj(cst->point(a));
                        logi[ii(t, d, a, b)] = -2.0 * inv_s2 * prod.real();
                    }
                }
            }

            // flooding message update from the t-1 state
            for (int e = 0; e < e_cnt; ++e) {
                const Edge& ed = edges[e];
                for (int j = 0; j < m; ++j) {
                    for (int i = 0; i < m; ++i) {
                        const double ext =
                            logb[bi(t - 1, ed.u, i)] -
                            std::max(mu[mi(t - 1, ed.rev, i)], kLogFloor);
                        terms[i] = log_i_oriented(t, ed, i, j) + ext;
                    }
                    raw[ri(t, e, j)] = logsumexp(terms);
                }
                double nc = kNegInf;
                for (int j = 0; j < m; ++j) {
                    nc = logsumexp2(nc, raw[ri(t, e, j)]);
                }
                if (!std::isfinite(nc)) {
                    throw std::runtime_error("unrolled: message underflow");
                }
                for (int j = 0; j < m; ++j) raw[ri(t, e, j)] -= nc;
            }

            const double beta = schedule->beta_bp[t - 1];
            for (int e = 0; e < e_cnt; ++e) {
                for (int j = 0; j < m; ++j) {
                    double val;
                    if (beta == 1.0) {
                        val = raw[ri(t, e, j)];
                    } else if (beta == 0.0) {
                        val = mu[mi(t - 1, e, j)];
                    } else {
                        val = logsumexp2(
                            std::log(beta) + raw[ri(t, e, j)],
                            std::log1p(-beta) + mu[mi(t - 1, e, j)]);
                    }
                    mu[mi(t, e, j)] = val;
                }
            }

            for (int k = 0; k < n; ++k) {
                for (int i = 0; i < m; ++i) {
                    logb[bi(t, k, i)] = logf[fi(t, k, i)];
                }
            }
            for (int e = 0; e < e_cnt; ++e) {
                const Edge& ed = edges[e];
                for (int i = 0; i < m; ++i) {
                    logb[bi(t, ed.v, i)] += mu[mi(t, e, i)];
                }
            }
            for (int k = 0; k < n; ++k) {
                double nc = kNegInf;
                for (int i = 0; i < m; ++i) {
                    nc = logsumexp2(nc, logb[bi(t, k, i)]);
                }
                for (int i = 0; i < m; ++i) logb[bi(t, k, i)] -= nc;
            }

            double ssum = 0.0;
            for (int k = 0; k < n; ++k) {
                cplx zk(0, 0);
                double sk = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double p = std::exp(logb[bi(t, k, i)]);
                    zk += p * cst->point(i);
                    sk += p * std::norm(cst->point(i));
                }
                z[(t - 1) * n + k] = zk;
                s[(t - 1) * n + k] = sk;
                ssum += sk;
            }
            s_sum[t - 1] = ssum;

            // raw updates: always evaluated here so d/d beta exists at 0
            for (int l = 0; l <= mem; ++l) {
                cplx numer(0, 0);
                for (int k = 0; k < n; ++k) {
                    numer += (*y)[k + l] * std::conj(z[(t - 1) * n + k]);
                }
                for (int k = 0; k <= mem; ++k) {
                    if (k == l) continue;
                    cplx corr(0, 0);
                    for (int i = 0; i < n; ++i) {
                        const int j = i + l - k;
                        if (j >= 0 && j < n) {
                            corr += z[(t - 1) * n + j] *
                                    std::conj(z[(t - 1) * n + i]);
                        }
                    }
                    numer -= th.h[k] * corr;
                }
                raw_h[(t - 1) * (mem + 1) + l] = numer / ssum;
            }
            {
                double bracket = y_power;
                for (int k = 0; k < n; ++k) {
                    bracket -= 2.0 * (x[(t - 1) * n + k] *
                                      std::conj(z[(t - 1) * n + k]))
                                         .real();
                }
                bracket += g0r * ssum;
                for (int d = 1; d <= mem; ++d) {
                    const cplx gd = g[(t - 1) * (mem + 1) + d];
                    for (int k = d; k < n; ++k) {
                        bracket += 2.0 * (gd *
                                          std::conj(z[(t - 1) * n + k - d]) *
                                          z[(t - 1) * n + k])
                                             .real();
                    }
                }
                const double rawv = bracket / static_cast<double>(n);
                raw_s2_floored[t - 1] = rawv < floor_s2 ? 1 : 0;
                raw_s2[t - 1] = std::max(rawv, floor_s2);
            }

            const auto& row = schedule->beta_em[t - 1];
            ChannelParams next = th;
            for (int l = 0; l <= mem; ++l) {
                const double b = row[l];
                if (b == 0.0) continue;
                const cplx rh = raw_h[(t - 1) * (mem + 1) + l];
                next.h[l] = b == 1.0 ? rh : b * rh + (1.0 - b) * th.h[l];
            }
            {
                const double b = row[mem + 1];
                if (b != 0.0) {
                    const double mixed =
                        b == 1.0 ? raw_s2[t - 1]
                                 : b * raw_s2[t - 1] + (1.0 - b) * th.sigma2;
                    mix_s2_floored[t - 1] = mixed < floor_s2 ? 1 : 0;
                    next.sigma2 = std::max(mixed, floor_s2);
                }
            }
            theta.push_back(next);
        }
    }

    UnrolledOutput backward(const LossTarget& target) {
        const int e_cnt = static_cast<int>(edges.size());
        UnrolledOutput out;
        out.d_beta_em.assign(t_max, std::vector<double>(mem + 2, 0.0));
        out.d_beta_bp.assign(t_max, 0.0);
        out.final_params = theta[t_max];
        out.final_beliefs = BeliefSet::uniform(n, m);
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < m; ++i) {
                out.final_beliefs.row(k)[i] = logb[bi(t_max, k, i)];
            }
        }

        std::vector<cplx> dh(mem + 1, cplx(0, 0));
        double ds2 = 0.0;
        std::vector<double> dlogb_t(static_cast<std::size_t>(n) * m, 0.0);
        std::vector<double> dmu_t(static_cast<std::size_t>(e_cnt) * m, 0.0);

        if (target.objective == Objective::mse_h) {
            if (target.truth == nullptr) {
                throw std::invalid_argument("mse_h loss needs the truth");
            }
            const auto& ht = target.truth->h;
            double minus = 0.0, plus = 0.0;
            for (int l = 0; l <= mem; ++l) {
                minus += std::norm(theta[t_max].h[l] - ht[l]);
                plus += std::norm(theta[t_max].h[l] + ht[l]);
            }
            const double sign = plus < minus ? 1.0 : -1.0;
            out.loss = std::min(minus, plus);
            for (int l = 0; l <= mem; ++l) {
                dh[l] = 2.0 * (theta[t_max].h[l] + sign * ht[l]);
            }
        } else {
            if (target.symbols == nullptr) {
                throw std::invalid_argument("neg_bmi loss needs the symbols");
            }
            const double scale = 1.0 / (n * std::log(2.0));
            double ce = 0.0; // cross entropy in nats
            for (int k = 0; k < n; ++k) {
                const int ts = (*target.symbols)[k];
                const double lb = logb[bi(t_max, k, ts)];
                ce -= std::max(lb, kBeliefFloorLog);
                if (lb > kBeliefFloorLog) {
                    dlogb_t[static_cast<std::size_t>(k) * m + ts] -= scale;
                }
            }
            out.loss = -(cst->bits_per_symbol() - ce * scale);
        }

        std::vector<double> dlogb_prev(dlogb_t.size(), 0.0);
        std::vector<double> dmu_prev(dmu_t.size(), 0.0);
        std::vector<cplx> dh_prev(mem + 1), dz(n), dx_acc(n), dg(mem + 1),
            draw_h(mem + 1);
        std::vector<double> ds(n);
        std::vector<double> dlogf_t(static_cast<std::size_t>(n) * m);
        std::vector<double> dlogi_t(static_cast<std::size_t>(mem) * m * m);
        std::vector<double> draw(static_cast<std::size_t>(e_cnt) * m);
        std::vector<double> terms(m);

        for (int t = t_max; t >= 1; --t) {
            const ChannelParams& th = theta[t - 1];
            const double inv_s2 = 1.0 / th.sigma2;
            const double g0r = g[(t - 1) * (mem + 1)].real();
            const auto& row = schedule->beta_em[t - 1];

            std::fill(dh_prev.begin(), dh_prev.end(), cplx(0, 0));
            double ds2_prev = 0.0;
            std::fill(dz.begin(), dz.end(), cplx(0, 0));
            std::fill(ds.begin(), ds.end(), 0.0);
            std::fill(dx_acc.begin(), dx_acc.end(), cplx(0, 0));
            std::fill(dg.begin(), dg.end(), cplx(0, 0));
            double dg0r = 0.0;
            std::fill(dlogf_t.begin(), dlogf_t.end(), 0.0);
            std::fill(dlogi_t.begin(), dlogi_t.end(), 0.0);
            std::fill(draw.begin(), draw.end(), 0.0);
            std::fill(draw_h.begin(), draw_h.end(), cplx(0, 0));
            std::fill(dlogb_prev.begin(), dlogb_prev.end(), 0.0);
            std::fill(dmu_prev.begin(), dmu_prev.end(), 0.0);

            // parameter momentum combine; the beta sensitivity
            // (raw - previous) exists at beta == 0 as well
            double draw_s2 = 0.0;
            for (int l = 0; l <= mem; ++l) {
                const double b = row[l];
                const cplx rh = raw_h[(t - 1) * (mem + 1) + l];
                out.d_beta_em[t - 1][l] +=
                    dh[l].real() * (rh - th.h[l]).real() +
                    dh[l].imag() * (rh - th.h[l]).imag();
                if (b == 0.0) {
                    dh_prev[l] += dh[l];
                } else {
                    draw_h[l] += b * dh[l];
                    dh_prev[l] += (1.0 - b) * dh[l];
                }
            }
            {
                const double b = row[mem + 1];
                if (b == 0.0) {
                    out.d_beta_em[t - 1][mem + 1] +=
                        ds2 * (raw_s2[t - 1] - th.sigma2);
                    ds2_prev += ds2;
                } else if (!mix_s2_floored[t - 1]) {
                    out.d_beta_em[t - 1][mem + 1] +=
                        ds2 * (raw_s2[t - 1] - th.sigma2);
                    draw_s2 += b * ds2;
                    ds2_prev += (1.0 - b) * ds2;
                }
            }

            // raw tap updates
            for (int l = 0; l <= mem; ++l) {
                const cplx a = draw_h[l];
                if (a == cplx(0, 0)) continue;
                const double ssum = s_sum[t - 1];
                const cplx rh = raw_h[(t - 1) * (mem + 1) + l];
                const cplx dnum = a / ssum;
                const double d_ssum =
                    -(a.real() * rh.real() + a.imag() * rh.imag()) / ssum;
                for (int k = 0; k < n; ++k) ds[k] += d_ssum;
                for (int k = 0; k < n; ++k) {
                    dz[k] += std::conj(dnum) * (*y)[k + l];
                }
                for (int k = 0; k <= mem; ++k) {
                    if (k == l) continue;
                    cplx corr(0, 0);
                    for (int i = 0; i < n; ++i) {
                        const int j = i + l - k;
                        if (j >= 0 && j < n) {
                            corr += z[(t - 1) * n + j] *
                                    std::conj(z[(t - 1) * n + i]);
                        }
                    }
                    dh_prev[k] += -dnum * std::conj(corr);
                    const cplx dcorr = -dnum * std::conj(th.h[k]);
                    for (int i = 0; i < n; ++i) {
                        const int j = i + l - k;
                        if (j >= 0 && j < n) {
                            dz[j] += dcorr * z[(t - 1) * n + i];
                            dz[i] += std::conj(dcorr) * z[(t - 1) * n + j];
                        }
                    }
                }
            }
            // raw variance update
            if (draw_s2 != 0.0 && !raw_s2_floored[t - 1]) {
                const double db = draw_s2 / static_cast<double>(n);
                for (int k = 0; k < n; ++k) {
                    const cplx xk = x[(t - 1) * n + k];
                    const cplx zk = z[(t - 1) * n + k];
                    dx_acc[k] += -2.0 * db * zk;
                    dz[k] += -2.0 * db * xk;
                }
                dg0r += db * s_sum[t - 1];
                for (int k = 0; k < n; ++k) ds[k] += db * g0r;
                for (int d = 1; d <= mem; ++d) {
                    const cplx gd = g[(t - 1) * (mem + 1) + d];
                    for (int k = d; k < n; ++k) {
                        const cplx za = z[(t - 1) * n + k - d];
                        const cplx zb = z[(t - 1) * n + k];
                        const cplx w = std::conj(za) * zb;
                        dg[d] += 2.0 * db * std::conj(w);
                        const cplx dw = 2.0 * db * std::conj(gd);
                        dz[k] += dw * za;
                        dz[k - d] += std::conj(dw) * zb;
                    }
                }
            }
            // posterior moments to beliefs
            for (int k = 0; k < n; ++k) {
                if (dz[k] == cplx(0, 0) && ds[k] == 0.0) continue;
                for (int i = 0; i < m; ++i) {
                    const double p = std::exp(logb[bi(t, k, i)]);
                    const cplx c = cst->point(i);
                    const double dp = dz[k].real() * c.real() +
                                      dz[k].imag() * c.imag() +
                                      ds[k] * std::norm(c);
                    dlogb_t[static_cast<std::size_t>(k) * m + i] += p * dp;
                }
            }

            // beliefs backward (normalization, then split into F and mu)
            for (int k = 0; k < n; ++k) {
                double tot = 0.0;
                for (int i = 0; i < m; ++i) {
                    tot += dlogb_t[static_cast<std::size_t>(k) * m + i];
                }
                for (int i = 0; i < m; ++i) {
                    const double p = std::exp(logb[bi(t, k, i)]);
                    const double dpre =
                        dlogb_t[static_cast<std::size_t>(k) * m + i] -
                        p * tot;
                    dlogf_t[static_cast<std::size_t>(k) * m + i] += dpre;
                    dlogb_t[static_cast<std::size_t>(k) * m + i] = dpre;
                }
            }
            for (int e = 0; e < e_cnt; ++e) {
                const Edge& ed = edges[e];
                for (int i = 0; i < m; ++i) {
                    dmu_t[static_cast<std::size_t>(e) * m + i] +=
                        dlogb_t[static_cast<std::size_t>(ed.v) * m + i];
                }
            }

            // message momentum backward
            const double beta = schedule->beta_bp[t - 1];
            for (int e = 0; e < e_cnt; ++e) {
                for (int j = 0; j < m; ++j) {
                    const double a =
                        dmu_t[static_cast<std::size_t>(e) * m + j];
                    if (a == 0.0) continue;
                    const double lraw = raw[ri(t, e, j)];
                    const double lprev = mu[mi(t - 1, e, j)];
                    const double lnew = mu[mi(t, e, j)];
                    out.d_beta_bp[t - 1] +=
                        a * (std::exp(lraw - lnew) - std::exp(lprev - lnew));
                    if (beta == 1.0) {
                        draw[static_cast<std::size_t>(e) * m + j] += a;
                    } else if (beta == 0.0) {
                        dmu_prev[static_cast<std::size_t>(e) * m + j] += a;
                    } else {
                        draw[static_cast<std::size_t>(e) * m + j] +=
                            a * beta * std::exp(lraw - lnew);
                        dmu_prev[static_cast<std::size_t>(e) * m + j] +=
                            a * (1.0 - beta) * std::exp(lprev - lnew);
                    }
                }
            }

            // raw message backward
            for (int e = 0; e < e_cnt; ++e) {
                const Edge& ed = edges[e];
                double tot = 0.0;
                bool any = false;
                for (int j = 0; j < m; ++j) {
                    const double v = draw[static_cast<std::size_t>(e) * m + j];
                    tot += v;
                    any |= v != 0.0;
                }
                if (!any) continue;
                for (int j = 0; j < m; ++j) {
                    const double pj = std::exp(raw[ri(t, e, j)]);
                    draw[static_cast<std::size_t>(e) * m + j] -= pj * tot;
                }
                for (int j = 0; j < m; ++j) {
                    const double dpre =
                        draw[static_cast<std::size_t>(e) * m + j];
                    if (dpre == 0.0) continue;
                    double pre = kNegInf;
                    for (int i = 0; i < m; ++i) {
                        const double ext =
                            logb[bi(t - 1, ed.u, i)] -
                            std::max(mu[mi(t - 1, ed.rev, i)], kLogFloor);
                        terms[i] = log_i_oriented(t, ed, i, j) + ext;
                        pre = logsumexp2(pre, terms[i]);
                    }
                    for (int i = 0; i < m; ++i) {
                        const double dterm =
                            dpre * std::exp(terms[i] - pre);
                        if (dterm == 0.0) continue;
                        if (ed.off > 0) {
                            dlogi_t[((static_cast<std::size_t>(ed.off - 1)) *
                                         m +
                                     j) *
                                        m +
                                    i] += dterm;
                        } else {
                            dlogi_t[((static_cast<std::size_t>(-ed.off - 1)) *
                                         m +
                                     i) *
                                        m +
                                    j] += dterm;
                        }
                        dlogb_prev[static_cast<std::size_t>(ed.u) * m + i] +=
                            dterm;
                        if (mu[mi(t - 1, ed.rev, i)] > kLogFloor) {
                            dmu_prev[static_cast<std::size_t>(ed.rev) * m +
                                     i] -= dterm;
                        }
                    }
                }
            }

            // factor tables backward
            double ds2_tab = 0.0;
            for (int k = 0; k < n; ++k) {
                for (int i = 0; i < m; ++i) {
                    const double a =
                        dlogf_t[static_cast<std::size_t>(k) * m + i];
                    if (a == 0.0) continue;
                    const cplx c = cst->point(i);
                    dx_acc[k] += a * 2.0 * inv_s2 * c;
                    dg0r += -a * inv_s2 * std::norm(c);
                    ds2_tab += -a * logf[fi(t, k, i)] * inv_s2;
                }
            }
            for (int d = 1; d <= mem; ++d) {
                for (int ai = 0; ai < m; ++ai) {
                    for (int bi_ = 0; bi_ < m; ++bi_) {
                        const double a =
                            dlogi_t[((static_cast<std::size_t>(d - 1)) * m +
                                     ai) *
                                        m +
                                    bi_];
                        if (a == 0.0) continue;
                        const cplx w =
                            cst->point(bi_) * std::conj(cst->point(ai));
                        // logI = -(2/s2)(g_d.re w.re + g_d.im w.im)
                        dg[d] += -2.0 * inv_s2 * a * w;
                        ds2_tab += -a * logi[ii(t, d, ai, bi_)] * inv_s2;
                    }
                }
            }

            // matched statistics backward
            for (int k = 0; k < n; ++k) {
                const cplx a = dx_acc[k];
                if (a == cplx(0, 0)) continue;
                for (int l = 0; l <= mem; ++l) {
                    dh_prev[l] += std::conj(a) * (*y)[k + l];
                }
            }
            for (int u = 0; u <= mem; ++u) {
                dh_prev[u] += dg0r * 2.0 * th.h[u];
            }
            for (int d = 1; d <= mem; ++d) {
                const cplx a = dg[d];
                if (a == cplx(0, 0)) continue;
                for (int u = 0; u + d <= mem; ++u) {
                    dh_prev[u] += a * th.h[u + d];
                    dh_prev[u + d] += std::conj(a) * th.h[u];
                }
            }
            ds2_prev += ds2_tab;

            dh = dh_prev;
            ds2 = ds2_prev;
            std::swap(dlogb_t, dlogb_prev);
            std::swap(dmu_t, dmu_prev);
        }
        return out;
    }
};

} // namespace

UnrolledOutput unrolled_gradient(const std::vector<cplx>& observation,
                                 const Constellation& cst, int memory,
                                 const Schedule& schedule,
                                 const ChannelParams& init,
                                 const LossTarget& target) {
    schedule.validate();
    if (schedule.memory() != memory) {
        throw std::invalid_argument("unrolled_gradient: schedule width");
    }
    Engine eng;
    eng.n = static_cast<int>(observation.size()) - memory;
    eng.mem = memory;
    eng.m = cst.size();
    eng.t_max = schedule.iterations();
    eng.cst = &cst;
    eng.y = &observation;
    eng.schedule = &schedule;
    if (eng.n < 1) {
        throw std::invalid_argument("unrolled_gradient: observation short");
    }
    eng.build_edges();
    eng.forward(init);
    return eng.backward(target);
}

double embp_loss(const std::vector<cplx>& observation,
                 const Constellation& cst, int memory,
                 const Schedule& schedule, const ChannelParams& init,
                 const LossTarget& target) {
    const EmbpResult res = run_embp(observation, cst, memory, schedule, init);
    if (target.objective == Objective::mse_h) {
        return loss_mse(res.final_params.h, target.truth->h);
    }
    return loss_bmi(res.final_beliefs, *target.symbols, cst);
}

} // namespace embp
