#include "embp/em.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace embp {

int Schedule::update_count() const {
    int c = 0;
    for (const auto& row : beta_em) {
        for (double v : row) {
            if (v != 0.0) ++c;
        }
    }
    return c;
}

void Schedule::validate() const {
    if (beta_em.empty() || width() < 2) {
        throw std::invalid_argument("schedule: empty or malformed beta_em");
    }
    if (beta_bp.size() != beta_em.size()) {
        throw std::invalid_argument("schedule: beta_bp length != T");
    }
    for (const auto& row : beta_em) {
        if (static_cast<int>(row.size()) != width()) {
            throw std::invalid_argument("schedule: ragged beta_em");
        }
        for (double v : row) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument(
                    "schedule: beta_em entry outside [0, 1]");
            }
        }
    }
    for (double v : beta_bp) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("schedule: beta_bp entry outside [0, 1]");
        }
    }
}

Schedule make_serial_schedule(int t, int memory) {
    if (t < 1 || memory < 0) {
        throw std::invalid_argument("make_serial_schedule: bad shape");
    }
    const int width = memory + 2;
    Schedule s;
    s.beta_em.assign(t, std::vector<double>(width, 0.0));
    for (int i = 0; i < t; ++i) {
        s.beta_em[i][i % width] = 1.0;
    }
    s.beta_bp.assign(t, 1.0);
    return s;
}

Schedule make_parallel_schedule(int t, int memory) {
    if (t < 1 || memory < 0) {
        throw std::invalid_argument("make_parallel_schedule: bad shape");
    }
    Schedule s;
    s.beta_em.assign(t, std::vector<double>(memory + 2, 1.0));
    s.beta_bp.assign(t, 1.0);
    return s;
}

Schedule make_custom_schedule(std::vector<std::vector<double>> beta_em,
                              std::vector<double> beta_bp) {
    Schedule s;
    s.beta_em = std::move(beta_em);
    s.beta_bp = std::move(beta_bp);
    s.validate();
    return s;
}

Schedule schedule_by_name(const std::string& name, int t, int memory) {
    if (name == "serial") return make_serial_schedule(t, memory);
    if (name == "parallel") return make_parallel_schedule(t, memory);
    return load_schedule_file(name);
}

void save_schedule(const Schedule& s, std::ostream& os) {
    char buf[64];
    os << s.iterations() << "\n";
    for (const auto& row : s.beta_em) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", row[k]);
            os << (k ? " " : "") << buf;
        }
        os << "\n";
    }
    for (std::size_t k = 0; k < s.beta_bp.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", s.beta_bp[k]);
        os << (k ? " " : "") << buf;
    }
    os << "\n";
}

void save_schedule_file(const Schedule& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write schedule file: " + path);
    }
    save_schedule(s, os);
}

Schedule load_schedule(std::istream& is) {
    int t = 0;
    if (!(is >> t) || t < 1) {
        throw std::runtime_error("schedule file: bad iteration count");
    }
    std::string line;
    std::getline(is, line); // consume rest of first line
    Schedule s;
    s.beta_em.reserve(t);
    for (int i = 0; i < t; ++i) {
        if (!std::getline(is, line)) {
            throw std::runtime_error("schedule file: truncated beta_em");
        }
        std::istringstream row(line);
        std::vector<double> vals;
        double v = 0.0;
        while (row >> v) vals.push_back(v);
        if (vals.empty()) {
            throw std::runtime_error("schedule file: empty beta_em row");
        }
        s.beta_em.push_back(std::move(vals));
    }
    s.beta_bp.resize(t);
    for (int i = 0; i < t; ++i) {
        if (!(is >> s.beta_bp[i])) {
            throw std::runtime_error("schedule file: truncated beta_bp");
        }
    }
    s.validate();
    return s;
}

Schedule load_schedule_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open schedule file: " + path);
    }
    return load_schedule(is);
}

SymbolMoments symbol_moments(const BeliefSet& beliefs,
                             const Constellation& cst) {
    SymbolMoments m;
    m.z.resize(beliefs.n);
    m.s.resize(beliefs.n);
    for (int k = 0; k < beliefs.n; ++k) {
        cplx z(0.0, 0.0);
        double s = 0.0;
        for (int i = 0; i < beliefs.order; ++i) {
            const double p = beliefs.prob(k, i);
            z += p * cst.point(i);
            s += p * std::norm(cst.point(i));
        }
        m.z[k] = z;
        m.s[k] = s;
    }
    return m;
}

double sigma2_floor(const std::vector<cplx>& observation) {
    double p = 0.0;
    for (const auto& v : observation) p += std::norm(v);
    return 1e-8 * p / static_cast<double>(observation.size());
}

double raw_sigma2_update(const MatchedStats& stats, const SymbolMoments& mom,
                         const std::vector<cplx>& observation) {
    const int n = stats.block_length();
    const int band = stats.g.bandwidth();

    double bracket = 0.0;
    for (const auto& v : observation) bracket += std::norm(v);
    for (int k = 0; k < n; ++k) {
        bracket -= 2.0 * (stats.x[k] * std::conj(mom.z[k])).real();
        bracket += stats.g.upper(k, 0).real() * mom.s[k];
    }
    for (int d = 1; d <= band; ++d) {
        for (int k = d; k < n; ++k) {
            // pair (k-d, k): 2 Re{ G_{k-d,k} conj(z_{k-d}) z_k }
            bracket += 2.0 *
                       (stats.g.upper(k - d, d) * std::conj(mom.z[k - d]) *
                        mom.z[k])
                           .real();
        }
    }
    const double raw = bracket / static_cast<double>(n);
    return std::max(raw, sigma2_floor(observation));
}

cplx raw_tap_update(int ell, const SymbolMoments& mom,
                    const std::vector<cplx>& observation,
                    const std::vector<cplx>& h_current) {
    const int n = static_cast<int>(mom.z.size());
    const int mem = static_cast<int>(h_current.size()) - 1;
    if (ell < 0 || ell > mem) {
        throw std::invalid_argument("raw_tap_update: tap index out of range");
    }

    cplx numer(0.0, 0.0);
    for (int k = 0; k < n; ++k) {
        numer += observation[k + ell] * std::conj(mom.z[k]);
    }
    for (int k = 0; k <= mem; ++k) {
        if (k == ell) continue;
        cplx corr(0.0, 0.0);
        for (int i = 0; i < n; ++i) {
            const int j = i + ell - k;
            if (j >= 0 && j < n) {
                corr += mom.z[j] * std::conj(mom.z[i]);
            }
        }
        numer -= h_current[k] * corr;
    }

    double denom = 0.0;
    for (double s : mom.s) denom += s;
    if (denom <= 1e-12) {
        throw std::runtime_error("tap update: degenerate symbol energy");
    }
    return numer / denom;
}

double update_sigma2(const BeliefSet& beliefs,
                     const std::vector<cplx>& observation,
                     const ChannelParams& current, const Constellation& cst) {
    const MatchedStats stats = build_matched_stats(current, observation);
    const SymbolMoments mom = symbol_moments(beliefs, cst);
    return raw_sigma2_update(stats, mom, observation);
}

cplx update_tap(int ell, const BeliefSet& beliefs,
                const std::vector<cplx>& observation,
                const ChannelParams& current, const Constellation& cst) {
    const SymbolMoments mom = symbol_moments(beliefs, cst);
    return raw_tap_update(ell, mom, observation, current.h);
}

ChannelParams em_step(int t, const Schedule& schedule,
                      const BeliefSet& beliefs,
                      const std::vector<cplx>& observation,
                      const ChannelParams& current, const Constellation& cst,
                      EmCounters* counters) {
    if (t < 1 || t > schedule.iterations()) {
        throw std::invalid_argument("em_step: t outside 1..T");
    }
    const auto& row = schedule.beta_em[t - 1];
    const int mem = current.memory();
    if (static_cast<int>(row.size()) != mem + 2) {
        throw std::invalid_argument("em_step: schedule width != L+2");
    }

    const bool any_tap = [&] {
        for (int l = 0; l <= mem; ++l) {
            if (row[l] != 0.0) return true;
        }
        return false;
    }();
    const bool want_sigma2 = row[mem + 1] != 0.0;

    ChannelParams next = current;
    if (!any_tap && !want_sigma2) {
        return next;
    }

    const SymbolMoments mom = symbol_moments(beliefs, cst);

    // jacobi semantics: every raw update reads `current`
    std::vector<cplx> raw_taps(mem + 1);
    for (int l = 0; l <= mem; ++l) {
        if (row[l] != 0.0) {
            raw_taps[l] = raw_tap_update(l, mom, observation, current.h);
            if (counters) ++counters->tap_updates;
        }
    }
    double raw_s2 = 0.0;
    if (want_sigma2) {
        const MatchedStats stats = build_matched_stats(current, observation);
        raw_s2 = raw_sigma2_update(stats, mom, observation);
        if (counters) ++counters->sigma2_updates;
    }

    for (int l = 0; l <= mem; ++l) {
        const double b = row[l];
        if (b == 0.0) continue;
        next.h[l] = b == 1.0 ? raw_taps[l]
                             : b * raw_taps[l] + (1.0 - b) * current.h[l];
    }
    if (want_sigma2) {
        const double b = row[mem + 1];
        const double mixed =
            b == 1.0 ? raw_s2 : b * raw_s2 + (1.0 - b) * current.sigma2;
        next.sigma2 = std::max(mixed, sigma2_floor(observation));
    }
    return next;
}

} // namespace embp
