#include "embp/constellation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace embp {

Constellation::Constellation(std::vector<cplx> points)
    : points_(std::move(points)) {
    if (points_.size() < 2) {
        throw std::invalid_argument("constellation needs at least 2 points");
    }
    bits_ = std::log2(static_cast<double>(points_.size()));
    double e = 0.0;
    for (const auto& p : points_) {
        e += std::norm(p);
    }
    mean_energy_ = e / static_cast<double>(points_.size());
}

Constellation Constellation::bpsk() {
    return Constellation({cplx(1.0, 0.0), cplx(-1.0, 0.0)});
}

Constellation Constellation::psk(int order) {
    if (order < 2) {
        throw std::invalid_argument("psk order must be >= 2");
    }
    std::vector<cplx> pts(order);
    for (int i = 0; i < order; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / order;
        pts[i] = cplx(std::cos(phi), std::sin(phi));
    }
    return Constellation(std::move(pts));
}

Constellation Constellation::by_name(const std::string& name) {
    if (name == "bpsk") return bpsk();
    if (name == "qpsk") return psk(4);
    if (name == "8psk") return psk(8);
    throw std::invalid_argument("unknown constellation: " + name);
}

int Constellation::nearest(cplx z) const {
    int best = 0;
    double best_d = std::norm(z - points_[0]);
    for (int i = 1; i < size(); ++i) {
        const double d = std::norm(z - points_[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<int> Constellation::negation_map() const {
    std::vector<int> map(points_.size());
    for (int i = 0; i < size(); ++i) {
        const int j = nearest(-points_[i]);
        if (std::norm(-points_[i] - points_[j]) > 1e-18) {
            return {};
        }
        map[i] = j;
    }
    return map;
}

std::vector<int> sample_symbols(const Constellation& cst, int n, Rng& rng) {
    std::vector<int> s(n);
    for (auto& v : s) {
        v = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(cst.size())));
    }
    return s;
}

} // namespace embp
