#ifndef EMBP_BP_HPP
#define EMBP_BP_HPP

#include <span>
#include <vector>

#include "embp/factors.hpp"
#include "embp/log_domain.hpp"

namespace embp {

/// Per-symbol log beliefs, each row normalized (logsumexp = 0).
struct BeliefSet {
    int n = 0;
    int order = 0;
    std::vector<double> logb;

    static BeliefSet uniform(int n, int order);

    std::span<double> row(int k) {
        return {logb.data() + static_cast<std::size_t>(k) * order,
                static_cast<std::size_t>(order)};
    }
    std::span<const double> row(int k) const {
        return {logb.data() + static_cast<std::size_t>(k) * order,
                static_cast<std::size_t>(order)};
    }

    /// Linear-domain belief b_k(i).
    double prob(int k, int i) const { return std::exp(row(k)[i]); }
};

/// Directed log messages mu_{u->v} for 0 < |u-v| <= band. Rows are
/// normalized log-probability vectors over the destination symbol.
class MessageSet {
  public:
    MessageSet() = default;

    static MessageSet uniform(int n, int band, int order);

    int block_length() const { return n_; }
    int bandwidth() const { return band_; }
    int order() const { return order_; }

    bool edge_valid(int from, int offset) const {
        const int to = from + offset;
        return offset != 0 && offset >= -band_ && offset <= band_ &&
               to >= 0 && to < n_ && from >= 0 && from < n_;
    }

    std::span<double> mu(int from, int offset) {
        return {raw_.data() + index(from, offset),
                static_cast<std::size_t>(order_)};
    }
    std::span<const double> mu(int from, int offset) const {
        return {raw_.data() + index(from, offset),
                static_cast<std::size_t>(order_)};
    }

    std::vector<double>& storage() { return raw_; }
    const std::vector<double>& storage() const { return raw_; }

  private:
    std::size_t index(int from, int offset) const {
        const int slot = offset < 0 ? offset + band_ : band_ + offset - 1;
        return (static_cast<std::size_t>(from) * 2 * band_ + slot) * order_;
    }

    int n_ = 0;
    int band_ = 0;
    int order_ = 0;
    std::vector<double> raw_;
};

/// New messages per the sum-product rule with extrinsic ratio b_u / mu_{v->u}
/// (log-subtraction, floored at kLogFloor), flooding schedule, normalized.
MessageSet message_update(const MessageSet& msgs, const BeliefSet& beliefs,
                          const FactorTables& factors);

/// Beliefs from messages: log b_n = log F_n + sum of incoming, normalized.
BeliefSet beliefs_from(const MessageSet& msgs, const FactorTables& factors);

/// One flooding iteration with message momentum. beta == 1 reproduces the
/// plain update bit-for-bit; beta == 0 leaves the messages untouched. The
/// momentum mixes the normalized linear-domain messages.
std::pair<MessageSet, BeliefSet> bp_iteration(const MessageSet& msgs,
                                              const BeliefSet& beliefs,
                                              const FactorTables& factors,
                                              double beta_bp);

/// T iterations from the uniform state; returns the final beliefs.
BeliefSet run_bp(const MatchedStats& stats, const Constellation& cst, int t,
                 std::span<const double> beta_bp);

/// Convenience: constant momentum weight.
BeliefSet run_bp(const MatchedStats& stats, const Constellation& cst, int t,
                 double beta_bp = 1.0);

/// Per-symbol argmax; ties break toward the lowest constellation index.
std::vector<int> detect(const BeliefSet& beliefs);

} // namespace embp

#endif
