#include "rbpsc/marginals.hpp"

#include <sstream>
#include <stdexcept>

namespace rbpsc {

std::string to_string(const MarginalKey& key) {
    std::ostringstream out;
    out << "rho[i=" << key.agent + 1 << "|" << (key.anchor == Anchor::origin ? "o" : "d")
        << "|x=" << key.site_state + 1 << "|s=" << key.from_site + 1
        << "|a=" << key.to_site + 1 << "]";
    return out.str();
}

namespace {
std::vector<int> counts_of(const ProblemInstance& inst) {
    std::vector<int> counts;
    for (const auto& site : inst.sites) counts.push_back(site.state_count);
    return counts;
}
} // namespace

MarginalIndex::MarginalIndex(const ProblemInstance& inst) : MarginalIndex(counts_of(inst)) {}

MarginalIndex::MarginalIndex(std::vector<int> state_counts)
    : n_(static_cast<int>(state_counts.size())), state_counts_(std::move(state_counts)) {
    block_start_.assign(static_cast<std::size_t>(n_) * n_ * n_ * 2, -1);
    for (int i = 0; i < n_; ++i) {
        for (int s = 0; s < n_; ++s) {
            for (int a = 0; a < n_; ++a) {
                for (Anchor anchor : {Anchor::origin, Anchor::destination}) {
                    const std::size_t slot =
                        ((static_cast<std::size_t>(i) * n_ + s) * n_ + a) * 2 +
                        (anchor == Anchor::origin ? 0 : 1);
                    if (s == a && anchor == Anchor::destination) {
                        block_start_[slot] = block_start_[slot - 1];
                        continue;
                    }
                    block_start_[slot] = size();
                    const int site = anchor == Anchor::origin ? s : a;
                    for (int x = 0; x < state_counts_[site]; ++x)
                        keys_.push_back({i, anchor, x, s, a});
                }
            }
        }
    }
}

int MarginalIndex::block(int agent, int from_site, int to_site, Anchor anchor) const {
    const std::size_t slot =
        ((static_cast<std::size_t>(agent) * n_ + from_site) * n_ + to_site) * 2 +
        (anchor == Anchor::origin ? 0 : 1);
    return block_start_[slot];
}

int MarginalIndex::index(const MarginalKey& key) const {
    if (key.agent < 0 || key.agent >= n_ || key.from_site < 0 || key.from_site >= n_ ||
        key.to_site < 0 || key.to_site >= n_)
        throw std::out_of_range("marginal key outside the instance: " + to_string(key));
    const int site = key.anchored_site();
    if (key.site_state < 0 || key.site_state >= state_counts_[site])
        throw std::out_of_range("site state outside the anchored site: " + to_string(key));
    return block(key.agent, key.from_site, key.to_site, key.anchor) + key.site_state;
}

} // namespace rbpsc
