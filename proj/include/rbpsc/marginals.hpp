#pragma once

#include <string>
#include <vector>

#include "rbpsc/instance.hpp"

namespace rbpsc {

/// Which endpoint of the move the site state refers to.
enum class Anchor { origin, destination };

/// Frequency with which agent `agent` moves from `from_site` to `to_site`
/// while the anchored site is in `site_state`. Keys with from_site ==
/// to_site describe a single quantity and are stored with Anchor::origin.
struct MarginalKey {
    int agent = 0;
    Anchor anchor = Anchor::origin;
    int site_state = 0;
    int from_site = 0;
    int to_site = 0;

    int anchored_site() const { return anchor == Anchor::origin ? from_site : to_site; }
    bool stays() const { return from_site == to_site; }
    friend bool operator==(const MarginalKey&, const MarginalKey&) = default;
};

std::string to_string(const MarginalKey& key);

/// Dense numbering of the marginal variables. Ordered by agent, origin
/// site, destination site, then anchor (origin first) and site state.
class MarginalIndex {
public:
    explicit MarginalIndex(std::vector<int> state_counts);
    explicit MarginalIndex(const ProblemInstance& inst);

    int size() const { return static_cast<int>(keys_.size()); }
    int n_sites() const { return n_; }
    const std::vector<int>& state_counts() const { return state_counts_; }

    /// Canonicalizes keys with from_site == to_site. Throws std::out_of_range
    /// for keys outside the instance.
    int index(const MarginalKey& key) const;
    int index(int agent, Anchor anchor, int site_state, int from_site, int to_site) const {
        return index(MarginalKey{agent, anchor, site_state, from_site, to_site});
    }
    const MarginalKey& key(int idx) const { return keys_.at(idx); }
    const std::vector<MarginalKey>& keys() const { return keys_; }

private:
    int block(int agent, int from_site, int to_site, Anchor anchor) const;

    int n_;
    std::vector<int> state_counts_;
    std::vector<int> block_start_; // per (agent, from, to, anchor)
    std::vector<MarginalKey> keys_;
};

/// Values of every marginal variable, aligned with a MarginalIndex.
using MarginalVector = std::vector<double>;

} // namespace rbpsc
