#include "spark/mmr.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "spark/error.hpp"

namespace spark {

std::vector<std::string> mmr_rerank(std::span<const MmrCandidate> candidates,
                                    std::span<const double> query_vec, double lambda,
                                    std::size_t m, int scale_max) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw UsageError("mmr lambda must be in [0, 1], got " + std::to_string(lambda));
    if (scale_max <= 0) throw UsageError("relevance scale_max must be positive");
    if (candidates.empty() || m == 0) return {};
    std::set<std::string> seen;
    for (const auto& c : candidates) {
        if (!seen.insert(c.chunk_id).second)
            throw UsageError("duplicate mmr candidate " + c.chunk_id);
        if (c.unit_vector.size() != query_vec.size())
            throw DimensionError("mmr candidate " + c.chunk_id + " has dim " +
                                 std::to_string(c.unit_vector.size()) + ", query has " +
                                 std::to_string(query_vec.size()));
    }

    const std::size_t n = candidates.size();
    const std::size_t take = std::min(m, n);
    std::vector<double> rel(n);
    for (std::size_t i = 0; i < n; ++i)
        rel[i] = static_cast<double>(candidates[i].relevance) / static_cast<double>(scale_max);

    // max similarity of each remaining candidate to the selected set
    std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);
    std::vector<std::string> out;
    out.reserve(take);

    auto dot = [&](std::size_t a, std::size_t b) {
        const auto& x = candidates[a].unit_vector;
        const auto& y = candidates[b].unit_vector;
        double s = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) s += x[d] * y[d];
        return s;
    };

    while (out.size() < take) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            double score = out.empty() ? rel[i] : lambda * rel[i] - (1.0 - lambda) * max_sim[i];
            if (best == n || score > best_score ||
                (score == best_score && candidates[i].chunk_id < candidates[best].chunk_id)) {
                best = i;
                best_score = score;
            }
        }
        taken[best] = true;
        out.push_back(candidates[best].chunk_id);
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i]) max_sim[i] = std::max(max_sim[i], dot(i, best));
    }
    return out;
}

}  // namespace spark
