#pragma once

#include <span>
#include <string>
#include <vector>

namespace spark {

struct MmrCandidate {
    std::string chunk_id;
    std::vector<double> unit_vector;
    int relevance = 0;
};

/// Greedy maximal-marginal-relevance selection.
///
/// rel(d) = relevance / scale_max. The first pick maximizes rel(d); each later
/// pick maximizes
///     lambda * rel(d) - (1 - lambda) * max_{s in selected} dot(d, s)
/// over the remaining candidates. Ties go to the smaller chunk_id. Returns
/// min(m, |candidates|) ids. `query_vec` fixes the expected dimension.
std::vector<std::string> mmr_rerank(std::span<const MmrCandidate> candidates,
                                    std::span<const double> query_vec, double lambda,
                                    std::size_t m, int scale_max = 10);

}  // namespace spark
