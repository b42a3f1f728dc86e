#pragma once

#include <cstdint>
#include <filesystem>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spark/backend.hpp"

namespace spark {

struct ScoredHit {
    std::string chunk_id;
    double similarity = 0.0;

    bool operator==(const ScoredHit&) const = default;
};

/// Unit-norm copy of v. Throws DegenerateVectorError on a zero or
/// non-finite vector.
std::vector<double> normalize(std::span<const double> v);
std::vector<double> normalize(const EmbeddingVector& v);

/// Exact cosine nearest-neighbour index. Rows are stored as float32 unit
/// vectors, the same representation the file format uses, so a reloaded
/// index answers queries bit-identically.
///
/// knn takes a shared lock; add and save take an exclusive one.
class FlatIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    FlatIndex() = default;
    /// Pins the dimension before the first insert.
    explicit FlatIndex(std::size_t dim) : dim_(dim) {}

    FlatIndex(FlatIndex&& other) noexcept;
    FlatIndex& operator=(FlatIndex&& other) noexcept;
    FlatIndex(const FlatIndex&) = delete;
    FlatIndex& operator=(const FlatIndex&) = delete;

    void add(const std::string& chunk_id, const EmbeddingVector& v);
    void add(const std::string& chunk_id, std::span<const double> v);

    /// min(k, size) hits by decreasing cosine similarity, ties by ascending id.
    std::vector<ScoredHit> knn(std::span<const double> query, std::size_t k) const;
    std::vector<ScoredHit> knn(const EmbeddingVector& query, std::size_t k) const {
        return knn(query.values, k);
    }

    std::size_t size() const;
    std::size_t dim() const;
    bool contains(const std::string& chunk_id) const;

    /// Stored unit vector widened to double; empty if the id is unknown.
    std::vector<double> unit_vector(const std::string& chunk_id) const;
    const std::vector<std::string>& ids() const { return ids_; }

    void save(const std::filesystem::path& path) const;
    static FlatIndex load(const std::filesystem::path& path);

private:
    std::vector<float> quantize(std::span<const double> v) const;

    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> pos_;
    std::vector<float> rows_;
    mutable std::shared_mutex mutex_;
};

}  // namespace spark
