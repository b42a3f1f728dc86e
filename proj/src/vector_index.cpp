#include "spark/vector_index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "spark/error.hpp"

namespace spark {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'P', 'K', 'F', 'L', 'A', 'T', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("index file truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("index file truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

}  // namespace

std::vector<double> normalize(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw DegenerateVectorError("vector has non-finite components");
        sq += x * x;
    }
    double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw DegenerateVectorError("cannot normalize a zero vector");
    std::vector<double> out(v.begin(), v.end());
    for (auto& x : out) x /= norm;
    return out;
}

std::vector<double> normalize(const EmbeddingVector& v) { return normalize(v.values); }

FlatIndex::FlatIndex(FlatIndex&& other) noexcept {
    std::unique_lock lock(other.mutex_);
    dim_ = other.dim_;
    ids_ = std::move(other.ids_);
    pos_ = std::move(other.pos_);
    rows_ = std::move(other.rows_);
}

FlatIndex& FlatIndex::operator=(FlatIndex&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        dim_ = other.dim_;
        ids_ = std::move(other.ids_);
        pos_ = std::move(other.pos_);
        rows_ = std::move(other.rows_);
    }
    return *this;
}

std::vector<float> FlatIndex::quantize(std::span<const double> v) const {
    auto unit = normalize(v);
    return std::vector<float>(unit.begin(), unit.end());
}

void FlatIndex::add(const std::string& chunk_id, const EmbeddingVector& v) {
    add(chunk_id, std::span<const double>(v.values));
}

void FlatIndex::add(const std::string& chunk_id, std::span<const double> v) {
    std::unique_lock lock(mutex_);
    if (v.empty()) throw DimensionError("cannot index an empty vector");
    if (dim_ != 0 && v.size() != dim_)
        throw DimensionError("vector dim " + std::to_string(v.size()) + " does not match index dim " +
                             std::to_string(dim_));
    if (pos_.count(chunk_id)) throw DuplicateError("chunk " + chunk_id + " already indexed");
    auto row = quantize(v);
    dim_ = v.size();
    pos_.emplace(chunk_id, ids_.size());
    ids_.push_back(chunk_id);
    rows_.insert(rows_.end(), row.begin(), row.end());
}

std::vector<ScoredHit> FlatIndex::knn(std::span<const double> query, std::size_t k) const {
    std::shared_lock lock(mutex_);
    if (ids_.empty()) throw EmptyIndexError("knn on an empty index");
    if (query.size() != dim_)
        throw DimensionError("query dim " + std::to_string(query.size()) + " does not match index dim " +
                             std::to_string(dim_));
    auto q = quantize(query);

    std::vector<ScoredHit> hits;
    hits.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        const float* row = rows_.data() + i * dim_;
        double dot = 0.0;
        for (std::size_t d = 0; d < dim_; ++d)
            dot += static_cast<double>(row[d]) * static_cast<double>(q[d]);
        hits.push_back({ids_[i], std::clamp(dot, -1.0, 1.0)});
    }
    auto better = [](const ScoredHit& a, const ScoredHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.chunk_id < b.chunk_id;
    };
    k = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
    hits.resize(k);
    return hits;
}

std::size_t FlatIndex::size() const {
    std::shared_lock lock(mutex_);
    return ids_.size();
}

std::size_t FlatIndex::dim() const {
    std::shared_lock lock(mutex_);
    return dim_;
}

bool FlatIndex::contains(const std::string& chunk_id) const {
    std::shared_lock lock(mutex_);
    return pos_.count(chunk_id) != 0;
}

std::vector<double> FlatIndex::unit_vector(const std::string& chunk_id) const {
    std::shared_lock lock(mutex_);
    auto it = pos_.find(chunk_id);
    if (it == pos_.end()) return {};
    const float* row = rows_.data() + it->second * dim_;
    return std::vector<double>(row, row + dim_);
}

void FlatIndex::save(const std::filesystem::path& path) const {
    std::unique_lock lock(mutex_);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u64(out, ids_.size());
    for (float f : rows_) put_u32(out, std::bit_cast<std::uint32_t>(f));
    for (const auto& id : ids_) {
        put_u32(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) throw UsageError("write failed: " + path.string());
}

FlatIndex FlatIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw FormatError(path.string() + ": not a flat index file (bad magic)");
    auto version = get_u32(in);
    if (version != kFormatVersion)
        throw FormatError(path.string() + ": unsupported index version " + std::to_string(version));
    FlatIndex idx;
    idx.dim_ = get_u32(in);
    auto count = get_u64(in);
    if (count > 0 && idx.dim_ == 0) throw FormatError("index header has zero dim");
    idx.rows_.resize(count * idx.dim_);
    for (auto& f : idx.rows_) f = std::bit_cast<float>(get_u32(in));
    for (std::uint64_t i = 0; i < count; ++i) {
        auto len = get_u32(in);
        std::string id(len, '\0');
        if (!in.read(id.data(), len)) throw FormatError("index id table truncated");
        if (idx.pos_.count(id)) throw FormatError("duplicate id in index file: " + id);
        idx.pos_.emplace(id, idx.ids_.size());
        idx.ids_.push_back(std::move(id));
    }
    return idx;
}

}  // namespace spark
