#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spark/backend.hpp"
#include "spark/clock.hpp"
#include "spark/text.hpp"

namespace spark {

enum class SourceKind { paper, search };

NLOHMANN_JSON_SERIALIZE_ENUM(SourceKind, {{SourceKind::paper, "paper"},
                                          {SourceKind::search, "search"}})

std::string to_string(SourceKind kind);

struct Document {
    std::string id;
    std::string title;
    SourceKind source_kind = SourceKind::paper;
    std::string source_locator;
    std::string body;
    std::string retrieved_at;
    std::optional<Date> venue_date;

    bool operator==(const Document&) const = default;
};

void to_json(json& j, const Document& d);
void from_json(const json& j, Document& d);

/// A window of a document body. Offsets count Unicode scalar values.
struct Chunk {
    std::string id;
    std::string doc_id;
    std::size_t ordinal = 0;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::string text;
    std::optional<EmbeddingVector> embedding;
};

bool operator==(const Chunk& a, const Chunk& b);

void to_json(json& j, const Chunk& c);
void from_json(const json& j, Chunk& c);

struct ChunkingConfig {
    std::size_t chunk_size = 1200;
    std::size_t overlap = 200;
};

void to_json(json& j, const ChunkingConfig& c);
void from_json(const json& j, ChunkingConfig& c);

std::string chunk_id_for(const std::string& doc_id, std::size_t ordinal);

/// Splits a body into windows of `chunk_size` scalar values. Window i starts
/// at i * (chunk_size - overlap); the last window may be shorter. Every
/// character is covered. Throws UsageError unless 0 <= overlap < chunk_size.
std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size,
                                  std::size_t overlap);

/// Documents and chunks of one workspace. Ids are "<source_kind>_<n>" and
/// never reused within a corpus.
class Corpus {
public:
    /// Normalizes line endings and trims outer whitespace; throws
    /// IngestionError on empty text.
    const Document& ingest(std::string_view raw_text, std::string title, SourceKind kind,
                           std::string source_locator, Clock& clock,
                           std::optional<Date> venue_date = std::nullopt);

    /// Adds an existing document (e.g. loaded from disk). Duplicate ids throw.
    void add_document(Document doc);
    void add_chunks(std::vector<Chunk> chunks);

    const Document* find_document(const std::string& id) const;
    const Chunk* find_chunk(const std::string& id) const;
    Chunk* find_chunk(const std::string& id);
    bool has_locator(const std::string& locator) const;

    const std::vector<Document>& documents() const { return documents_; }
    std::vector<Chunk> chunks() const;
    std::vector<const Chunk*> chunks_of(const std::string& doc_id) const;

    void save(const std::filesystem::path& documents_path,
              const std::filesystem::path& chunks_path) const;
    static Corpus load(const std::filesystem::path& documents_path,
                       const std::filesystem::path& chunks_path);

private:
    std::string next_id(SourceKind kind);

    std::vector<Document> documents_;
    std::map<std::string, std::size_t> doc_pos_;
    std::map<std::string, Chunk> chunks_;
    std::map<SourceKind, std::size_t> counters_;
};

/// Plain-text file loader used by `ingest`.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace spark
