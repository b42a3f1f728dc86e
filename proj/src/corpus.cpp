#include "spark/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "spark/error.hpp"

namespace spark {

std::string to_string(SourceKind kind) { return kind == SourceKind::paper ? "paper" : "search"; }

void to_json(json& j, const Document& d) {
    j = json{{"id", d.id},
             {"title", d.title},
             {"source_kind", d.source_kind},
             {"source_locator", d.source_locator},
             {"body", d.body},
             {"retrieved_at", d.retrieved_at},
             {"venue_date", d.venue_date ? json(*d.venue_date) : json(nullptr)}};
}

void from_json(const json& j, Document& d) {
    d.id = j.at("id").get<std::string>();
    d.title = j.value("title", "");
    d.source_kind = j.at("source_kind").get<SourceKind>();
    d.source_locator = j.value("source_locator", "");
    d.body = j.at("body").get<std::string>();
    d.retrieved_at = j.value("retrieved_at", "");
    if (j.contains("venue_date") && !j["venue_date"].is_null())
        d.venue_date = j["venue_date"].get<Date>();
    else
        d.venue_date.reset();
}

bool operator==(const Chunk& a, const Chunk& b) {
    auto same_embedding = [](const auto& x, const auto& y) {
        if (x.has_value() != y.has_value()) return false;
        return !x || (x->values == y->values && x->model_id == y->model_id);
    };
    return a.id == b.id && a.doc_id == b.doc_id && a.ordinal == b.ordinal &&
           a.char_start == b.char_start && a.char_end == b.char_end && a.text == b.text &&
           same_embedding(a.embedding, b.embedding);
}

void to_json(json& j, const Chunk& c) {
    j = json{{"id", c.id},
             {"doc_id", c.doc_id},
             {"ordinal", c.ordinal},
             {"char_start", c.char_start},
             {"char_end", c.char_end},
             {"text", c.text},
             {"embedding", c.embedding ? json(*c.embedding) : json(nullptr)}};
}

void from_json(const json& j, Chunk& c) {
    c.id = j.at("id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.ordinal = j.at("ordinal").get<std::size_t>();
    c.char_start = j.at("char_start").get<std::size_t>();
    c.char_end = j.at("char_end").get<std::size_t>();
    c.text = j.at("text").get<std::string>();
    if (j.contains("embedding") && !j["embedding"].is_null())
        c.embedding = j["embedding"].get<EmbeddingVector>();
    else
        c.embedding.reset();
}

void to_json(json& j, const ChunkingConfig& c) {
    j = json{{"chunk_size", c.chunk_size}, {"overlap", c.overlap}};
}

void from_json(const json& j, ChunkingConfig& c) {
    ChunkingConfig d;
    c.chunk_size = j.value("chunk_size", d.chunk_size);
    c.overlap = j.value("overlap", d.overlap);
}

std::string chunk_id_for(const std::string& doc_id, std::size_t ordinal) {
    return doc_id + "#" + std::to_string(ordinal);
}

std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size,
                                  std::size_t overlap) {
    if (chunk_size == 0) throw UsageError("chunk_size must be positive");
    if (overlap >= chunk_size)
        throw UsageError("overlap (" + std::to_string(overlap) + ") must be smaller than chunk_size (" +
                         std::to_string(chunk_size) + ")");
    const auto bounds = utf8_boundaries(doc.body);
    const std::size_t n = bounds.size() - 1;
    const std::size_t stride = chunk_size - overlap;

    std::vector<Chunk> out;
    for (std::size_t start = 0;; start += stride) {
        std::size_t end = std::min(start + chunk_size, n);
        Chunk c;
        c.doc_id = doc.id;
        c.ordinal = out.size();
        c.id = chunk_id_for(doc.id, c.ordinal);
        c.char_start = start;
        c.char_end = end;
        c.text = doc.body.substr(bounds[start], bounds[end] - bounds[start]);
        out.push_back(std::move(c));
        if (end >= n) break;
    }
    return out;
}

const Document& Corpus::ingest(std::string_view raw_text, std::string title, SourceKind kind,
                               std::string source_locator, Clock& clock,
                               std::optional<Date> venue_date) {
    std::string body = trim(normalize_newlines(raw_text));
    if (body.empty())
        throw IngestionError("document '" + title + "' has no text after normalization");
    Document doc;
    doc.id = next_id(kind);
    doc.title = std::move(title);
    doc.source_kind = kind;
    doc.source_locator = std::move(source_locator);
    doc.body = std::move(body);
    doc.retrieved_at = format_timestamp(clock.now());
    doc.venue_date = venue_date;
    add_document(std::move(doc));
    return documents_.back();
}

std::string Corpus::next_id(SourceKind kind) {
    std::string id;
    do {
        id = to_string(kind) + "_" + std::to_string(++counters_[kind]);
    } while (doc_pos_.count(id) != 0);
    return id;
}

void Corpus::add_document(Document doc) {
    if (doc.body.empty()) throw IngestionError("document " + doc.id + " has an empty body");
    if (doc_pos_.count(doc.id)) throw DuplicateError("duplicate document id " + doc.id);
    // keep the id counter ahead of loaded "<kind>_<n>" ids
    auto prefix = to_string(doc.source_kind) + "_";
    if (doc.id.rfind(prefix, 0) == 0) {
        try {
            std::size_t n = std::stoul(doc.id.substr(prefix.size()));
            auto& counter = counters_[doc.source_kind];
            counter = std::max(counter, n);
        } catch (const std::exception&) {
        }
    }
    doc_pos_[doc.id] = documents_.size();
    documents_.push_back(std::move(doc));
}

void Corpus::add_chunks(std::vector<Chunk> chunks) {
    for (auto& c : chunks) {
        if (!doc_pos_.count(c.doc_id)) throw ValidationError("chunk " + c.id + " has unknown document");
        if (chunks_.count(c.id)) throw DuplicateError("duplicate chunk id " + c.id);
        auto id = c.id;
        chunks_.emplace(std::move(id), std::move(c));
    }
}

const Document* Corpus::find_document(const std::string& id) const {
    auto it = doc_pos_.find(id);
    return it == doc_pos_.end() ? nullptr : &documents_[it->second];
}

const Chunk* Corpus::find_chunk(const std::string& id) const {
    auto it = chunks_.find(id);
    return it == chunks_.end() ? nullptr : &it->second;
}

Chunk* Corpus::find_chunk(const std::string& id) {
    auto it = chunks_.find(id);
    return it == chunks_.end() ? nullptr : &it->second;
}

bool Corpus::has_locator(const std::string& locator) const {
    return std::any_of(documents_.begin(), documents_.end(),
                       [&](const Document& d) { return d.source_locator == locator; });
}

std::vector<Chunk> Corpus::chunks() const {
    std::vector<Chunk> out;
    for (const auto& doc : documents_)
        for (const auto* c : chunks_of(doc.id)) out.push_back(*c);
    return out;
}

std::vector<const Chunk*> Corpus::chunks_of(const std::string& doc_id) const {
    std::vector<const Chunk*> out;
    for (auto it = chunks_.lower_bound(doc_id + "#"); it != chunks_.end(); ++it) {
        if (it->second.doc_id != doc_id) break;
        out.push_back(&it->second);
    }
    std::sort(out.begin(), out.end(),
              [](const Chunk* a, const Chunk* b) { return a->ordinal < b->ordinal; });
    return out;
}

void Corpus::save(const std::filesystem::path& documents_path,
                  const std::filesystem::path& chunks_path) const {
    store_records(documents_path, documents_);
    store_records(chunks_path, chunks());
}

Corpus Corpus::load(const std::filesystem::path& documents_path,
                    const std::filesystem::path& chunks_path) {
    Corpus corpus;
    if (std::filesystem::exists(documents_path))
        for (auto& d : load_records<Document>(documents_path)) corpus.add_document(std::move(d));
    if (std::filesystem::exists(chunks_path))
        corpus.add_chunks(load_records<Chunk>(chunks_path));
    return corpus;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace spark
