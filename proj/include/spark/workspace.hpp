#pragma once

#include <filesystem>
#include <string>

#include "spark/corpus.hpp"
#include "spark/text.hpp"
#include "spark/vector_index.hpp"

namespace spark {

/// On-disk layout of one workspace:
///
///   documents/documents.jsonl  chunks/chunks.jsonl  index/index.bin
///   evidence/evidence.jsonl    ideas/ideas.jsonl    decisions/decisions.jsonl
///   reports/<sha256>.json      sessions/<id>.jsonl
class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path documents_path() const { return root_ / "documents" / "documents.jsonl"; }
    std::filesystem::path chunks_path() const { return root_ / "chunks" / "chunks.jsonl"; }
    std::filesystem::path index_path() const { return root_ / "index" / "index.bin"; }
    std::filesystem::path evidence_path() const { return root_ / "evidence" / "evidence.jsonl"; }
    std::filesystem::path ideas_path() const { return root_ / "ideas" / "ideas.jsonl"; }
    std::filesystem::path decisions_path() const { return root_ / "decisions" / "decisions.jsonl"; }
    std::filesystem::path reports_dir() const { return root_ / "reports"; }
    std::filesystem::path sessions_dir() const { return root_ / "sessions"; }

    Corpus load_corpus() const;
    void save_corpus(const Corpus& corpus) const;

    /// The saved index, or an empty one of dimension `dim` if none exists.
    /// Throws DimensionError if the saved index has another dimension.
    FlatIndex load_index(std::size_t dim) const;
    void save_index(const FlatIndex& index) const;

    /// Writes `report` (pretty-printed, trailing newline) to
    /// reports/<sha256 of the bytes>.json and returns the path.
    std::filesystem::path save_report(const json& report) const;

private:
    std::filesystem::path root_;
};

/// Exclusive lock on a workspace, held for the lifetime of the object.
/// Throws UsageError if another process holds it.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const Workspace& ws);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    int fd_ = -1;
};

std::string render_report(const json& report);

}  // namespace spark
