#include "spark/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>

#include "spark/error.hpp"

namespace spark {

namespace fs = std::filesystem;

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
    for (const char* sub : {"documents", "chunks", "index", "evidence", "ideas", "decisions",
                            "reports", "sessions"})
        fs::create_directories(root_ / sub);
}

Corpus Workspace::load_corpus() const {
    if (!fs::exists(documents_path())) return Corpus{};
    return Corpus::load(documents_path(), chunks_path());
}

void Workspace::save_corpus(const Corpus& corpus) const {
    corpus.save(documents_path(), chunks_path());
}

FlatIndex Workspace::load_index(std::size_t dim) const {
    if (!fs::exists(index_path())) return FlatIndex(dim);
    FlatIndex index = FlatIndex::load(index_path());
    if (index.dim() != dim)
        throw DimensionError("workspace index has dimension " + std::to_string(index.dim()) +
                             ", embedder produces " + std::to_string(dim));
    return index;
}

void Workspace::save_index(const FlatIndex& index) const {
    fs::path tmp = index_path();
    tmp += ".tmp";
    index.save(tmp);
    fs::rename(tmp, index_path());
}

std::string render_report(const json& report) { return report.dump(2) + "\n"; }

fs::path Workspace::save_report(const json& report) const {
    std::string bytes = render_report(report);
    fs::path path = reports_dir() / (sha256_hex(bytes) + ".json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    out << bytes;
    return path;
}

WorkspaceLock::WorkspaceLock(const Workspace& ws) {
    fs::path path = ws.root() / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw UsageError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw UsageError("workspace " + ws.root().string() + " is in use by another process");
    }
}

WorkspaceLock::~WorkspaceLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace spark
