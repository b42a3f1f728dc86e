#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spark/backend.hpp"
#include "spark/corpus.hpp"
#include "spark/filter.hpp"
#include "spark/ideagen.hpp"
#include "spark/mock_backend.hpp"
#include "spark/search.hpp"
#include "spark/xplor.hpp"

namespace spark {

/// Pipeline roles that each get their own backend settings.
enum class Role { embedder, scorer, generator, reviewer, decider, annotator };

inline constexpr Role kAllRoles[] = {Role::embedder,  Role::scorer,  Role::generator,
                                     Role::reviewer, Role::decider, Role::annotator};

std::string to_string(Role role);

struct RoleConfig {
    BackendConfig backend;
    int max_tokens = 1024;

    ChatSettings chat_settings() const {
        return {backend.chat_model, backend.temperature, max_tokens};
    }
};

/// Everything a run depends on. Loaded from a JSON document:
///
///   { "backend": {...},                 // defaults for every role
///     "roles": {"reviewer": {...}, ...}, // per-role overrides
///     "xplor": {...}, "chunking": {...},
///     "reviews_per_idea": 3, "refine_threshold": 0.5, "max_refinements": 2,
///     "search_fixture": "path/to/search.json", "workspace": "path" }
struct PipelineConfig {
    XplorConfig xplor;
    ChunkingConfig chunking;
    FilterConfig filter;
    IdeaGenConfig ideagen;
    std::map<Role, RoleConfig> roles;
    std::filesystem::path workspace = "workspace";
    std::optional<std::filesystem::path> search_fixture;

    PipelineConfig();

    const RoleConfig& role(Role r) const { return roles.at(r); }
    void validate() const;

    static PipelineConfig from_json(const json& j);
    /// Reads the file (if given), then applies SPARK_* environment overrides.
    static PipelineConfig load(const std::optional<std::filesystem::path>& path);

    /// Behaviour-relevant settings only; paths are excluded so the same run in
    /// two workspaces hashes identically.
    json canonical_json() const;
    std::string hash() const;
};

/// Deterministic replay script: scripted chat replies, a search fixture, an
/// embedding dimension and an optional default question.
struct MockScriptFile {
    std::vector<MockEntry> chat;
    json search = json::array();
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    std::optional<std::string> question;

    static MockScriptFile load(const std::filesystem::path& path);
    static MockScriptFile from_json(const json& j);
};

}  // namespace spark
