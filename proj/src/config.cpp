#include "spark/config.hpp"

#include <cstdlib>
#include <fstream>

#include "spark/error.hpp"
#include "spark/prompts.hpp"

namespace spark {

std::string to_string(Role role) {
    switch (role) {
        case Role::embedder: return "embedder";
        case Role::scorer: return "scorer";
        case Role::generator: return "generator";
        case Role::reviewer: return "reviewer";
        case Role::decider: return "decider";
        case Role::annotator: return "annotator";
    }
    return "unknown";
}

PipelineConfig::PipelineConfig() {
    for (Role r : kAllRoles) roles[r] = RoleConfig{};
}

void PipelineConfig::validate() const {
    xplor.validate();
    ideagen.validate();
    if (filter.reviews_per_idea < 1) throw UsageError("reviews_per_idea must be >= 1");
    if (chunking.chunk_size == 0 || chunking.overlap >= chunking.chunk_size)
        throw UsageError("chunking requires 0 <= overlap < chunk_size");
    for (const auto& [role, rc] : roles) {
        rc.backend.validate();
        if (rc.max_tokens < 1) throw UsageError(to_string(role) + ": max_tokens must be >= 1");
    }
}

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError(path.string() + " is not valid JSON");
    return j;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    try {
        json base = j.value("backend", json::object());
        for (Role r : kAllRoles) {
            json merged = base;
            int max_tokens = base.value("max_tokens", 1024);
            if (j.contains("roles") && j["roles"].contains(to_string(r))) {
                const auto& over = j["roles"][to_string(r)];
                merged.update(over);
                max_tokens = over.value("max_tokens", max_tokens);
            }
            c.roles[r] = RoleConfig{merged.get<BackendConfig>(), max_tokens};
        }
        if (j.contains("xplor")) c.xplor = j["xplor"].get<XplorConfig>();
        if (j.contains("chunking")) c.chunking = j["chunking"].get<ChunkingConfig>();
        c.filter.reviews_per_idea = j.value("reviews_per_idea", c.filter.reviews_per_idea);
        c.ideagen.refine_threshold = j.value("refine_threshold", c.ideagen.refine_threshold);
        c.ideagen.max_refinements = j.value("max_refinements", c.ideagen.max_refinements);
        if (j.contains("workspace")) c.workspace = j["workspace"].get<std::string>();
        if (j.contains("search_fixture") && !j["search_fixture"].is_null())
            c.search_fixture = j["search_fixture"].get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::optional<std::filesystem::path>& path) {
    json j = path ? read_json_file(*path) : json::object();
    if (path && !j.is_object()) throw ParseError(path->string() + ": config must be a JSON object");

    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    auto& base = j["backend"];
    if (base.is_null()) base = json::object();
    if (auto v = env("SPARK_BASE_URL")) base["base_url"] = *v;
    if (auto v = env("SPARK_CHAT_MODEL")) base["chat_model"] = *v;
    if (auto v = env("SPARK_EMBEDDING_MODEL")) base["embedding_model"] = *v;
    if (auto v = env("SPARK_EMBEDDING_DIM")) {
        try {
            base["embedding_dim"] = std::stoul(*v);
        } catch (const std::exception&) {
            throw UsageError("SPARK_EMBEDDING_DIM is not a number: " + *v);
        }
    }
    if (auto v = env("SPARK_WORKSPACE")) j["workspace"] = *v;
    return from_json(j);
}

json PipelineConfig::canonical_json() const {
    json roles_json = json::object();
    for (const auto& [role, rc] : roles) {
        json b = rc.backend;
        b["max_tokens"] = rc.max_tokens;
        roles_json[to_string(role)] = b;
    }
    return json{{"xplor", xplor},
                {"chunking", chunking},
                {"reviews_per_idea", filter.reviews_per_idea},
                {"refine_threshold", ideagen.refine_threshold},
                {"max_refinements", ideagen.max_refinements},
                {"roles", roles_json},
                {"prompts", std::string(prompts::kVersion)}};
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical_json().dump()); }

MockScriptFile MockScriptFile::from_json(const json& j) {
    MockScriptFile m;
    try {
        if (j.contains("chat")) m.chat = j["chat"].get<std::vector<MockEntry>>();
        if (j.contains("search")) m.search = j["search"];
        m.embedding_dim = j.value("embedding_dim", m.embedding_dim);
        if (j.contains("question") && j["question"].is_string())
            m.question = j["question"].get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid mock script: ") + e.what());
    }
    return m;
}

MockScriptFile MockScriptFile::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

}  // namespace spark
