#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spark/text.hpp"

namespace spark {

struct SearchResult {
    std::string title;
    std::string locator;
    std::string body;
    std::optional<Date> venue_date;
};

void from_json(const json& j, SearchResult& r);
void to_json(json& j, const SearchResult& r);

/// A programmable literature search engine. Implementations throw on
/// transport failure; callers decide whether that is fatal.
class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::vector<SearchResult> search(const std::string& query) = 0;
};

/// Fixture-backed search: the first entry whose every `contains` string occurs
/// in the query (case-insensitive) supplies the results. No match yields no
/// results.
class FixtureSearchClient : public SearchClient {
public:
    struct Entry {
        std::vector<std::string> contains;
        std::vector<SearchResult> results;
    };

    FixtureSearchClient() = default;
    explicit FixtureSearchClient(std::vector<Entry> entries) : entries_(std::move(entries)) {}

    /// Accepts `[{"contains": "..." | [...], "results": [...]}, ...]`.
    static FixtureSearchClient from_json(const json& j);

    std::vector<SearchResult> search(const std::string& query) override;

private:
    std::vector<Entry> entries_;
};

}  // namespace spark
