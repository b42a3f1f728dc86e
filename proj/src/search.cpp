#include "spark/search.hpp"

#include <algorithm>

namespace spark {

void from_json(const json& j, SearchResult& r) {
    r.title = j.value("title", "");
    r.locator = j.at("locator").get<std::string>();
    r.body = j.at("body").get<std::string>();
    if (j.contains("venue_date") && !j["venue_date"].is_null())
        r.venue_date = j["venue_date"].get<Date>();
}

void to_json(json& j, const SearchResult& r) {
    j = json{{"title", r.title}, {"locator", r.locator}, {"body", r.body}};
    if (r.venue_date) j["venue_date"] = *r.venue_date;
}

FixtureSearchClient FixtureSearchClient::from_json(const json& j) {
    std::vector<Entry> entries;
    for (const auto& item : j) {
        Entry e;
        const auto& c = item.at("contains");
        e.contains = c.is_string() ? std::vector<std::string>{c.get<std::string>()}
                                   : c.get<std::vector<std::string>>();
        e.results = item.at("results").get<std::vector<SearchResult>>();
        entries.push_back(std::move(e));
    }
    return FixtureSearchClient(std::move(entries));
}

std::vector<SearchResult> FixtureSearchClient::search(const std::string& query) {
    for (const auto& e : entries_) {
        bool all = std::all_of(e.contains.begin(), e.contains.end(),
                               [&](const std::string& s) { return contains_icase(query, s); });
        if (all) return e.results;
    }
    return {};
}

}  // namespace spark
