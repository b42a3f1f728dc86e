#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spark/error.hpp"

namespace spark {

using json = nlohmann::json;

// ---- strings ----

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Converts "\r\n" and lone "\r" to "\n".
std::string normalize_newlines(std::string_view s);

/// Byte offset of every Unicode scalar value in a UTF-8 string, plus a
/// trailing entry equal to s.size(). Invalid bytes count as one scalar each.
std::vector<std::size_t> utf8_boundaries(std::string_view s);

std::size_t utf8_length(std::string_view s);

/// Scalar-value slice [begin, end) of a UTF-8 string.
std::string utf8_slice(std::string_view s, std::size_t begin, std::size_t end);

/// Renders a template with `{name}` placeholders. Unknown placeholders are
/// left untouched.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& vars);

/// First `max_chars` bytes of s, for log and error messages.
std::string prefix_of(std::string_view s, std::size_t max_chars = 80);

// ---- model output ----

/// Pulls a JSON object out of model text: accepts a bare object, an object
/// inside a ``` fence, or an object surrounded by prose. Returns nullopt when
/// nothing parses to an object.
std::optional<json> extract_json_object(std::string_view text);

/// Bracketed citation tokens, e.g. "[paper_1]", in order of appearance.
std::vector<std::string> bracket_tokens(std::string_view text);

// ---- digests ----

std::string sha256_hex(std::string_view data);

// ---- dates ----

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
};

/// Parses "YYYY-MM-DD", also accepting a longer ISO timestamp prefix.
std::optional<Date> parse_date(std::string_view s);
std::string format_date(const Date& d);

void to_json(json& j, const Date& d);
void from_json(const json& j, Date& d);

// ---- line-delimited JSON ----

/// Writes one compact JSON document per line. Returns the record count.
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

/// Reads line-delimited JSON. A malformed line raises ParseError naming its
/// 1-based line number. Blank lines are skipped.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Appends a single row and flushes.
void append_jsonl(const std::filesystem::path& path, const json& row);

template <typename T>
std::size_t store_records(const std::filesystem::path& path, const std::vector<T>& records) {
    std::vector<json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.emplace_back(r);
    return write_jsonl(path, rows);
}

template <typename T>
std::vector<T> load_records(const std::filesystem::path& path) {
    std::vector<T> out;
    auto rows = read_jsonl(path);
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            out.push_back(rows[i].template get<T>());
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": record " + std::to_string(i + 1) + ": " +
                             e.what());
        }
    }
    return out;
}

}  // namespace spark
