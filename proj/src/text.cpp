#include "spark/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include <openssl/evp.h>

#include "spark/error.hpp"

namespace spark {

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string normalize_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

namespace {

std::size_t utf8_sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;
}

}  // namespace

std::vector<std::size_t> utf8_boundaries(std::string_view s) {
    std::vector<std::size_t> out;
    out.reserve(s.size() + 1);
    std::size_t i = 0;
    while (i < s.size()) {
        out.push_back(i);
        std::size_t len = utf8_sequence_length(static_cast<unsigned char>(s[i]));
        if (i + len > s.size()) len = 1;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
                len = 1;
                break;
            }
        }
        i += len;
    }
    out.push_back(s.size());
    return out;
}

std::size_t utf8_length(std::string_view s) { return utf8_boundaries(s).size() - 1; }

std::string utf8_slice(std::string_view s, std::size_t begin, std::size_t end) {
    auto b = utf8_boundaries(s);
    std::size_t n = b.size() - 1;
    begin = std::min(begin, n);
    end = std::clamp(end, begin, n);
    return std::string(s.substr(b[begin], b[end] - b[begin]));
}

std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& vars) {
    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto name = tmpl.substr(i + 1, close - i - 1);
                auto it = std::find_if(vars.begin(), vars.end(),
                                       [&](const auto& kv) { return kv.first == name; });
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string prefix_of(std::string_view s, std::size_t max_chars) {
    if (s.size() <= max_chars) return std::string(s);
    return utf8_slice(s.substr(0, max_chars + 4), 0, max_chars) + "...";
}

namespace {

// Models often emit literal newlines or tabs inside JSON strings.
std::string escape_raw_controls(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_string = false;
    bool escaped = false;
    for (char c : s) {
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            } else if (c == '\n') {
                out += "\\n";
                continue;
            } else if (c == '\r') {
                out += "\\r";
                continue;
            } else if (c == '\t') {
                out += "\\t";
                continue;
            }
        } else if (c == '"') {
            in_string = true;
        }
        out += c;
    }
    return out;
}

}  // namespace

std::optional<json> extract_json_object(std::string_view text) {
    auto try_parse = [](std::string_view candidate) -> std::optional<json> {
        auto parsed = json::parse(candidate, nullptr, false);
        if (parsed.is_discarded()) parsed = json::parse(escape_raw_controls(candidate), nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
        return parsed;
    };

    std::string trimmed = trim(text);
    if (auto j = try_parse(trimmed)) return j;

    auto fence = trimmed.find("```");
    if (fence != std::string::npos) {
        auto body_start = trimmed.find('\n', fence);
        auto fence_end = body_start == std::string::npos ? std::string::npos
                                                         : trimmed.find("```", body_start);
        if (fence_end != std::string::npos) {
            if (auto j = try_parse(trimmed.substr(body_start, fence_end - body_start))) return j;
        }
    }

    auto open = trimmed.find('{');
    while (open != std::string::npos) {
        auto close = trimmed.rfind('}');
        while (close != std::string::npos && close > open) {
            if (auto j = try_parse(std::string_view(trimmed).substr(open, close - open + 1)))
                return j;
            close = close == 0 ? std::string::npos : trimmed.rfind('}', close - 1);
        }
        open = trimmed.find('{', open + 1);
    }
    return std::nullopt;
}

std::vector<std::string> bracket_tokens(std::string_view text) {
    static const std::regex token(R"(\[([A-Za-z0-9_.:#\-]+)\])");
    std::vector<std::string> out;
    std::string s(text);
    for (std::sregex_iterator it(s.begin(), s.end(), token), end; it != end; ++it)
        out.push_back((*it)[1].str());
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::optional<Date> parse_date(std::string_view s) {
    s = std::string_view(s).substr(0, std::min<std::size_t>(s.size(), 10));
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto digits = [&](std::size_t from, std::size_t n) -> std::optional<int> {
        int v = 0;
        for (std::size_t i = from; i < from + n; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
    if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1 || *d > 31) return std::nullopt;
    return Date{*y, *m, *d};
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

void to_json(json& j, const Date& d) { j = format_date(d); }

void from_json(const json& j, Date& d) {
    auto parsed = parse_date(j.get<std::string>());
    if (!parsed) throw ParseError("invalid date: " + j.dump());
    d = *parsed;
}

std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    for (const auto& row : rows) out << row.dump() << '\n';
    if (!out) throw UsageError("write failed: " + path.string());
    return rows.size();
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded())
            throw ParseError(path.string() + ": malformed record at line " +
                             std::to_string(line_no));
        rows.push_back(std::move(parsed));
    }
    return rows;
}

void append_jsonl(const std::filesystem::path& path, const json& row) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw UsageError("cannot append to " + path.string());
    out << row.dump() << '\n';
    out.flush();
}

}  // namespace spark
