#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spark/clock.hpp"
#include "spark/xplor.hpp"

namespace spark {

enum class SessionMode { interactive, autonomous };

struct SessionTurn {
    std::string question;
    std::string answer;
    std::vector<std::string> cited_source_ids;
    std::string evidence_id;
    std::vector<std::string> queries_issued;
    std::string at;
};

void to_json(json& j, const SessionTurn& t);

/// Question/answer exchanges over one Xplor instance. Each session keeps its
/// own history; when a history file is given every turn is appended and
/// flushed as it completes.
class XplorSession {
public:
    XplorSession(Xplor& xplor, SessionMode mode, Clock& clock,
                 std::optional<std::filesystem::path> history_path = std::nullopt);

    SessionMode mode() const { return mode_; }
    const std::vector<SessionTurn>& history() const { return history_; }

    /// Runs the evidence loop and answers with citations. With no evidence the
    /// answer says so and no synthesis request is made.
    SessionTurn ask(const std::string& question);

private:
    Xplor& xplor_;
    SessionMode mode_;
    Clock& clock_;
    std::optional<std::filesystem::path> history_path_;
    std::vector<SessionTurn> history_;
};

inline constexpr const char* kNoEvidenceAnswer =
    "No relevant evidence was found for this question.";

/// Terminal loop: prompts, answers, repeats. Blank lines re-prompt, ":quit"
/// or end of input leaves. Errors are printed and the loop continues.
/// Returns the number of answered questions.
int run_interactive(XplorSession& session, std::istream& in, std::ostream& out);

/// Feeds questions from `next` until it returns nullopt, handing each turn to
/// `sink`.
int run_autonomous(XplorSession& session, const std::function<std::optional<std::string>()>& next,
                   const std::function<void(const SessionTurn&)>& sink);

}  // namespace spark
