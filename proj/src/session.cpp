#include "spark/session.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "spark/text.hpp"

namespace spark {

void to_json(json& j, const SessionTurn& t) {
    j = json{{"question", t.question},         {"answer", t.answer},
             {"cited_source_ids", t.cited_source_ids}, {"evidence_id", t.evidence_id},
             {"queries_issued", t.queries_issued}, {"at", t.at}};
}

XplorSession::XplorSession(Xplor& xplor, SessionMode mode, Clock& clock,
                           std::optional<std::filesystem::path> history_path)
    : xplor_(xplor), mode_(mode), clock_(clock), history_path_(std::move(history_path)) {
    if (history_path_) {
        if (history_path_->has_parent_path())
            std::filesystem::create_directories(history_path_->parent_path());
        std::ofstream touch(*history_path_, std::ios::app);
    }
}

SessionTurn XplorSession::ask(const std::string& question) {
    SessionTurn turn;
    turn.question = question;
    EvidenceSet evidence = xplor_.evidence_loop(question);
    turn.evidence_id = evidence.id;
    turn.queries_issued = evidence.queries_issued;
    if (evidence.empty()) {
        turn.answer = kNoEvidenceAnswer;
    } else {
        CitedAnswer a = xplor_.synthesize_answer(question, evidence);
        turn.answer = a.text;
        turn.cited_source_ids = a.cited_source_ids;
    }
    turn.at = format_timestamp(clock_.now());
    history_.push_back(turn);
    if (history_path_) append_jsonl(*history_path_, json(turn));
    return turn;
}

int run_interactive(XplorSession& session, std::istream& in, std::ostream& out) {
    int answered = 0;
    std::string line;
    while (true) {
        out << "> " << std::flush;
        if (!std::getline(in, line)) break;
        std::string q = trim(line);
        if (q.empty()) continue;
        if (q == ":quit") break;
        try {
            out << session.ask(q).answer << "\n\n" << std::flush;
            ++answered;
        } catch (const std::exception& e) {
            out << "error: " << e.what() << "\n\n" << std::flush;
        }
    }
    return answered;
}

int run_autonomous(XplorSession& session, const std::function<std::optional<std::string>()>& next,
                   const std::function<void(const SessionTurn&)>& sink) {
    int answered = 0;
    while (auto q = next()) {
        if (trim(*q).empty()) continue;
        sink(session.ask(trim(*q)));
        ++answered;
    }
    return answered;
}

}  // namespace spark
