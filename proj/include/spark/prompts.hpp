#pragma once

#include <string>
#include <string_view>

// Prompt templates. Placeholders use `{name}` and are filled by
// render_template(); literal JSON braces pass through untouched.
namespace spark::prompts {

inline constexpr std::string_view kVersion = "spark-prompts/v1";

// ---- xplor ----

inline constexpr std::string_view kRelevanceSystem =
    "You are a research assistant. You judge how relevant a text chunk is to a research "
    "question and answer in JSON.";

inline constexpr std::string_view kRelevanceUser =
    "Given question & chunk:\n"
    "1) Summarize chunk relevance.\n"
    "2) Rate relevance (0-{scale_max}).\n"
    "\n"
    "Question: {question}\n"
    "Chunk: {chunk}\n"
    "\n"
    "Output JSON: { \"summary\": \"...\", \"relevance\": 0-{scale_max} }";

inline constexpr std::string_view kJsonRepair = "\n\nReturn only valid JSON.";

inline constexpr std::string_view kFollowupSystem =
    "You are a research assistant who writes precise literature search queries.";

inline constexpr std::string_view kFollowupUser =
    "Original Question: {question}\n"
    "Context Summaries:\n"
    "{summaries}\n"
    "\n"
    "Generate specific follow-up query.\n"
    "Output query text only.";

inline constexpr std::string_view kFollowupDifferent =
    "\nThe query must be different from each of these earlier queries:\n{issued}";

inline constexpr std::string_view kSynthesisSystem =
    "You are a research assistant who answers strictly from the supplied context.";

inline constexpr std::string_view kSynthesisUser =
    "Context:\n"
    "{context}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "TASK: Answer using ONLY context. Cite [source_name]. List Sources at end.";

// ---- idea generation ----

inline constexpr std::string_view kConceptSystem =
    "You are a scientific analyst. You extract key concepts and open research problems from "
    "literature evidence and answer in JSON.";

inline constexpr std::string_view kConceptUser =
    "Question: {question}\n"
    "Evidence:\n"
    "{context}\n"
    "\n"
    "Identify the key concepts (short labels) and the open research problems in this evidence. "
    "Every open problem must cite at least one source as [source_id].\n"
    "Output JSON: { \"concepts\": [\"...\"], \"open_problems\": [\"... [source_id]\"], "
    "\"domain\": \"...\" }";

inline constexpr std::string_view kIdeaSystem =
    "You are a creative research scientist who proposes well-motivated research ideas.";

inline constexpr std::string_view kIdeaUser =
    "Generate a novel research idea with step-by-step reasoning based on the provided input. "
    "Output must follow the following template.\n"
    "\n"
    "Problem: {problem}\n"
    "Concepts: {concepts}\n"
    "{domain_line}"
    "\n"
    "Template (JSON): { \"input_concepts\": [\"...\"], \"new_concepts\": [\"...\"], "
    "\"plan\": \"...\", \"title\": \"...\", \"abstract\": \"...\" }\n"
    "input_concepts must be taken from the Concepts list.";

inline constexpr std::string_view kIdeaRefinement =
    "\n\nPrevious idea:\n"
    "Title: {title}\n"
    "Abstract: {abstract}\n"
    "Reviewer decision: {decision} (utility {utility})\n"
    "Critique to address: {reasoning}\n"
    "Additional evidence:\n"
    "{context}";

// ---- filter ----

inline constexpr std::string_view kReviewSystem =
    "You are reviewer {index} of {count} on a scientific program committee. {persona}";

inline constexpr std::string_view kReviewUser =
    "Review this research idea. Discuss its strengths, limitations, and areas for "
    "improvement.\n"
    "\n"
    "Title: {title}\n"
    "Abstract: {abstract}";

inline constexpr std::string_view kDecisionSystem =
    "You are an area chair. You integrate reviews into a final decision and answer in JSON.";

inline constexpr std::string_view kDecisionUser =
    "Generate your decision based on the provided input Idea and Reviews.\n"
    "\n"
    "Title: {title}\n"
    "Abstract: {abstract}\n"
    "Reviews:\n"
    "{reviews}\n"
    "\n"
    "Output must follow the following template: { \"Decision reasoning\": \"...\", "
    "\"Decision\": \"ACCEPT\" or \"REJECT\", \"Utility\": float between 0 and 1 }";

/// Persona line for reviewer `index` (1-based); cycles through a fixed list.
std::string reviewer_persona(int index);

// ---- judge dataset annotation ----

inline constexpr std::string_view kAnnotatorSystem =
    "You rewrite scientific text so that only the underlying idea remains.";

inline constexpr std::string_view kIdeaAbstractUser =
    "Rewrite the following paper abstract as an idea abstract. Keep the core problem "
    "statement, the proposed approach, and the claimed novelty. Omit specific results, "
    "implementation details, and performance metrics. Output the rewritten abstract only.\n"
    "\n"
    "Abstract:\n"
    "{text}";

inline constexpr std::string_view kIdeaReviewUser =
    "Rewrite the following peer review as an idea review: a critique of the conceptual "
    "merit only (problem, approach, novelty). Remove every reference to experiments, "
    "tables, figures, scores, and empirical outcomes. Output the rewritten review only.\n"
    "\n"
    "Review:\n"
    "{text}";

inline constexpr std::string_view kRegenerate =
    "\n\nYour previous rewrite still reported results. Remove all numbers tied to results, "
    "percentages, and comparisons with other methods.";

// System prompts for the four Judge training tasks.
inline constexpr std::string_view kTaskOrigReview =
    "Task: original review prediction. Read the paper abstract and write the peer review it "
    "received.";
inline constexpr std::string_view kTaskIdeaReview =
    "Task: idea review prediction. Read the idea abstract and write a critique of its "
    "conceptual merit.";
inline constexpr std::string_view kTaskOrigAbstract =
    "Task: original abstract generation. Read the peer review and write the paper abstract "
    "it reviews.";
inline constexpr std::string_view kTaskIdeaAbstract =
    "Task: idea abstract generation. Read the idea review and write the idea abstract it "
    "critiques.";

}  // namespace spark::prompts
