#include "spark/prompts.hpp"

#include <array>

namespace spark::prompts {

namespace {

constexpr std::array<std::string_view, 5> kPersonas{
    "Focus on novelty relative to prior work.",
    "Focus on methodological soundness and feasibility.",
    "Focus on significance, potential impact, and clarity of motivation.",
    "Focus on hidden assumptions and likely failure modes.",
    "Focus on how the idea could be evaluated and what would falsify it.",
};

}  // namespace

std::string reviewer_persona(int index) {
    if (index < 1) index = 1;
    return std::string(kPersonas[static_cast<std::size_t>(index - 1) % kPersonas.size()]);
}

}  // namespace spark::prompts
