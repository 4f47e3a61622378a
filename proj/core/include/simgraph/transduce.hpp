#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "simgraph/graph.hpp"

namespace simgraph::transduce {

inline constexpr std::string_view kPhraseSeparator = ", ";

struct Caption {
    std::vector<std::string> phrases;
    std::string text;
    std::size_t raw_count = 0;  // triplets before pruning
};

struct PromptPair {
    std::string source;
    std::string target;
    std::vector<std::string> background_phrases;
    std::vector<std::string> novel_phrases;
};

/// "subject relation object" with labels emitted verbatim.
std::string phrase(const graph::RelationTriplet& t);

std::string join_phrases(const std::vector<std::string>& phrases);

Caption s2cap(const graph::SceneGraph& g, std::size_t cap = graph::kDefaultRelationCap);

/// Source prompt carries the relations both graphs share; target lists the
/// novel relations first, then the shared ones. Both groups are ordered by
/// salience in the edited graph, and each prompt holds at most `cap` phrases.
PromptPair sg2prompts(const graph::SceneGraph& g, const graph::SceneGraph& g_edited,
                      std::size_t cap = graph::kDefaultRelationCap);

// Plain-text lines consumed by the CLI and its golden files.
std::string format_caption_line(const Caption& caption);
std::string format_prompt_lines(const PromptPair& prompts);

}  // namespace simgraph::transduce
