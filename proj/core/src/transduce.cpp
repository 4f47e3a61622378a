#include "simgraph/transduce.hpp"

#include <algorithm>
#include <set>

#include "simgraph/error.hpp"

namespace simgraph::transduce {

std::string phrase(const graph::RelationTriplet& t) {
    return t.subject + " " + t.relation + " " + t.object;
}

std::string join_phrases(const std::vector<std::string>& phrases) {
    std::string out;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        if (i) out += kPhraseSeparator;
        out += phrases[i];
    }
    return out;
}

Caption s2cap(const graph::SceneGraph& g, std::size_t cap) {
    const graph::SceneGraph pruned = graph::prune_relations(g, cap);
    Caption c;
    c.raw_count = g.relations().size();
    for (const auto& t : graph::order_by_salience(pruned)) c.phrases.push_back(phrase(t));
    c.text = join_phrases(c.phrases);
    return c;
}

PromptPair sg2prompts(const graph::SceneGraph& g, const graph::SceneGraph& g_edited,
                      std::size_t cap) {
    if (cap == 0) throw ValidationError("relation cap must be positive");

    const graph::GraphDelta delta = graph::graph_diff(g, g_edited);
    const std::set<graph::RelationTriplet> background(delta.background.begin(),
                                                      delta.background.end());
    const std::set<graph::RelationTriplet> novel(delta.novel.begin(), delta.novel.end());

    PromptPair p;
    std::set<graph::RelationTriplet> emitted;
    for (const auto& t : graph::order_by_salience(g_edited)) {
        if (!emitted.insert(t).second) continue;
        if (novel.count(t)) {
            p.novel_phrases.push_back(phrase(t));
        } else if (background.count(t)) {
            p.background_phrases.push_back(phrase(t));
        }
    }

    std::vector<std::string> source = p.background_phrases;
    if (source.size() > cap) source.resize(cap);

    std::vector<std::string> target = p.novel_phrases;
    if (target.size() > cap) target.resize(cap);
    for (const auto& ph : p.background_phrases) {
        if (target.size() >= cap) break;
        target.push_back(ph);
    }

    p.source = join_phrases(source);
    p.target = join_phrases(target);
    return p;
}

namespace {

std::string line(std::string_view prefix, const std::string& text) {
    std::string out(prefix);
    if (!text.empty()) out += " " + text;
    return out + "\n";
}

}  // namespace

std::string format_caption_line(const Caption& caption) { return line("CAP:", caption.text); }

std::string format_prompt_lines(const PromptPair& prompts) {
    return line("SRC:", prompts.source) + line("TGT:", prompts.target);
}

}  // namespace simgraph::transduce
