#include "simgraph/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "simgraph/error.hpp"

namespace simgraph::pipeline {

using graph::SceneGraph;
using nlohmann::json;

namespace {

std::string string_field(const json& op, const char* key) {
    auto it = op.find(key);
    if (it == op.end() || !it->is_string()) {
        throw ValidationError(std::string("edit op is missing string field '") + key + "'");
    }
    return it->get<std::string>();
}

graph::RelationTriplet triplet_field(const json& op) {
    return {string_field(op, "s"), string_field(op, "r"), string_field(op, "o")};
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

EditScript parse_edit_script(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("malformed edit-script JSON", e.byte);
    }
    if (!doc.is_object() || !doc.contains("ops") || !doc["ops"].is_array()) {
        throw ValidationError("edit script must be an object with an 'ops' array");
    }
    EditScript script;
    for (const json& op : doc["ops"]) {
        if (!op.is_object()) throw ValidationError("edit op must be an object");
        const std::string kind = string_field(op, "op");
        if (kind == "replace_entity") {
            script.ops.emplace_back(ReplaceEntity{string_field(op, "from"), string_field(op, "to")});
        } else if (kind == "add_relation") {
            script.ops.emplace_back(AddRelation{triplet_field(op)});
        } else if (kind == "remove_relation") {
            script.ops.emplace_back(RemoveRelation{triplet_field(op)});
        } else if (kind == "add_entity") {
            AddEntity add{string_field(op, "id"), std::nullopt};
            if (auto it = op.find("box"); it != op.end() && !it->is_null()) {
                if (!it->is_array() || it->size() != 4 ||
                    !std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_number(); })) {
                    throw ValidationError("add_entity box must be [x, y, w, h]");
                }
                add.box = graph::EntityBox{(*it)[0].get<double>(), (*it)[1].get<double>(),
                                           (*it)[2].get<double>(), (*it)[3].get<double>()};
            }
            script.ops.emplace_back(std::move(add));
        } else {
            throw ValidationError("unknown edit op '" + kind + "'");
        }
    }
    return script;
}

SceneGraph apply_instruction(const SceneGraph& g, const EditScript& script) {
    SceneGraph out = g;
    for (const EditOp& op : script.ops) {
        std::visit(
            overloaded{
                [&](const ReplaceEntity& r) {
                    graph::Entity* e = out.find_entity(r.from);
                    if (!e) throw NotFoundError("replace_entity: no entity '" + r.from + "'");
                    if (r.to.empty()) throw ValidationError("replace_entity: empty target id");
                    if (r.from == r.to) return;
                    if (out.has_entity(r.to)) {
                        throw CollisionError("replace_entity: entity '" + r.to + "' already exists");
                    }
                    e->id = r.to;
                    for (auto& t : out.mutable_relations()) {
                        if (t.subject == r.from) t.subject = r.to;
                        if (t.object == r.from) t.object = r.to;
                    }
                },
                [&](const AddRelation& a) {
                    for (const std::string& id : {a.triplet.subject, a.triplet.object}) {
                        if (!id.empty() && !out.has_entity(id)) out.add_entity({id, std::nullopt});
                    }
                    out.add_relation(a.triplet);
                },
                [&](const RemoveRelation& r) {
                    auto& rels = out.mutable_relations();
                    auto it = std::find(rels.rbegin(), rels.rend(), r.triplet);
                    if (it == rels.rend()) {
                        throw NotFoundError("remove_relation: no relation (" + r.triplet.subject +
                                            ", " + r.triplet.relation + ", " + r.triplet.object + ")");
                    }
                    rels.erase(std::next(it).base());
                },
                [&](const AddEntity& a) { out.add_entity({a.id, a.box}); },
            },
            op);
    }
    out.validate();
    return out;
}

// -------------------------------------------------------------- file I/O

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading", path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading file", path.string());
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing", path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing file", path.string());
}

SceneGraph JsonFileExtractor::extract(const std::filesystem::path& source) const {
    return graph::parse_scene_graph(read_text_file(source));
}

SceneGraph load_extraction(const std::filesystem::path& path) {
    return JsonFileExtractor{}.extract(path);
}

// --------------------------------------------------------------- dispatch

namespace {

DispatchResult run_generate(const GenerateRequest& req, const Models& models,
                            const DispatchConfig& config) {
    if (!models.generation) {
        throw ConfigurationError("generation requires autoregressive model parameters");
    }
    const GenerationModel& model = *models.generation;
    model.codebook.validate();
    model.params.validate();
    if (model.codebook.size() != model.params.codebook_size()) {
        throw ConfigurationError("codebook size does not match the model");
    }

    DispatchResult result;
    result.caption = transduce::s2cap(req.graph, config.cap);
    const auto e_t = conditioning::encode_text(result.caption->text, model.params.embedding_dim());
    result.tokens = vargen::sample_tokens(e_t, model.params, config.generate.grid,
                                          config.generate.temperature, config.generate.seed);
    result.output = vargen::decode_tokens(*result.tokens, model.codebook);
    return result;
}

DispatchResult run_edit(const EditRequest& req, const Models& models,
                        const DispatchConfig& config) {
    if (!models.denoiser) throw ConfigurationError("editing requires a noise predictor");
    if (req.instruction.ops.empty()) throw ValidationError("edit request has an empty script");

    DispatchResult result;
    for (auto& w : config.edit.warnings()) result.warnings.push_back(std::move(w));

    const SceneGraph edited = apply_instruction(req.graph, req.instruction);
    const graph::GraphDelta delta = graph::graph_diff(req.graph, edited);
    if (delta.novel.empty() && delta.removed.empty()) {
        result.warnings.emplace_back("edit script leaves the relation set unchanged; running a null edit");
    }
    result.prompts = transduce::sg2prompts(req.graph, edited, config.cap);

    const auto c_src = conditioning::encode_text(result.prompts->source, config.embedding_dim);
    const auto c_tgt = conditioning::encode_text(result.prompts->target, config.embedding_dim);
    const auto c_null = conditioning::encode_text("", config.embedding_dim);
    const auto sched = diffedit::build_schedule(config.train_steps, config.edit.steps);
    result.output = diffedit::edit(req.source_latent, c_src, c_tgt, c_null, config.edit, sched,
                                   *models.denoiser);
    return result;
}

}  // namespace

DispatchResult unified_dispatch(const UnifiedRequest& req, const Models& models,
                                const DispatchConfig& config) {
    return std::visit(
        overloaded{
            [&](const GenerateRequest& r) { return run_generate(r, models, config); },
            [&](const EditRequest& r) { return run_edit(r, models, config); },
        },
        req);
}

}  // namespace simgraph::pipeline
