#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "simgraph/diffedit.hpp"
#include "simgraph/graph.hpp"
#include "simgraph/transduce.hpp"
#include "simgraph/vargen.hpp"

namespace simgraph::pipeline {

// ------------------------------------------------------------ edit scripts

struct ReplaceEntity {
    std::string from;
    std::string to;
};

struct AddRelation {
    graph::RelationTriplet triplet;
};

struct RemoveRelation {
    graph::RelationTriplet triplet;
};

struct AddEntity {
    std::string id;
    std::optional<graph::EntityBox> box;
};

using EditOp = std::variant<ReplaceEntity, AddRelation, RemoveRelation, AddEntity>;

struct EditScript {
    std::vector<EditOp> ops;
};

/// `{"ops":[{"op":"replace_entity","from":"bear","to":"wolf"}, ...]}`
EditScript parse_edit_script(std::string_view text);

/// Applies ops in order.
///  - replace_entity renames an entity everywhere, keeping its box.
///  - add_relation appends, declaring unknown endpoints without a box.
///  - remove_relation deletes the last matching triplet.
///  - add_entity declares a new entity.
graph::SceneGraph apply_instruction(const graph::SceneGraph& g, const EditScript& script);

// -------------------------------------------------------------- extraction

/// Source of scene graphs for an input image. Only the JSON-file adapter
/// ships; a multimodal-model client would implement the same interface.
class ExtractionAdapter {
public:
    virtual ~ExtractionAdapter() = default;
    virtual graph::SceneGraph extract(const std::filesystem::path& source) const = 0;
};

class JsonFileExtractor final : public ExtractionAdapter {
public:
    graph::SceneGraph extract(const std::filesystem::path& source) const override;
};

graph::SceneGraph load_extraction(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// ---------------------------------------------------------------- dispatch

struct GenerateRequest {
    graph::SceneGraph graph;
};

struct EditRequest {
    diffedit::LatentTensor source_latent;
    graph::SceneGraph graph;
    EditScript instruction;
};

using UnifiedRequest = std::variant<GenerateRequest, EditRequest>;

struct GenerationModel {
    vargen::ARModelParams params;
    vargen::Codebook codebook;
};

struct Models {
    std::optional<GenerationModel> generation;
    std::shared_ptr<const diffedit::NoisePredictor> denoiser;
};

struct GenerateConfig {
    double temperature = 1.0;
    std::uint64_t seed = 0;
    vargen::GridShape grid;
};

struct DispatchConfig {
    std::size_t cap = graph::kDefaultRelationCap;
    std::size_t embedding_dim = conditioning::kDefaultEmbeddingDim;
    int train_steps = diffedit::kDefaultTrainSteps;
    GenerateConfig generate;
    diffedit::EditConfig edit;
};

struct DispatchResult {
    std::variant<vargen::ImageGrid, diffedit::LatentTensor> output;
    std::vector<std::string> warnings;
    // Intermediate products, populated for the pathway that ran.
    std::optional<transduce::Caption> caption;
    std::optional<vargen::TokenSequence> tokens;
    std::optional<transduce::PromptPair> prompts;
};

/// Generate requests run caption -> token sampling -> palette decode; edit
/// requests run instruction -> prompts -> guided diffusion edit.
DispatchResult unified_dispatch(const UnifiedRequest& req, const Models& models,
                                const DispatchConfig& config);

}  // namespace simgraph::pipeline
