#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "overlay/verdict.hpp"
#include "overlay/vlm_client.hpp"

namespace overlay {

/// One text entity from the stage-1 extraction: the literal string and an
/// optional reference to the object carrying it (0-based index into objects).
struct TextEntity {
    std::string literal;
    std::optional<int> carrier;

    bool operator==(const TextEntity&) const = default;
};

/// A spatial relation between a text entity and an object (0-based indices).
struct Relation {
    int text_index = 0;
    int object_index = 0;
    std::string phrase;

    bool operator==(const Relation&) const = default;
};

/// Stage-1 scene description: objects, texts, and their relations.
/// Cardinalities are the list lengths by definition.
struct ExtractionResult {
    std::string image_id;
    std::vector<std::string> objects;
    std::vector<TextEntity> texts;
    std::vector<Relation> relations;
    bool malformed = false;  // set when parsing had to fall back

    size_t object_count() const { return objects.size(); }
    size_t text_count() const { return texts.size(); }
    size_t relation_count() const { return relations.size(); }

    bool operator==(const ExtractionResult&) const = default;
};

struct PromptTemplate {
    std::string name;
    std::string body;  // text with {name} placeholders
    std::set<std::string> required_placeholders;
};

/// Loads <name>.txt from the templates directory. Placeholders marked
/// {name!} in the file are required (the '!' is stripped from the body).
PromptTemplate load_template(const std::filesystem::path& templates_dir,
                             const std::string& name);

/// Placeholder substitution; unbound optional placeholders render empty.
std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings);

/// Scans for a line starting with "ANSWER:" (case-insensitive): yes ->
/// positive, no -> negative. An optional "OVERLAY:" line carries a bracketed
/// comma-separated list of flagged strings. Anything else is a VerdictError.
std::pair<BinaryLabel, std::vector<std::string>> parse_verdict(
    const std::string& text);

/// The labeled-section block format the stage-1 template asks the model to
/// emit (OBJECTS: / TEXTS: / RELATIONS:, one numbered item per line).
std::string serialize_extraction(const ExtractionResult& extraction);

/// Tolerant parse of the block out of arbitrary response text. Never throws:
/// missing or corrupt content degrades to empty sets with malformed=true;
/// out-of-range relation indices are dropped item-wise.
ExtractionResult parse_extraction(const std::string& text,
                                  const std::string& image_id);

OverlayVerdict detect_zero_shot(const std::vector<uint8_t>& image,
                                const std::string& image_id, VlmClient& client,
                                const PromptTemplate& tmpl);

ExtractionResult extract_scene(const std::vector<uint8_t>& image,
                               const std::string& image_id, VlmClient& client,
                               const PromptTemplate& tmpl);

/// Two-stage chain: extract the scene, then re-prompt with the serialized
/// extraction and the same image for the verdict.
std::pair<OverlayVerdict, ExtractionResult> detect_sequential(
    const std::vector<uint8_t>& image, const std::string& image_id,
    VlmClient& client, const PromptTemplate& stage1, const PromptTemplate& stage2);

}  // namespace overlay
