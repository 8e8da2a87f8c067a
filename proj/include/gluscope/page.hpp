#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "gluscope/corpus.hpp"
#include "gluscope/dataset.hpp"
#include "gluscope/model.hpp"

namespace gluscope {

inline constexpr std::size_t kDefaultContextLeft = 64;
inline constexpr std::size_t kContextRight = 2;

// A truncated text snippet around one recorded example, with every
// intermediate recomputed per token.
struct DisplayExample {
    DocId doc_id = 0;
    std::uint64_t token_pos = 0;
    double value = 0.0;
    std::size_t window_start = 0;    // first doc position shown
    std::size_t focus_index = 0;     // index of the token of interest within the window
    std::vector<std::string> tokens;
    std::array<std::vector<double>, 4> values; // indexed by IntermediateKind
    std::vector<bool> combo_mask;    // token had the section's combo
};

struct PageSection {
    SignCombo combo = SignCombo::PP;
    IntermediateKind intermediate = IntermediateKind::HookPost;
    std::vector<DisplayExample> examples;
};

struct NeuronPage {
    std::string model_id;
    std::size_t layer = 0;
    std::size_t neuron = 0;
    ActivationKind activation = ActivationKind::SwiGLU;
    std::array<DatasetCombo, 4> summary; // examples stripped
    std::vector<PageSection> sections;   // 16, combo-major in display order
};

// "L{layer}_N{neuron}"
std::string page_id(std::size_t layer, std::size_t neuron);

// Parses "layer.neuron".
std::pair<std::size_t, std::size_t> parse_neuron_id(const std::string& s);

// Re-runs each example's document through the model to recover per-token
// intermediates. Throws PageError listing every unresolvable doc id, or when
// the recomputed value at the token of interest differs from the recorded one.
NeuronPage build_neuron_page(const DatasetRow& row, const Corpus& corpus, const WeightSet& ws,
                             std::size_t context_left = kDefaultContextLeft, std::string model_id = "");

std::string page_to_json(const NeuronPage& page);

// Writes pages/<id>.json under `dir` and adds the page to index.json.
void write_page_bundle(const std::filesystem::path& dir, const NeuronPage& page);

} // namespace gluscope
