#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gluscope {

using TokenId = std::uint32_t;
using DocId = std::uint64_t;

// Raw (x_gate, x_in) pairs for one document, stored as 32-bit floats in
// position-major, then layer-major, then neuron-major order. This is also the
// payload layout of an activation dump block.
struct DocActivations {
    DocId doc_id = 0;
    std::uint32_t n_positions = 0;
    std::uint32_t n_layers = 0;
    std::uint32_t d_mlp = 0;
    std::vector<float> pairs; // size n_positions * n_layers * d_mlp * 2

    DocActivations() = default;
    DocActivations(DocId id, std::uint32_t positions, std::uint32_t layers, std::uint32_t mlp)
        : doc_id(id), n_positions(positions), n_layers(layers), d_mlp(mlp),
          pairs(std::size_t{positions} * layers * mlp * 2, 0.0f) {}

    std::size_t offset(std::size_t pos, std::size_t layer, std::size_t neuron) const {
        return ((pos * n_layers + layer) * d_mlp + neuron) * 2;
    }
    float x_gate(std::size_t pos, std::size_t layer, std::size_t neuron) const {
        return pairs[offset(pos, layer, neuron)];
    }
    float x_in(std::size_t pos, std::size_t layer, std::size_t neuron) const {
        return pairs[offset(pos, layer, neuron) + 1];
    }
    void set(std::size_t pos, std::size_t layer, std::size_t neuron, float gate, float in) {
        auto o = offset(pos, layer, neuron);
        pairs[o] = gate;
        pairs[o + 1] = in;
    }

    bool operator==(const DocActivations&) const = default;
};

} // namespace gluscope
