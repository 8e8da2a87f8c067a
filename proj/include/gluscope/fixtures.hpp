#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "gluscope/corpus.hpp"
#include "gluscope/model.hpp"

namespace gluscope {

// Portable seeded reals: mt19937_64 output is fully specified, unlike the
// standard distributions.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : gen_(seed) {}
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; } // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t below(std::uint64_t bound);
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

// Random weights with entries uniform in [-scale, scale] and unit gains.
WeightSet random_weights(const ModelConfig& config, std::uint64_t seed, double scale = 0.5);

// A one-layer model whose neuron `neuron` reads minus the "again" direction
// with both w_gate and w_in and writes the "again" direction with w_out, so
// cos(w_in, w_out) = -1. A small set of crafted tokens has embeddings on the
// "again" side; every other token sits on the opposite side. Attention is
// kept near identity with a small output projection, so the neuron's
// pre-activations are negative exactly on crafted tokens.
struct AgainFixture {
    ModelConfig config;
    WeightSet weights;
    Corpus corpus;
    std::size_t neuron = 2;
    Vector feature;                      // unit "again" direction
    std::vector<TokenId> crafted_tokens; // embeddings with positive projection onto `feature`
    TokenId again_token = 4;

    // (doc_id, position) of every crafted token occurrence.
    std::vector<std::pair<DocId, std::uint64_t>> crafted_positions() const;
};

AgainFixture make_again_fixture(std::uint64_t seed);

} // namespace gluscope
