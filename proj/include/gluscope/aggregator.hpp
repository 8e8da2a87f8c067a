#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "gluscope/activation_math.hpp"
#include "gluscope/activations.hpp"
#include "gluscope/exact_sum.hpp"

namespace gluscope {

struct AggregatorConfig {
    std::size_t k = 16;
    std::size_t n_layers = 1;
    std::size_t d_mlp = 1;
    ActivationKind activation = ActivationKind::SwiGLU;

    void validate() const; // throws ConfigError
    bool operator==(const AggregatorConfig&) const = default;
};

struct ExampleRef {
    DocId doc_id = 0;
    std::uint64_t token_pos = 0;
    double value = 0.0;

    bool operator==(const ExampleRef&) const = default;
};

// Strict ordering of example candidates for one list: more extreme value
// first (largest when `max_first`), then doc_id ascending, then token_pos
// ascending.
bool more_extreme(const ExampleRef& a, const ExampleRef& b, bool max_first);

struct IntermediateStats {
    ExactSum sum;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    std::vector<ExampleRef> examples; // most extreme first, one per doc_id
};

struct ComboStats {
    std::uint64_t count = 0;
    std::array<IntermediateStats, 4> stats; // indexed by IntermediateKind

    const IntermediateStats& at(IntermediateKind k) const { return stats[index_of(k)]; }
    IntermediateStats& at(IntermediateKind k) { return stats[index_of(k)]; }

    // nullopt when count == 0.
    std::optional<double> mean(IntermediateKind k) const;
    std::optional<double> min(IntermediateKind k) const;
    std::optional<double> max(IntermediateKind k) const;
};

struct NeuronRecord {
    std::size_t layer = 0;
    std::size_t neuron = 0;
    std::uint64_t total_observations = 0;
    std::array<ComboStats, 4> combos; // indexed by SignCombo

    const ComboStats& at(SignCombo c) const { return combos[index_of(c)]; }
    ComboStats& at(SignCombo c) { return combos[index_of(c)]; }

    // count / total_observations; 0 when nothing was observed.
    double freq(SignCombo c) const;
};

// Streaming per-neuron statistics. Memory is fixed by the config and does not
// grow with the stream. Single writer; shard documents across states and
// merge for parallelism.
class AggregatorState {
public:
    explicit AggregatorState(const AggregatorConfig& config);

    const AggregatorConfig& config() const { return config_; }
    std::uint64_t total_observations() const { return total_; }

    // Requires doc ids strictly increasing across calls. Values are validated
    // before the state is touched, so a StreamError leaves it unchanged.
    void observe_doc(const DocActivations& doc);

    // Folds `other` into this state. Throws ContractError on config mismatch.
    void merge(const AggregatorState& other);

    const NeuronRecord& record(std::size_t layer, std::size_t neuron) const {
        return records_[layer * config_.d_mlp + neuron];
    }

    // One record per (layer, neuron), layer-major.
    std::vector<NeuronRecord> finalize() const { return records_; }

private:
    struct Slot {
        double value = 0.0;
        std::uint32_t pos = 0;
        bool set = false;
    };

    void validate(const DocActivations& doc) const;
    void insert_example(std::vector<ExampleRef>& list, const ExampleRef& ex, bool max_first) const;

    AggregatorConfig config_;
    std::uint64_t total_ = 0;
    std::optional<DocId> last_doc_;
    std::vector<NeuronRecord> records_;
    // Per-doc extreme per (layer, neuron, combo, intermediate); flushed at doc end.
    std::vector<Slot> scratch_;
    std::vector<std::size_t> touched_;
};

AggregatorState merge(AggregatorState a, const AggregatorState& b);

} // namespace gluscope
