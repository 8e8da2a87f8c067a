#include "gluscope/aggregator.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <map>

#include "gluscope/errors.hpp"

namespace gluscope {

void AggregatorConfig::validate() const {
    if (k < 1) throw ConfigError("aggregator: k must be >= 1");
    if (n_layers < 1 || d_mlp < 1) throw ConfigError("aggregator: n_layers and d_mlp must be >= 1");
}

bool more_extreme(const ExampleRef& a, const ExampleRef& b, bool max_first) {
    if (a.value != b.value) return max_first ? a.value > b.value : a.value < b.value;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.token_pos < b.token_pos;
}

std::optional<double> ComboStats::mean(IntermediateKind k) const {
    if (count == 0) return std::nullopt;
    return at(k).sum.value() / static_cast<double>(count);
}

std::optional<double> ComboStats::min(IntermediateKind k) const {
    if (count == 0) return std::nullopt;
    return at(k).min;
}

std::optional<double> ComboStats::max(IntermediateKind k) const {
    if (count == 0) return std::nullopt;
    return at(k).max;
}

double NeuronRecord::freq(SignCombo c) const {
    if (total_observations == 0) return 0.0;
    return static_cast<double>(at(c).count) / static_cast<double>(total_observations);
}

AggregatorState::AggregatorState(const AggregatorConfig& config) : config_(config) {
    config_.validate();
    records_.resize(config_.n_layers * config_.d_mlp);
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        for (std::size_t n = 0; n < config_.d_mlp; ++n) {
            auto& r = records_[l * config_.d_mlp + n];
            r.layer = l;
            r.neuron = n;
        }
    }
    scratch_.resize(records_.size() * 16);
}

void AggregatorState::validate(const DocActivations& doc) const {
    const std::string where = "doc " + std::to_string(doc.doc_id);
    if (doc.n_layers != config_.n_layers || doc.d_mlp != config_.d_mlp) {
        throw StreamError(where + ": shape " + std::to_string(doc.n_layers) + "x" + std::to_string(doc.d_mlp) +
                          " does not match aggregator " + std::to_string(config_.n_layers) + "x" +
                          std::to_string(config_.d_mlp));
    }
    if (doc.pairs.size() != std::size_t{doc.n_positions} * doc.n_layers * doc.d_mlp * 2) {
        throw StreamError(where + ": payload size does not match its shape");
    }
    if (last_doc_ && doc.doc_id <= *last_doc_ && doc.n_positions > 0) {
        throw ContractError(where + ": doc ids must be strictly increasing (last was " + std::to_string(*last_doc_) +
                            ")");
    }
    for (std::size_t p = 0; p < doc.n_positions; ++p) {
        for (std::size_t l = 0; l < doc.n_layers; ++l) {
            for (std::size_t n = 0; n < doc.d_mlp; ++n) {
                if (!std::isfinite(doc.x_gate(p, l, n)) || !std::isfinite(doc.x_in(p, l, n))) {
                    throw StreamError(where + ", layer " + std::to_string(l) + ", position " + std::to_string(p) +
                                      ": non-finite activation at neuron " + std::to_string(n));
                }
            }
        }
    }
}

void AggregatorState::insert_example(std::vector<ExampleRef>& list, const ExampleRef& ex, bool max_first) const {
    if (list.size() >= config_.k && !more_extreme(ex, list.back(), max_first)) return;
    auto it = std::upper_bound(list.begin(), list.end(), ex,
                               [&](const ExampleRef& a, const ExampleRef& b) { return more_extreme(a, b, max_first); });
    list.insert(it, ex);
    if (list.size() > config_.k) list.pop_back();
}

void AggregatorState::observe_doc(const DocActivations& doc) {
    validate(doc);
    if (doc.n_positions == 0) return;

    const auto kind = config_.activation;
    for (std::uint32_t p = 0; p < doc.n_positions; ++p) {
        for (std::size_t l = 0; l < config_.n_layers; ++l) {
            for (std::size_t n = 0; n < config_.d_mlp; ++n) {
                const std::size_t cell = l * config_.d_mlp + n;
                const auto act = glu_activation(kind, doc.x_gate(p, l, n), doc.x_in(p, l, n));
                const auto combo = classify_signs(act.x_gate, act.x_in);
                auto& cs = records_[cell].at(combo);
                ++cs.count;
                for (auto k : kAllIntermediates) {
                    const double v = act.get(k);
                    auto& st = cs.at(k);
                    st.sum.add(v);
                    st.min = std::min(st.min, v);
                    st.max = std::max(st.max, v);

                    const std::size_t si = cell * 16 + index_of(combo) * 4 + index_of(k);
                    auto& slot = scratch_[si];
                    const bool max_first = extreme_is_max(combo, k);
                    if (!slot.set) {
                        slot = {v, p, true};
                        touched_.push_back(si);
                    } else if (max_first ? v > slot.value : v < slot.value) {
                        // Equal values keep the earlier position.
                        slot.value = v;
                        slot.pos = p;
                    }
                }
            }
        }
    }

    std::sort(touched_.begin(), touched_.end());
    for (std::size_t si : touched_) {
        auto& slot = scratch_[si];
        const std::size_t cell = si / 16;
        const auto combo = static_cast<SignCombo>((si % 16) / 4);
        const auto k = static_cast<IntermediateKind>(si % 4);
        insert_example(records_[cell].at(combo).at(k).examples, {doc.doc_id, slot.pos, slot.value},
                       extreme_is_max(combo, k));
        slot.set = false;
    }
    touched_.clear();

    total_ += doc.n_positions;
    for (auto& r : records_) r.total_observations = total_;
    last_doc_ = doc.doc_id;
}

void AggregatorState::merge(const AggregatorState& other) {
    if (!(config_ == other.config_)) throw ContractError("aggregator merge: config mismatch");
    for (std::size_t cell = 0; cell < records_.size(); ++cell) {
        for (auto c : kAllCombos) {
            auto& dst = records_[cell].at(c);
            const auto& src = other.records_[cell].at(c);
            dst.count += src.count;
            for (auto k : kAllIntermediates) {
                auto& d = dst.at(k);
                const auto& s = src.at(k);
                d.sum.add(s.sum);
                d.min = std::min(d.min, s.min);
                d.max = std::max(d.max, s.max);

                const bool max_first = extreme_is_max(c, k);
                std::map<DocId, ExampleRef> best;
                for (const std::vector<ExampleRef>* list : std::array<const std::vector<ExampleRef>*, 2>{&d.examples, &s.examples}) {
                    for (const auto& ex : *list) {
                        auto [it, fresh] = best.emplace(ex.doc_id, ex);
                        if (!fresh && more_extreme(ex, it->second, max_first)) it->second = ex;
                    }
                }
                std::vector<ExampleRef> merged;
                merged.reserve(best.size());
                for (auto& [id, ex] : best) merged.push_back(ex);
                std::sort(merged.begin(), merged.end(),
                          [&](const ExampleRef& a, const ExampleRef& b) { return more_extreme(a, b, max_first); });
                if (merged.size() > config_.k) merged.resize(config_.k);
                d.examples = std::move(merged);
            }
        }
    }
    total_ += other.total_;
    for (auto& r : records_) r.total_observations = total_;
    if (other.last_doc_ && (!last_doc_ || *other.last_doc_ > *last_doc_)) last_doc_ = other.last_doc_;
}

AggregatorState merge(AggregatorState a, const AggregatorState& b) {
    a.merge(b);
    return a;
}

} // namespace gluscope
