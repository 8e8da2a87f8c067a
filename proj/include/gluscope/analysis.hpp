#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gluscope/aggregator.hpp"
#include "gluscope/model.hpp"

namespace gluscope {

struct CorrelationResult {
    double r = 0.0;
    double p = 1.0; // two-sided
    std::size_t n = 0;
};

// <u,v> / (|u| |v|). Throws DomainError for a zero vector, ContractError on
// length mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

// cos(w_in, w_out) for every neuron of `layer`.
std::vector<double> neuron_in_out_cosines(const WeightSet& ws, std::size_t layer);

// (count(PP) + count(PN)) / total_observations.
double gate_positive_freq(const NeuronRecord& record);

// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

// Sample Pearson r with a two-sided p-value from Student's t on n-2 degrees
// of freedom.
CorrelationResult pearson(std::span<const double> xs, std::span<const double> ys);

// Pearson correlation between cos(w_in, w_out) and gate-positive frequency
// across the neurons of one layer.
CorrelationResult correlate_layer(std::span<const NeuronRecord> dataset, const WeightSet& ws, std::size_t layer);

} // namespace gluscope
