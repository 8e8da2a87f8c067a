#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gluscope/aggregator.hpp"

namespace gluscope {

// One (combo, intermediate) cell of a dataset row. Statistics are null when
// the combo never occurred.
struct DatasetCell {
    std::optional<double> max;
    std::optional<double> min;
    std::optional<double> mean;
    std::vector<ExampleRef> examples;

    bool operator==(const DatasetCell&) const = default;
};

struct DatasetCombo {
    double freq = 0.0;
    std::array<DatasetCell, 4> cells; // indexed by IntermediateKind

    const DatasetCell& at(IntermediateKind k) const { return cells[index_of(k)]; }
    DatasetCell& at(IntermediateKind k) { return cells[index_of(k)]; }
    bool operator==(const DatasetCombo&) const = default;
};

// Flat per-neuron row. Field names on disk are "{combo}_freq" and
// "{combo}_{intermediate}_{max|min|mean|examples}".
struct DatasetRow {
    std::size_t layer = 0;
    std::size_t neuron = 0;
    std::array<DatasetCombo, 4> combos; // indexed by SignCombo

    const DatasetCombo& at(SignCombo c) const { return combos[index_of(c)]; }
    DatasetCombo& at(SignCombo c) { return combos[index_of(c)]; }
    bool operator==(const DatasetRow&) const = default;
};

struct DatasetManifest {
    std::string model_id;
    std::string corpus_id;
    std::size_t k = 16;
    std::uint64_t total_tokens = 0;
    std::size_t n_layers = 0;
    std::size_t d_mlp = 0;
    ActivationKind activation = ActivationKind::SwiGLU;
    std::size_t n_rows = 0;

    bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<DatasetRow> rows;
};

DatasetRow to_row(const NeuronRecord& record);

// Rebuilds counts from frequencies and the manifest total; sums are
// reconstructed from the means. Used where analyses need NeuronRecords.
NeuronRecord to_record(const DatasetRow& row, std::uint64_t total_observations);

// One JSON object per line plus a JSON manifest; byte-stable for identical input.
void write_rows(std::span<const DatasetRow> rows, const DatasetManifest& manifest, std::ostream& rows_out,
                std::ostream& manifest_out);

// Converts the records and fills total_tokens / n_rows of `manifest`.
void write_records(std::span<const NeuronRecord> records, std::uint64_t total_observations, DatasetManifest manifest,
                   std::ostream& rows_out, std::ostream& manifest_out);

// Throws ParseError naming the line and field on a schema violation, or when
// the manifest is absent (null pointer).
Dataset read_records(std::istream& rows_in, std::istream* manifest_in);

// Directory form: dataset.jsonl + manifest.json.
void write_dataset(const std::filesystem::path& dir, std::span<const DatasetRow> rows, const DatasetManifest& manifest);
Dataset read_dataset(const std::filesystem::path& dir);

std::string row_to_line(const DatasetRow& row);

} // namespace gluscope
