#include "gluscope/dataset.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "gluscope/errors.hpp"
#include "gluscope/io_util.hpp"

namespace gluscope {

namespace {

using json = nlohmann::ordered_json;

std::string field_name(SignCombo c, IntermediateKind k, const char* stat) {
    return std::string(to_string(c)) + "_" + std::string(to_string(k)) + "_" + stat;
}

std::string freq_name(SignCombo c) { return std::string(to_string(c)) + "_freq"; }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json manifest_to_json(const DatasetManifest& m) {
    return json{{"model_id", m.model_id},     {"corpus_id", m.corpus_id},
                {"k", m.k},                   {"total_tokens", m.total_tokens},
                {"n_layers", m.n_layers},     {"d_mlp", m.d_mlp},
                {"activation", std::string(to_string(m.activation))}, {"n_rows", m.n_rows}};
}

class RowParser {
public:
    RowParser(const json& obj, std::size_t line) : obj_(obj), line_(line) {}

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ParseError("dataset line " + std::to_string(line_) + ": field '" + field + "': " + what);
    }

    const json& get(const std::string& field) const {
        auto it = obj_.find(field);
        if (it == obj_.end()) fail(field, "missing");
        return *it;
    }

    std::uint64_t index(const std::string& field) const {
        const auto& v = get(field);
        if (!v.is_number_unsigned()) fail(field, "expected non-negative integer");
        return v.get<std::uint64_t>();
    }

    double number(const std::string& field) const {
        const auto& v = get(field);
        if (!v.is_number()) fail(field, "expected number");
        return v.get<double>();
    }

    std::optional<double> nullable(const std::string& field) const {
        const auto& v = get(field);
        if (v.is_null()) return std::nullopt;
        if (!v.is_number()) fail(field, "expected number or null");
        return v.get<double>();
    }

    std::vector<ExampleRef> examples(const std::string& field) const {
        const auto& v = get(field);
        if (!v.is_array()) fail(field, "expected array");
        std::vector<ExampleRef> out;
        for (const auto& e : v) {
            if (!e.is_array() || e.size() != 3 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned() ||
                !e[2].is_number()) {
                fail(field, "expected [doc_id, token_pos, value] entries");
            }
            out.push_back({e[0].get<DocId>(), e[1].get<std::uint64_t>(), e[2].get<double>()});
        }
        return out;
    }

private:
    const json& obj_;
    std::size_t line_;
};

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    try {
        m.model_id = j.at("model_id").get<std::string>();
        m.corpus_id = j.at("corpus_id").get<std::string>();
        m.k = j.at("k").get<std::size_t>();
        m.total_tokens = j.at("total_tokens").get<std::uint64_t>();
        m.n_layers = j.at("n_layers").get<std::size_t>();
        m.d_mlp = j.at("d_mlp").get<std::size_t>();
        auto act = parse_activation_kind(j.at("activation").get<std::string>());
        if (!act) throw ParseError("dataset manifest: unknown activation");
        m.activation = *act;
        m.n_rows = j.at("n_rows").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset manifest: ") + e.what());
    }
    return m;
}

} // namespace

DatasetRow to_row(const NeuronRecord& record) {
    DatasetRow row;
    row.layer = record.layer;
    row.neuron = record.neuron;
    for (auto c : kAllCombos) {
        const auto& cs = record.at(c);
        auto& dc = row.at(c);
        dc.freq = record.freq(c);
        for (auto k : kAllIntermediates) {
            auto& cell = dc.at(k);
            cell.max = cs.max(k);
            cell.min = cs.min(k);
            cell.mean = cs.mean(k);
            cell.examples = cs.at(k).examples;
        }
    }
    return row;
}

NeuronRecord to_record(const DatasetRow& row, std::uint64_t total_observations) {
    NeuronRecord r;
    r.layer = row.layer;
    r.neuron = row.neuron;
    r.total_observations = total_observations;
    for (auto c : kAllCombos) {
        const auto& dc = row.at(c);
        auto& cs = r.at(c);
        cs.count = static_cast<std::uint64_t>(std::llround(dc.freq * static_cast<double>(total_observations)));
        for (auto k : kAllIntermediates) {
            const auto& cell = dc.at(k);
            auto& st = cs.at(k);
            if (cell.min) st.min = *cell.min;
            if (cell.max) st.max = *cell.max;
            if (cell.mean) st.sum.add(*cell.mean * static_cast<double>(cs.count));
            st.examples = cell.examples;
        }
    }
    return r;
}

std::string row_to_line(const DatasetRow& row) {
    json j;
    j["layer"] = row.layer;
    j["neuron"] = row.neuron;
    for (auto c : kAllCombos) {
        const auto& dc = row.at(c);
        j[freq_name(c)] = dc.freq;
        for (auto k : kDisplayIntermediates) {
            const auto& cell = dc.at(k);
            j[field_name(c, k, "max")] = optional_number(cell.max);
            j[field_name(c, k, "min")] = optional_number(cell.min);
            j[field_name(c, k, "mean")] = optional_number(cell.mean);
            json ex = json::array();
            for (const auto& e : cell.examples) ex.push_back(json::array({e.doc_id, e.token_pos, e.value}));
            j[field_name(c, k, "examples")] = std::move(ex);
        }
    }
    return j.dump();
}

void write_rows(std::span<const DatasetRow> rows, const DatasetManifest& manifest, std::ostream& rows_out,
                std::ostream& manifest_out) {
    for (const auto& row : rows) rows_out << row_to_line(row) << '\n';
    manifest_out << manifest_to_json(manifest).dump(2) << '\n';
    if (!rows_out) throw Error("dataset: writing rows failed");
    if (!manifest_out) throw Error("dataset: writing manifest failed");
}

void write_records(std::span<const NeuronRecord> records, std::uint64_t total_observations, DatasetManifest manifest,
                   std::ostream& rows_out, std::ostream& manifest_out) {
    std::vector<DatasetRow> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(to_row(r));
    manifest.total_tokens = total_observations;
    manifest.n_rows = rows.size();
    write_rows(rows, manifest, rows_out, manifest_out);
}

Dataset read_records(std::istream& rows_in, std::istream* manifest_in) {
    if (!manifest_in || !*manifest_in) throw ParseError("dataset: manifest missing");
    Dataset ds;
    {
        std::stringstream ss;
        ss << manifest_in->rdbuf();
        try {
            ds.manifest = manifest_from_json(json::parse(ss.str()));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("dataset manifest: ") + e.what());
        }
    }

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(rows_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object()) throw ParseError("dataset line " + std::to_string(line_no) + ": not an object");
        RowParser p(obj, line_no);
        DatasetRow row;
        row.layer = p.index("layer");
        row.neuron = p.index("neuron");
        for (auto c : kAllCombos) {
            auto& dc = row.at(c);
            dc.freq = p.number(freq_name(c));
            if (!(dc.freq >= 0.0 && dc.freq <= 1.0)) p.fail(freq_name(c), "frequency outside [0, 1]");
            for (auto k : kDisplayIntermediates) {
                auto& cell = dc.at(k);
                cell.max = p.nullable(field_name(c, k, "max"));
                cell.min = p.nullable(field_name(c, k, "min"));
                cell.mean = p.nullable(field_name(c, k, "mean"));
                cell.examples = p.examples(field_name(c, k, "examples"));
                if (cell.examples.size() > ds.manifest.k) p.fail(field_name(c, k, "examples"), "more than k entries");
            }
        }
        ds.rows.push_back(std::move(row));
    }
    if (ds.rows.size() != ds.manifest.n_rows) {
        throw ParseError("dataset: manifest lists " + std::to_string(ds.manifest.n_rows) + " rows, file has " +
                         std::to_string(ds.rows.size()));
    }
    return ds;
}

void write_dataset(const std::filesystem::path& dir, std::span<const DatasetRow> rows, const DatasetManifest& manifest) {
    std::filesystem::create_directories(dir);
    std::ostringstream r, m;
    write_rows(rows, manifest, r, m);
    write_file(dir / "dataset.jsonl", r.str());
    write_file(dir / "manifest.json", m.str());
}

Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream rows(dir / "dataset.jsonl");
    if (!rows) throw Error("cannot open " + (dir / "dataset.jsonl").string());
    std::ifstream manifest(dir / "manifest.json");
    return read_records(rows, manifest ? &manifest : nullptr);
}

} // namespace gluscope
