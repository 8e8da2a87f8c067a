#include "gluscope/page.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include <json.hpp>

#include "gluscope/errors.hpp"
#include "gluscope/io_util.hpp"

namespace gluscope {

namespace {

using json = nlohmann::ordered_json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct NeuronTrace {
    std::vector<NeuronActivation> acts; // per position
};

} // namespace

std::string page_id(std::size_t layer, std::size_t neuron) {
    return "L" + std::to_string(layer) + "_N" + std::to_string(neuron);
}

std::pair<std::size_t, std::size_t> parse_neuron_id(const std::string& s) {
    static const std::regex re(R"((\d+)\.(\d+))");
    std::smatch m;
    if (!std::regex_match(s, m, re)) throw InputError("bad neuron id '" + s + "', expected layer.neuron");
    return {std::stoul(m[1]), std::stoul(m[2])};
}

NeuronPage build_neuron_page(const DatasetRow& row, const Corpus& corpus, const WeightSet& ws,
                             std::size_t context_left, std::string model_id) {
    const auto& cfg = ws.config;
    if (row.layer >= cfg.n_layers || row.neuron >= cfg.d_mlp) {
        throw PageError("neuron " + std::to_string(row.layer) + "." + std::to_string(row.neuron) +
                        " is outside the model");
    }

    std::set<DocId> missing;
    for (const auto& combo : row.combos)
        for (const auto& cell : combo.cells)
            for (const auto& ex : cell.examples)
                if (!corpus.find(ex.doc_id)) missing.insert(ex.doc_id);
    if (!missing.empty()) {
        std::string ids;
        for (auto id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
        throw PageError("doc ids not in corpus: " + ids);
    }

    NeuronPage page;
    page.model_id = std::move(model_id);
    page.layer = row.layer;
    page.neuron = row.neuron;
    page.activation = cfg.activation;
    page.summary = row.combos;
    for (auto& c : page.summary)
        for (auto& cell : c.cells) cell.examples.clear();

    std::map<DocId, NeuronTrace> traces;
    auto trace_for = [&](DocId id) -> const NeuronTrace& {
        auto it = traces.find(id);
        if (it != traces.end()) return it->second;
        const auto acts = collect_doc(ws, corpus.find(id)->doc);
        NeuronTrace t;
        for (std::size_t p = 0; p < acts.n_positions; ++p) {
            t.acts.push_back(
                glu_activation(cfg.activation, acts.x_gate(p, row.layer, row.neuron), acts.x_in(p, row.layer, row.neuron)));
        }
        return traces.emplace(id, std::move(t)).first->second;
    };

    for (auto c : kAllCombos) {
        for (auto k : kDisplayIntermediates) {
            PageSection sec;
            sec.combo = c;
            sec.intermediate = k;
            for (const auto& ex : row.at(c).at(k).examples) {
                const auto& doc = corpus.find(ex.doc_id)->doc;
                const auto& trace = trace_for(ex.doc_id);
                if (ex.token_pos >= trace.acts.size()) {
                    throw PageError("doc " + std::to_string(ex.doc_id) + ": position " + std::to_string(ex.token_pos) +
                                    " past end of document");
                }
                const double recomputed = trace.acts[ex.token_pos].get(k);
                if (recomputed != ex.value) {
                    throw PageError("doc " + std::to_string(ex.doc_id) + " position " + std::to_string(ex.token_pos) +
                                    ": recomputed " + std::string(to_string(k)) +
                                    " does not match the dataset (wrong weights or corpus?)");
                }

                DisplayExample d;
                d.doc_id = ex.doc_id;
                d.token_pos = ex.token_pos;
                d.value = ex.value;
                d.window_start = ex.token_pos > context_left ? ex.token_pos - context_left : 0;
                const std::size_t end = std::min<std::size_t>(ex.token_pos + kContextRight, trace.acts.size() - 1);
                d.focus_index = ex.token_pos - d.window_start;
                for (std::size_t p = d.window_start; p <= end; ++p) {
                    d.tokens.push_back(corpus.token_text(doc.tokens[p]));
                    const auto& a = trace.acts[p];
                    for (auto kk : kAllIntermediates) d.values[index_of(kk)].push_back(a.get(kk));
                    d.combo_mask.push_back(classify_signs(a.x_gate, a.x_in) == c);
                }
                sec.examples.push_back(std::move(d));
            }
            page.sections.push_back(std::move(sec));
        }
    }
    return page;
}

std::string page_to_json(const NeuronPage& page) {
    json j;
    j["id"] = page_id(page.layer, page.neuron);
    j["model_id"] = page.model_id;
    j["layer"] = page.layer;
    j["neuron"] = page.neuron;
    j["activation"] = std::string(to_string(page.activation));

    json summary = json::object();
    for (auto c : kAllCombos) {
        const auto& dc = page.summary[index_of(c)];
        json col;
        col["freq"] = dc.freq;
        for (auto k : kDisplayIntermediates) {
            const auto& cell = dc.at(k);
            col[std::string(to_string(k))] = {
                {"max", optional_number(cell.max)}, {"min", optional_number(cell.min)}, {"mean", optional_number(cell.mean)}};
        }
        summary[std::string(to_string(c))] = std::move(col);
    }
    j["summary"] = std::move(summary);

    json sections = json::array();
    for (const auto& sec : page.sections) {
        json s;
        s["combo"] = std::string(to_string(sec.combo));
        s["intermediate"] = std::string(to_string(sec.intermediate));
        json exs = json::array();
        for (const auto& d : sec.examples) {
            json e;
            e["doc_id"] = d.doc_id;
            e["token_pos"] = d.token_pos;
            e["value"] = d.value;
            e["window_start"] = d.window_start;
            e["focus_index"] = d.focus_index;
            e["tokens"] = d.tokens;
            json vals;
            for (auto k : kDisplayIntermediates) vals[std::string(to_string(k))] = d.values[index_of(k)];
            e["values"] = std::move(vals);
            e["combo_mask"] = d.combo_mask;
            exs.push_back(std::move(e));
        }
        s["examples"] = std::move(exs);
        sections.push_back(std::move(s));
    }
    j["sections"] = std::move(sections);
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

void write_page_bundle(const std::filesystem::path& dir, const NeuronPage& page) {
    const auto pages_dir = dir / "pages";
    std::filesystem::create_directories(pages_dir);
    const std::string id = page_id(page.layer, page.neuron);
    write_file(pages_dir / (id + ".json"), page_to_json(page));

    std::map<std::pair<std::size_t, std::size_t>, std::string> entries;
    const auto index_path = dir / "index.json";
    if (std::filesystem::exists(index_path)) {
        try {
            auto idx = json::parse(read_file(index_path));
            for (const auto& e : idx.at("pages")) {
                entries[{e.at("layer").get<std::size_t>(), e.at("neuron").get<std::size_t>()}] =
                    e.at("model_id").get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("page index " + index_path.string() + ": " + e.what());
        }
    }
    entries[{page.layer, page.neuron}] = page.model_id;

    json pages = json::array();
    for (const auto& [key, model] : entries) {
        pages.push_back({{"id", page_id(key.first, key.second)},
                         {"layer", key.first},
                         {"neuron", key.second},
                         {"model_id", model}});
    }
    write_file(index_path, json{{"pages", pages}}.dump(2) + "\n");
}

} // namespace gluscope
