#include <gtest/gtest.h>

#include <json.hpp>

#include "gluscope/aggregator.hpp"
#include "gluscope/dataset.hpp"
#include "gluscope/errors.hpp"
#include "gluscope/fixtures.hpp"
#include "gluscope/io_util.hpp"
#include "gluscope/page.hpp"
#include "test_util.hpp"

namespace gluscope {
namespace {

struct Setup {
    WeightSet ws;
    Corpus corpus;
};

Setup one_doc_setup(std::size_t length) {
    ModelConfig c;
    c.d_model = 8;
    c.d_mlp = 4;
    c.n_heads = 2;
    c.vocab_size = 10;
    Setup s{random_weights(c, 5), {}};
    SeededRng rng(3);
    CorpusDoc d;
    d.doc.doc_id = 0;
    for (std::size_t i = 0; i < length; ++i) d.doc.tokens.push_back(static_cast<TokenId>(rng.below(10)));
    s.corpus.docs.push_back(d);
    for (int i = 0; i < 10; ++i) s.corpus.vocab.push_back("t" + std::to_string(i));
    return s;
}

// A row with a single hook_post example at `pos` of doc 0, in whichever combo
// the model puts it.
DatasetRow row_at(const Setup& s, std::uint64_t pos) {
    const auto acts = collect_doc(s.ws, s.corpus.docs[0].doc);
    const auto a = glu_activation(s.ws.config.activation, acts.x_gate(pos, 0, 1), acts.x_in(pos, 0, 1));
    DatasetRow row;
    row.neuron = 1;
    row.at(classify_signs(a.x_gate, a.x_in)).at(IntermediateKind::HookPost).examples.push_back({0, pos, a.post});
    return row;
}

const DisplayExample& only_example(const NeuronPage& page) {
    for (const auto& sec : page.sections)
        if (!sec.examples.empty()) return sec.examples.front();
    throw std::logic_error("no example");
}

TEST(NeuronPage, SingleTokenDocWindow) {
    const auto s = one_doc_setup(1);
    const auto page = build_neuron_page(row_at(s, 0), s.corpus, s.ws, 4);
    const auto& ex = only_example(page);
    EXPECT_EQ(ex.window_start, 0u);
    EXPECT_EQ(ex.focus_index, 0u);
    EXPECT_EQ(ex.tokens.size(), 1u);
}

TEST(NeuronPage, WindowAroundPositionTen) {
    const auto s = one_doc_setup(100);
    const auto page = build_neuron_page(row_at(s, 10), s.corpus, s.ws, 4);
    const auto& ex = only_example(page);
    EXPECT_EQ(ex.window_start, 6u);
    EXPECT_EQ(ex.tokens.size(), 7u);
    EXPECT_EQ(ex.focus_index, 4u);
    for (const auto& v : ex.values) EXPECT_EQ(v.size(), 7u);
    EXPECT_TRUE(ex.combo_mask[ex.focus_index]);
    EXPECT_EQ(ex.values[index_of(IntermediateKind::HookPost)][4], ex.value);
}

TEST(NeuronPage, WindowClampsAtDocEnd) {
    const auto s = one_doc_setup(12);
    const auto page = build_neuron_page(row_at(s, 11), s.corpus, s.ws, 64);
    const auto& ex = only_example(page);
    EXPECT_EQ(ex.window_start, 0u);
    EXPECT_EQ(ex.tokens.size(), 12u);
    EXPECT_EQ(ex.focus_index, 11u);
}

TEST(NeuronPage, MissingDocsAreListed) {
    const auto s = one_doc_setup(5);
    auto row = row_at(s, 2);
    row.at(SignCombo::NN).at(IntermediateKind::Swish).examples = {{7, 0, -0.1}, {3, 0, -0.2}};
    try {
        build_neuron_page(row, s.corpus, s.ws);
        FAIL() << "expected PageError";
    } catch (const PageError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("3, 7"), std::string::npos) << msg;
    }
}

TEST(NeuronPage, RecomputeMismatchIsError) {
    const auto s = one_doc_setup(5);
    auto row = row_at(s, 2);
    for (auto& c : row.combos)
        for (auto& ex : c.at(IntermediateKind::HookPost).examples) ex.value += 1e-9;
    EXPECT_THROW(build_neuron_page(row, s.corpus, s.ws), PageError);
}

TEST(NeuronPage, SixteenSectionsInDisplayOrder) {
    const auto s = one_doc_setup(5);
    const auto page = build_neuron_page(row_at(s, 2), s.corpus, s.ws);
    ASSERT_EQ(page.sections.size(), 16u);
    EXPECT_EQ(page.sections[0].combo, SignCombo::PP);
    EXPECT_EQ(page.sections[0].intermediate, IntermediateKind::HookPost);
    EXPECT_EQ(page.sections[5].combo, SignCombo::PN);
    EXPECT_EQ(page.sections[5].intermediate, IntermediateKind::HookPreLinear);
}

TEST(NeuronPage, FixtureSummaryEqualsRowFreqs) {
    const auto fx = make_again_fixture(1);
    AggregatorState st(AggregatorConfig{16, 1, fx.config.d_mlp, fx.config.activation});
    for (const auto& d : fx.corpus.docs) st.observe_doc(collect_doc(fx.weights, d.doc));
    const auto row = to_row(st.record(0, fx.neuron));
    const auto page = build_neuron_page(row, fx.corpus, fx.weights, kDefaultContextLeft, "again");
    const auto j = nlohmann::json::parse(page_to_json(page));
    for (auto c : kAllCombos) {
        EXPECT_EQ(page.summary[index_of(c)].freq, row.at(c).freq);
        EXPECT_EQ(j["summary"][std::string(to_string(c))]["freq"].get<double>(), row.at(c).freq);
    }
}

TEST(PageBundle, WritesPageAndIndex) {
    const auto s = one_doc_setup(5);
    testing::TempDir dir;
    auto page = build_neuron_page(row_at(s, 2), s.corpus, s.ws, 64, "tiny");
    write_page_bundle(dir.path(), page);
    const auto first = read_file(dir / "pages/L0_N1.json");
    page.neuron = 1;
    write_page_bundle(dir.path(), page);
    EXPECT_EQ(read_file(dir / "pages/L0_N1.json"), first);
    const auto index = nlohmann::json::parse(read_file(dir / "index.json"));
    ASSERT_EQ(index["pages"].size(), 1u);
    EXPECT_EQ(index["pages"][0]["id"], "L0_N1");
    EXPECT_EQ(index["pages"][0]["model_id"], "tiny");
    EXPECT_EQ(nlohmann::json::parse(first)["id"], "L0_N1");
}

TEST(NeuronId, Parse) {
    EXPECT_EQ(parse_neuron_id("31.9634"), (std::pair<std::size_t, std::size_t>{31, 9634}));
    EXPECT_EQ(page_id(31, 9634), "L31_N9634");
    for (const char* bad : {"", "3", "3.", ".4", "a.b", "1.2.3", "-1.2"}) EXPECT_THROW(parse_neuron_id(bad), InputError) << bad;
}

} // namespace
} // namespace gluscope
