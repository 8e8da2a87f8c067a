#include "gluscope/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gluscope {

namespace {

Matrix random_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = rng.uniform(-scale, scale);
    return m;
}

Matrix identity_plus_noise(SeededRng& rng, std::size_t n, double noise) {
    Matrix m = random_matrix(rng, n, n, noise);
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 1.0;
    return m;
}

Vector unit_vector(SeededRng& rng, std::size_t n) {
    Vector v(n);
    double norm = 0.0;
    while (norm < 1e-3) {
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        norm = std::sqrt(dot(v, v));
    }
    for (auto& x : v) x /= norm;
    return v;
}

// Random vector orthogonal to unit vector `a`, scaled to `length`.
Vector orthogonal_to(SeededRng& rng, const Vector& a, double length) {
    Vector r;
    double norm = 0.0;
    while (norm < 1e-3) {
        r = unit_vector(rng, a.size());
        const double proj = dot(r, a);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= proj * a[i];
        norm = std::sqrt(dot(r, r));
    }
    for (auto& x : r) x *= length / norm;
    return r;
}

const std::vector<std::string>& fixture_vocab() {
    static const std::vector<std::string> vocab = {
        "<|endoftext|>", "<unk>", "once",  "over",      "again",   "the",   "a",     "door",
        "often",         "body",  "volcano", "meanwhile", "instead", "later", "said",  "it",
        "was",           "and",   "then",  "they",      "we",      "went",  "home",  "to",
        "see",           "river", "stone", "light",     "rain",    "day",   "night", "time"};
    return vocab;
}

constexpr TokenId kFirstOrdinary = 5;
constexpr double kCraftedProjection = 2.0;
constexpr double kOrdinaryProjection = -1.0;

} // namespace

std::uint64_t SeededRng::below(std::uint64_t bound) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % bound;
}

WeightSet random_weights(const ModelConfig& config, std::uint64_t seed, double scale) {
    config.validate();
    SeededRng rng(seed);
    const std::size_t d = config.d_model, m = config.d_mlp;
    WeightSet ws;
    ws.config = config;
    ws.embed = random_matrix(rng, config.vocab_size, d, 1.0);
    ws.unembed = random_matrix(rng, config.vocab_size, d, scale);
    ws.final_norm_gain.assign(d, 1.0);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerWeights lw;
        lw.attn_q = random_matrix(rng, d, d, scale);
        lw.attn_k = random_matrix(rng, d, d, scale);
        lw.attn_v = random_matrix(rng, d, d, scale);
        lw.attn_o = random_matrix(rng, d, d, scale);
        lw.norm1_gain.assign(d, 1.0);
        lw.norm2_gain.assign(d, 1.0);
        lw.w_gate = random_matrix(rng, m, d, scale);
        lw.w_in = random_matrix(rng, m, d, scale);
        lw.w_out = random_matrix(rng, d, m, scale);
        ws.layers.push_back(std::move(lw));
    }
    return ws;
}

std::vector<std::pair<DocId, std::uint64_t>> AgainFixture::crafted_positions() const {
    std::vector<std::pair<DocId, std::uint64_t>> out;
    for (const auto& d : corpus.docs) {
        for (std::size_t p = 0; p < d.doc.tokens.size(); ++p) {
            if (std::find(crafted_tokens.begin(), crafted_tokens.end(), d.doc.tokens[p]) != crafted_tokens.end()) {
                out.emplace_back(d.doc.doc_id, p);
            }
        }
    }
    return out;
}

AgainFixture make_again_fixture(std::uint64_t seed) {
    AgainFixture fx;
    fx.config = ModelConfig{.n_layers = 1,
                            .d_model = 16,
                            .d_mlp = 4,
                            .n_heads = 2,
                            .vocab_size = 32,
                            .activation = ActivationKind::SwiGLU,
                            .norm_eps = 1e-6};
    fx.crafted_tokens = {2, 3};
    const auto& cfg = fx.config;
    SeededRng rng(seed);

    fx.feature = unit_vector(rng, cfg.d_model);
    const Vector& a = fx.feature;

    WeightSet& ws = fx.weights;
    ws.config = cfg;
    ws.embed = Matrix(cfg.vocab_size, cfg.d_model);
    for (TokenId t = 0; t < cfg.vocab_size; ++t) {
        const bool crafted = std::find(fx.crafted_tokens.begin(), fx.crafted_tokens.end(), t) != fx.crafted_tokens.end();
        const double c = crafted ? kCraftedProjection : kOrdinaryProjection;
        const Vector r = orthogonal_to(rng, a, 1.0);
        for (std::size_t j = 0; j < cfg.d_model; ++j) ws.embed(t, j) = c * a[j] + r[j];
    }
    ws.unembed = random_matrix(rng, cfg.vocab_size, cfg.d_model, 0.3);
    for (std::size_t j = 0; j < cfg.d_model; ++j) ws.unembed(fx.again_token, j) = 3.0 * a[j];
    ws.final_norm_gain.assign(cfg.d_model, 1.0);

    LayerWeights lw;
    lw.attn_q = identity_plus_noise(rng, cfg.d_model, 0.1);
    lw.attn_k = identity_plus_noise(rng, cfg.d_model, 0.1);
    lw.attn_v = identity_plus_noise(rng, cfg.d_model, 0.05);
    lw.attn_o = Matrix(cfg.d_model, cfg.d_model);
    for (std::size_t i = 0; i < cfg.d_model; ++i) lw.attn_o(i, i) = 0.05;
    lw.norm1_gain.resize(cfg.d_model);
    for (auto& g : lw.norm1_gain) g = rng.uniform(0.5, 1.5);
    lw.norm2_gain.assign(cfg.d_model, 1.0);
    lw.w_gate = random_matrix(rng, cfg.d_mlp, cfg.d_model, 0.5);
    lw.w_in = random_matrix(rng, cfg.d_mlp, cfg.d_model, 0.5);
    lw.w_out = random_matrix(rng, cfg.d_model, cfg.d_mlp, 0.5);
    for (std::size_t j = 0; j < cfg.d_model; ++j) {
        lw.w_gate(fx.neuron, j) = -2.0 * a[j];
        lw.w_in(fx.neuron, j) = -2.0 * a[j];
        lw.w_out(j, fx.neuron) = 2.0 * a[j];
    }
    ws.layers.push_back(std::move(lw));

    // 24 documents of ordinary words; 10 of them get exactly one crafted word,
    // so each crafted occurrence is its document's only one.
    constexpr std::size_t kDocs = 24, kCraftedDocs = 10;
    const auto& vocab = fixture_vocab();
    const auto n_ordinary = static_cast<std::uint64_t>(vocab.size() - kFirstOrdinary);
    std::vector<std::string> texts;
    std::uint64_t budget = 0;
    for (std::size_t i = 0; i < kDocs; ++i) {
        const std::size_t len = 6 + rng.below(15);
        std::vector<std::string> words;
        for (std::size_t w = 0; w < len; ++w) words.push_back(vocab[kFirstOrdinary + rng.below(n_ordinary)]);
        if (i < kCraftedDocs) {
            const auto& crafted = vocab[fx.crafted_tokens[rng.below(fx.crafted_tokens.size())]];
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(len + 1)), crafted);
        }
        std::string text;
        for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
        budget += words.size() + 1;
        texts.push_back(std::move(text));
    }

    std::size_t next = 0;
    TextSource source = [&]() -> std::optional<std::string> {
        if (next >= texts.size()) return std::nullopt;
        return texts[next++];
    };
    CorpusSpec spec;
    spec.token_budget = budget;
    spec.max_doc_tokens = 32;
    spec.prefix_token = 0;
    spec.seed = seed;
    fx.corpus = sample_corpus(source, WordTokenizer(vocab, 1), spec, "again-fixture");
    return fx;
}

} // namespace gluscope
