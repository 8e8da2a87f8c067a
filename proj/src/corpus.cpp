#include "gluscope/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <random>

#include <json.hpp>

#include "gluscope/errors.hpp"
#include "gluscope/io_util.hpp"

namespace gluscope {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

json manifest_to_json(const CorpusManifest& m) {
    return json{{"total_tokens", m.total_tokens},
                {"n_docs", m.n_docs},
                {"spec",
                 {{"token_budget", m.spec.token_budget},
                  {"max_doc_tokens", m.spec.max_doc_tokens},
                  {"prefix_token", m.spec.prefix_token},
                  {"seed", m.spec.seed}}},
                {"source", m.source},
                {"tokenizer", m.tokenizer},
                {"source_exhausted", m.source_exhausted}};
}

CorpusManifest manifest_from_json(const json& j) {
    CorpusManifest m;
    m.total_tokens = j.at("total_tokens").get<std::uint64_t>();
    m.n_docs = j.at("n_docs").get<std::uint64_t>();
    const auto& s = j.at("spec");
    m.spec.token_budget = s.at("token_budget").get<std::uint64_t>();
    m.spec.max_doc_tokens = s.at("max_doc_tokens").get<std::uint64_t>();
    m.spec.prefix_token = s.at("prefix_token").get<TokenId>();
    m.spec.seed = s.at("seed").get<std::uint64_t>();
    m.source = j.at("source").get<std::string>();
    m.tokenizer = j.at("tokenizer").get<std::string>();
    m.source_exhausted = j.at("source_exhausted").get<bool>();
    return m;
}

} // namespace

std::vector<TokenId> ByteTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(c);
    return out;
}

std::vector<std::string> ByteTokenizer::vocabulary() const {
    std::vector<std::string> v;
    // Bytes that are not ASCII cannot stand alone in UTF-8 text, so they get a hex name.
    for (int b = 0; b < 256; ++b) {
        if (b < 0x80) {
            v.emplace_back(1, static_cast<char>(b));
        } else {
            char name[8];
            std::snprintf(name, sizeof name, "<0x%02X>", b);
            v.emplace_back(name);
        }
    }
    v.emplace_back("<|endoftext|>");
    return v;
}

WordTokenizer::WordTokenizer(std::vector<std::string> vocab, TokenId unknown_id)
    : vocab_(std::move(vocab)), unknown_(unknown_id) {
    if (unknown_ >= vocab_.size()) throw ConfigError("word tokenizer: unknown id outside vocabulary");
    for (TokenId i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], i);
}

std::vector<TokenId> WordTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            auto it = ids_.find(std::string(text.substr(i, j - i)));
            out.push_back(it == ids_.end() ? unknown_ : it->second);
        }
        i = j;
    }
    return out;
}

void CorpusSpec::validate() const {
    if (max_doc_tokens < 2) throw ConfigError("corpus spec: max_doc_tokens must be >= 2");
    if (token_budget < max_doc_tokens) throw ConfigError("corpus spec: token_budget must be >= max_doc_tokens");
}

std::string Corpus::token_text(TokenId id) const {
    if (id < vocab.size()) return vocab[id];
    return "<|" + std::to_string(id) + "|>";
}

std::vector<std::uint64_t> shuffled_order(std::uint64_t n, std::uint64_t seed) {
    std::vector<std::uint64_t> order(n);
    for (std::uint64_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::uint64_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[uniform_below(rng, i)]);
    }
    return order;
}

Corpus sample_corpus(const TextSource& source, const Tokenizer& tokenizer, const CorpusSpec& spec,
                     std::string source_id) {
    spec.validate();
    std::vector<std::string> texts;
    while (auto t = source()) texts.push_back(std::move(*t));

    Corpus corpus;
    corpus.vocab = tokenizer.vocabulary();
    corpus.manifest.spec = spec;
    corpus.manifest.source = std::move(source_id);
    corpus.manifest.tokenizer = tokenizer.name();

    std::uint64_t total = 0;
    for (std::uint64_t idx : shuffled_order(texts.size(), spec.seed)) {
        if (total >= spec.token_budget) break;
        CorpusDoc d;
        d.source_index = idx;
        d.text = std::move(texts[idx]);
        d.doc.doc_id = corpus.docs.size();
        d.doc.tokens.push_back(spec.prefix_token);
        auto ids = tokenizer.encode(d.text);
        const std::size_t room = spec.max_doc_tokens - 1;
        d.doc.tokens.insert(d.doc.tokens.end(), ids.begin(),
                            ids.begin() + static_cast<std::ptrdiff_t>(std::min(room, ids.size())));
        total += d.doc.tokens.size();
        corpus.docs.push_back(std::move(d));
    }
    corpus.manifest.total_tokens = total;
    corpus.manifest.n_docs = corpus.docs.size();
    corpus.manifest.source_exhausted = total < spec.token_budget;
    return corpus;
}

TextSource jsonl_text_source(std::istream& in) {
    auto line_no = std::make_shared<std::size_t>(0);
    return [&in, line_no]() -> std::optional<std::string> {
        std::string line;
        while (std::getline(in, line)) {
            ++*line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                auto j = nlohmann::json::parse(line);
                return j.at("text").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("source line " + std::to_string(*line_no) + ": " + e.what());
            }
        }
        return std::nullopt;
    };
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "manifest.json", manifest_to_json(corpus.manifest).dump(2) + "\n");

    std::vector<std::uint8_t> bin;
    for (const auto& d : corpus.docs) {
        put_le(bin, static_cast<std::uint32_t>(d.doc.tokens.size()));
        for (TokenId t : d.doc.tokens) put_le(bin, t);
    }
    write_file(dir / "tokens.bin", std::string(bin.begin(), bin.end()));

    std::string texts;
    for (const auto& d : corpus.docs) {
        texts += json{{"doc_id", d.doc.doc_id}, {"source_index", d.source_index}, {"text", d.text}}.dump(
                     -1, ' ', false, nlohmann::json::error_handler_t::replace) +
                 "\n";
    }
    write_file(dir / "texts.jsonl", texts);
    write_file(dir / "vocab.json", json(corpus.vocab).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus c;
    try {
        c.manifest = manifest_from_json(json::parse(read_file(dir / "manifest.json")));
        c.vocab = json::parse(read_file(dir / "vocab.json")).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corpus " + dir.string() + ": " + e.what());
    }

    const std::string bin = read_file(dir / "tokens.bin");
    const auto* p = reinterpret_cast<const std::uint8_t*>(bin.data());
    std::size_t off = 0;
    while (off < bin.size()) {
        if (bin.size() - off < 4) throw ParseError("corpus tokens.bin: truncated length at byte " + std::to_string(off));
        const auto n = get_le<std::uint32_t>(p + off);
        off += 4;
        if ((bin.size() - off) / 4 < n) throw ParseError("corpus tokens.bin: truncated doc at byte " + std::to_string(off));
        CorpusDoc d;
        d.doc.doc_id = c.docs.size();
        d.doc.tokens.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) d.doc.tokens[i] = get_le<std::uint32_t>(p + off + 4 * i);
        off += std::size_t{n} * 4;
        c.docs.push_back(std::move(d));
    }

    std::ifstream texts(dir / "texts.jsonl");
    std::string line;
    std::size_t i = 0;
    while (std::getline(texts, line)) {
        if (line.empty()) continue;
        if (i >= c.docs.size()) throw ParseError("corpus texts.jsonl: more texts than token docs");
        try {
            auto j = json::parse(line);
            c.docs[i].source_index = j.at("source_index").get<std::uint64_t>();
            c.docs[i].text = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corpus texts.jsonl line " + std::to_string(i + 1) + ": " + e.what());
        }
        ++i;
    }
    if (c.docs.size() != c.manifest.n_docs) throw ParseError("corpus: manifest n_docs disagrees with tokens.bin");
    return c;
}

} // namespace gluscope
