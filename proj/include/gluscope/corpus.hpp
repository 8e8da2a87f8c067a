#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gluscope/activations.hpp"
#include "gluscope/model.hpp"

namespace gluscope {

// Pluggable text -> token ids mapping. Implementations must be total and
// deterministic; `vocabulary()` gives display strings indexed by id.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    virtual std::vector<std::string> vocabulary() const = 0;
    virtual std::string name() const = 0;
};

// Bytes map to ids 0..255. Ids from 256 up are special tokens; 256 is
// "<|endoftext|>".
class ByteTokenizer final : public Tokenizer {
public:
    static constexpr TokenId kEndOfText = 256;

    std::vector<TokenId> encode(std::string_view text) const override;
    std::vector<std::string> vocabulary() const override;
    std::string name() const override { return "bytes"; }
};

// Whitespace-separated words looked up in a fixed vocabulary; unknown words
// map to `unknown_id`.
class WordTokenizer final : public Tokenizer {
public:
    WordTokenizer(std::vector<std::string> vocab, TokenId unknown_id);

    std::vector<TokenId> encode(std::string_view text) const override;
    std::vector<std::string> vocabulary() const override { return vocab_; }
    std::string name() const override { return "words"; }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> ids_;
    TokenId unknown_;
};

struct CorpusSpec {
    std::uint64_t token_budget = 20'000'000;
    std::uint64_t max_doc_tokens = 1024;
    TokenId prefix_token = ByteTokenizer::kEndOfText;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CorpusManifest {
    std::uint64_t total_tokens = 0;
    std::uint64_t n_docs = 0;
    CorpusSpec spec;
    std::string source;
    std::string tokenizer;
    // Set when the source ran out before the budget was reached.
    bool source_exhausted = false;
};

struct CorpusDoc {
    TokenizedDoc doc;               // doc_id is the position in the corpus
    std::uint64_t source_index = 0; // index of the document in the source stream
    std::string text;
};

struct Corpus {
    std::vector<CorpusDoc> docs;
    CorpusManifest manifest;
    std::vector<std::string> vocab;

    const CorpusDoc* find(DocId id) const { return id < docs.size() ? &docs[id] : nullptr; }
    std::string token_text(TokenId id) const;
};

// Single-pass source of raw documents; returns nullopt when exhausted.
using TextSource = std::function<std::optional<std::string>()>;

// Shuffles the source with a seeded Fisher-Yates permutation, then takes
// documents (prefixed and truncated) until the token budget is reached or
// exceeded by the last one taken.
Corpus sample_corpus(const TextSource& source, const Tokenizer& tokenizer, const CorpusSpec& spec,
                     std::string source_id = "");

// Reads one {"text": ...} JSON object per line.
TextSource jsonl_text_source(std::istream& in);

// Directory layout: manifest.json, tokens.bin, texts.jsonl, vocab.json.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// Seeded permutation of [0, n). Uses mt19937_64 with rejection sampling, so
// the order is identical across standard library implementations.
std::vector<std::uint64_t> shuffled_order(std::uint64_t n, std::uint64_t seed);

} // namespace gluscope
