#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "gluscope/activation_math.hpp"
#include "gluscope/activations.hpp"

namespace gluscope {

// Binary activation dump, little-endian, no padding:
//   header: "GLUA" | u32 version | u32 n_layers | u32 d_mlp | u8 activation
//   blocks: u64 doc_id | u32 n_tokens | n_tokens*n_layers*d_mlp (f32 x_gate, f32 x_in)
struct DumpHeader {
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kBytes = 17;
    static constexpr std::size_t kBlockHeaderBytes = 12;

    std::uint32_t version = kVersion;
    std::uint32_t n_layers = 1;
    std::uint32_t d_mlp = 1;
    ActivationKind activation = ActivationKind::SwiGLU;

    bool operator==(const DumpHeader&) const = default;
};

// A dump block is exactly a DocActivations (n_positions = n_tokens).
using DumpDocBlock = DocActivations;

class DumpWriter {
public:
    // Writes the header immediately. Throws ContractError on zero counts.
    DumpWriter(std::ostream& out, const DumpHeader& header);

    // Validates the whole block before writing any byte of it.
    void write(const DumpDocBlock& block);

    std::uint64_t bytes_written() const { return bytes_; }

private:
    std::ostream& out_;
    DumpHeader header_;
    std::uint64_t bytes_ = 0;
};

class DumpReader {
public:
    // Parses the header. Throws ParseError with the byte offset on failure.
    explicit DumpReader(std::istream& in);

    const DumpHeader& header() const { return header_; }

    // Next block, or nullopt at a clean end of stream. Holds one block at a time.
    std::optional<DumpDocBlock> next();

private:
    void read_exact(std::uint8_t* dst, std::size_t n, const char* what);

    std::istream& in_;
    DumpHeader header_;
    std::uint64_t offset_ = 0;
    std::optional<DocId> last_doc_;
};

} // namespace gluscope
