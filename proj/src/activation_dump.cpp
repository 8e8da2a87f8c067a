#include "gluscope/activation_dump.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <vector>

#include "gluscope/errors.hpp"
#include "gluscope/io_util.hpp"

namespace gluscope {

namespace {

constexpr char kMagic[4] = {'G', 'L', 'U', 'A'};

std::string at(std::uint64_t offset) { return " at byte offset " + std::to_string(offset); }

} // namespace

DumpWriter::DumpWriter(std::ostream& out, const DumpHeader& header) : out_(out), header_(header) {
    if (header.version != DumpHeader::kVersion) throw ContractError("dump header: unsupported version");
    if (header.n_layers < 1 || header.d_mlp < 1) throw ContractError("dump header: counts must be >= 1");
    std::vector<std::uint8_t> buf(kMagic, kMagic + 4);
    put_le(buf, header.version);
    put_le(buf, header.n_layers);
    put_le(buf, header.d_mlp);
    buf.push_back(static_cast<std::uint8_t>(header.activation));
    out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out_) throw Error("dump: write failed");
    bytes_ = buf.size();
}

void DumpWriter::write(const DumpDocBlock& block) {
    if (block.n_layers != header_.n_layers || block.d_mlp != header_.d_mlp) {
        throw ContractError("dump doc " + std::to_string(block.doc_id) + ": shape does not match header");
    }
    const std::size_t expected = std::size_t{block.n_positions} * block.n_layers * block.d_mlp * 2;
    if (block.pairs.size() != expected) {
        throw ContractError("dump doc " + std::to_string(block.doc_id) + ": payload holds " +
                            std::to_string(block.pairs.size()) + " values, expected " + std::to_string(expected));
    }
    for (float v : block.pairs) {
        if (!std::isfinite(v)) throw StreamError("dump doc " + std::to_string(block.doc_id) + ": non-finite value");
    }
    std::vector<std::uint8_t> buf;
    buf.reserve(DumpHeader::kBlockHeaderBytes + expected * 4);
    put_le(buf, static_cast<std::uint64_t>(block.doc_id));
    put_le(buf, block.n_positions);
    for (float v : block.pairs) put_le(buf, std::bit_cast<std::uint32_t>(v));
    out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out_) throw Error("dump: write failed");
    bytes_ += buf.size();
}

DumpReader::DumpReader(std::istream& in) : in_(in) {
    std::uint8_t buf[DumpHeader::kBytes];
    read_exact(buf, 4, "magic");
    if (!std::equal(buf, buf + 4, kMagic)) throw ParseError("dump: bad magic" + at(0));
    read_exact(buf + 4, DumpHeader::kBytes - 4, "header");
    header_.version = get_le<std::uint32_t>(buf + 4);
    header_.n_layers = get_le<std::uint32_t>(buf + 8);
    header_.d_mlp = get_le<std::uint32_t>(buf + 12);
    const std::uint8_t act = buf[16];
    if (header_.version != DumpHeader::kVersion) {
        throw ParseError("dump: unsupported version " + std::to_string(header_.version) + at(4));
    }
    if (header_.n_layers < 1) throw ParseError("dump: n_layers must be >= 1" + at(8));
    if (header_.d_mlp < 1) throw ParseError("dump: d_mlp must be >= 1" + at(12));
    if (act > 1) throw ParseError("dump: unknown activation code " + std::to_string(act) + at(16));
    header_.activation = static_cast<ActivationKind>(act);
}

void DumpReader::read_exact(std::uint8_t* dst, std::size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
        std::string msg = std::string("dump: truncated ") + what + at(offset_ + got);
        if (last_doc_) {
            msg += " (last complete doc_id " + std::to_string(*last_doc_) + ")";
        } else if (offset_ >= DumpHeader::kBytes) {
            msg += " (no complete doc)";
        }
        throw ParseError(msg);
    }
    offset_ += n;
}

std::optional<DumpDocBlock> DumpReader::next() {
    if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;
    std::uint8_t hdr[DumpHeader::kBlockHeaderBytes];
    read_exact(hdr, sizeof hdr, "block header");
    const auto doc_id = get_le<std::uint64_t>(hdr);
    const auto n_tokens = get_le<std::uint32_t>(hdr + 8);

    DumpDocBlock block(doc_id, n_tokens, header_.n_layers, header_.d_mlp);
    std::vector<std::uint8_t> raw(block.pairs.size() * 4);
    read_exact(raw.data(), raw.size(), "block payload");
    for (std::size_t i = 0; i < block.pairs.size(); ++i) {
        block.pairs[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw.data() + 4 * i));
    }
    last_doc_ = doc_id;
    return block;
}

} // namespace gluscope
