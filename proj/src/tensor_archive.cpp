#include "gluscope/tensor_archive.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "gluscope/errors.hpp"
#include "gluscope/io_util.hpp"

namespace gluscope {

namespace {

std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

const char* dtype_name(DType d) { return d == DType::F32 ? "F32" : "F64"; }

DType parse_dtype(const std::string& s, const std::string& tensor) {
    if (s == "F32") return DType::F32;
    if (s == "F64") return DType::F64;
    throw ParseError("tensor '" + tensor + "': unsupported dtype " + s);
}

} // namespace

std::size_t TensorEntry::numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void TensorArchive::put(const std::string& name, std::vector<std::size_t> shape, std::span<const double> values,
                        DType dtype) {
    TensorEntry e;
    e.dtype = dtype;
    e.shape = std::move(shape);
    if (e.numel() != values.size()) {
        throw ContractError("tensor '" + name + "': shape holds " + std::to_string(e.numel()) + " elements, got " +
                            std::to_string(values.size()));
    }
    e.bytes.reserve(values.size() * dtype_size(dtype));
    for (double v : values) {
        if (dtype == DType::F32) {
            put_le(e.bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
            put_le(e.bytes, std::bit_cast<std::uint64_t>(v));
        }
    }
    tensors_[name] = std::move(e);
}

const TensorEntry& TensorArchive::entry(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw LoadError("missing tensor '" + name + "'");
    return it->second;
}

std::vector<double> TensorArchive::values(const std::string& name) const {
    const auto& e = entry(name);
    std::vector<double> out(e.numel());
    const std::uint8_t* p = e.bytes.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (e.dtype == DType::F32) {
            out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
        } else {
            out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
        }
    }
    return out;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tensors_) out.push_back(k);
    return out;
}

void TensorArchive::write(std::ostream& out) const {
    nlohmann::json header = nlohmann::json::object();
    if (!metadata_.empty()) header["__metadata__"] = metadata_;
    std::uint64_t offset = 0;
    for (const auto& [name, e] : tensors_) {
        header[name] = {{"dtype", dtype_name(e.dtype)},
                        {"shape", e.shape},
                        {"data_offsets", {offset, offset + e.bytes.size()}}};
        offset += e.bytes.size();
    }
    std::string text = header.dump();
    while (text.size() % 8 != 0) text.push_back(' ');

    std::vector<std::uint8_t> len;
    put_le(len, static_cast<std::uint64_t>(text.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, e] : tensors_) {
        out.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
    }
    if (!out) throw Error("tensor archive: write failed");
}

TensorArchive TensorArchive::read(std::istream& in) {
    std::uint8_t len_bytes[8];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) throw ParseError("tensor archive: truncated header length");
    const auto header_len = get_le<std::uint64_t>(len_bytes);
    if (header_len > (std::uint64_t{1} << 30)) throw ParseError("tensor archive: implausible header length");

    std::string text(header_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
        throw ParseError("tensor archive: truncated header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tensor archive: bad header json: ") + e.what());
    }
    if (!header.is_object()) throw ParseError("tensor archive: header is not an object");

    std::vector<std::uint8_t> data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    TensorArchive ar;
    for (const auto& [name, info] : header.items()) {
        if (name == "__metadata__") {
            for (const auto& [k, v] : info.items()) {
                if (!v.is_string()) throw ParseError("tensor archive: metadata '" + k + "' is not a string");
                ar.metadata_[k] = v.get<std::string>();
            }
            continue;
        }
        try {
            TensorEntry e;
            e.dtype = parse_dtype(info.at("dtype").get<std::string>(), name);
            e.shape = info.at("shape").get<std::vector<std::size_t>>();
            auto offs = info.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (offs.size() != 2 || offs[0] > offs[1] || offs[1] > data.size()) {
                throw ParseError("tensor '" + name + "': data_offsets out of range");
            }
            if (offs[1] - offs[0] != e.numel() * dtype_size(e.dtype)) {
                throw ParseError("tensor '" + name + "': byte range does not match shape");
            }
            e.bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(offs[0]),
                           data.begin() + static_cast<std::ptrdiff_t>(offs[1]));
            ar.tensors_[name] = std::move(e);
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("tensor '" + name + "': " + ex.what());
        }
    }
    return ar;
}

void TensorArchive::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write(out);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read(in);
}

} // namespace gluscope
