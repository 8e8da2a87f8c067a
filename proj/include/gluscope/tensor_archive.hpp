#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gluscope {

enum class DType { F32, F64 };

struct TensorEntry {
    DType dtype = DType::F32;
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> bytes; // little-endian payload

    std::size_t numel() const;
};

// In-memory safetensors container: an 8-byte little-endian header length,
// a JSON header mapping names to {dtype, shape, data_offsets}, then raw data.
// String metadata lives under the "__metadata__" key.
class TensorArchive {
public:
    void put(const std::string& name, std::vector<std::size_t> shape, std::span<const double> values,
             DType dtype = DType::F32);

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const TensorEntry& entry(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
    std::vector<std::string> names() const;
    void erase(const std::string& name) { tensors_.erase(name); }

    std::map<std::string, std::string>& metadata() { return metadata_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    void write(std::ostream& out) const;
    static TensorArchive read(std::istream& in);

    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);

private:
    std::map<std::string, TensorEntry> tensors_;
    std::map<std::string, std::string> metadata_;
};

} // namespace gluscope
