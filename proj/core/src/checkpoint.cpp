#include "asd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "asd/errors.hpp"

namespace asd {

void append_le_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_le_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_le_double(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    append_le_u64(out, bits);
}

uint64_t read_le_u64(const std::string& in, size_t& pos) {
    if (pos + 8 > in.size()) throw IoError("truncated file while reading u64");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

uint32_t read_le_u32(const std::string& in, size_t& pos) {
    if (pos + 4 > in.size()) throw IoError("truncated file while reading u32");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

double read_le_double(const std::string& in, size_t& pos) {
    uint64_t bits = read_le_u64(in, pos);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string double_to_hex(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[bits & 0xf];
        bits >>= 4;
    }
    return s;
}

double hex_to_double(const std::string& hex) {
    if (hex.size() != 16) throw IoError("hex double must be 16 digits, got '" + hex + "'");
    uint64_t bits = 0;
    for (char c : hex) {
        bits <<= 4;
        if (c >= '0' && c <= '9') bits |= static_cast<uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') bits |= static_cast<uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') bits |= static_cast<uint64_t>(c - 'A' + 10);
        else throw IoError("bad hex digit in '" + hex + "'");
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path + "'");
}

void save_checkpoint(const std::string& path, const ParameterStore& params, const MetaMap& meta) {
    std::string blob;
    std::ostringstream manifest;
    manifest << "ASDCKPT 1\n";
    for (auto& [k, v] : meta) manifest << "meta " << k << " " << v << "\n";
    for (auto& [name, t] : params) {
        manifest << "tensor " << name << " " << t.rank();
        for (int e : t.shape()) manifest << " " << e;
        manifest << " " << blob.size() << "\n";
        for (double x : t.data()) append_le_double(blob, x);
    }
    // checksum covers the raw blob only
    manifest << "data " << blob.size() << " " << std::hex << fnv1a64(blob) << "\n";
    write_file(path, manifest.str() + blob);
}

ParameterStore load_checkpoint(const std::string& path, MetaMap* meta) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string line;
    if (!std::getline(in, line) || line != "ASDCKPT 1")
        throw IoError("'" + path + "': bad magic or unsupported checkpoint version");

    struct Entry {
        std::string name;
        std::vector<int> shape;
        size_t offset;
    };
    std::vector<Entry> entries;
    size_t blob_size = 0;
    uint64_t checksum = 0;
    size_t header_end = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            std::string k, v;
            ls >> k;
            std::getline(ls, v);
            if (!v.empty() && v[0] == ' ') v.erase(0, 1);
            if (meta) (*meta)[k] = v;
        } else if (kind == "tensor") {
            Entry e;
            int rank;
            ls >> e.name >> rank;
            for (int i = 0; i < rank; ++i) {
                int d;
                ls >> d;
                e.shape.push_back(d);
            }
            ls >> e.offset;
            if (!ls) throw IoError("'" + path + "': malformed tensor line");
            entries.push_back(std::move(e));
        } else if (kind == "data") {
            std::string hex;
            ls >> blob_size >> hex;
            if (!ls) throw IoError("'" + path + "': malformed data line");
            checksum = std::stoull(hex, nullptr, 16);
            header_end = static_cast<size_t>(in.tellg());
            break;
        } else {
            throw IoError("'" + path + "': unknown manifest line '" + kind + "'");
        }
    }
    if (header_end == 0) throw IoError("'" + path + "': missing data section");
    if (bytes.size() - header_end != blob_size)
        throw IoError("'" + path + "': truncated blob (expected " + std::to_string(blob_size) +
                      " bytes, found " + std::to_string(bytes.size() - header_end) + ")");
    const std::string blob = bytes.substr(header_end);
    if (fnv1a64(blob) != checksum) throw IoError("'" + path + "': checksum failure");

    ParameterStore params;
    for (auto& e : entries) {
        Tensor t(e.shape);
        size_t pos = e.offset;
        if (pos + 8 * t.numel() > blob.size())
            throw IoError("'" + path + "': tensor '" + e.name + "' overruns blob");
        for (size_t i = 0; i < t.numel(); ++i) t[i] = read_le_double(blob, pos);
        params.insert(e.name, std::move(t));
    }
    return params;
}

}  // namespace asd
