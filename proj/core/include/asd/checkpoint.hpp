#pragma once

#include <map>
#include <string>

#include "asd/params.hpp"

namespace asd {

// Checkpoint file: a text manifest (meta fields, then one line per tensor
// with name, shape and byte offset) followed by a single blob of raw
// little-endian 64-bit floats. Round-trips bit-exactly.
//
//   ASDCKPT 1
//   meta <key> <value>
//   tensor <name> <rank> <extents...> <offset>
//   data <nbytes> <fnv1a64-hex>
//   <raw doubles>

using MetaMap = std::map<std::string, std::string>;

void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const MetaMap& meta = {});
ParameterStore load_checkpoint(const std::string& path, MetaMap* meta = nullptr);

// Little-endian scalar encoding shared with the corpus format.
void append_le_double(std::string& out, double v);
void append_le_u64(std::string& out, uint64_t v);
void append_le_u32(std::string& out, uint32_t v);
double read_le_double(const std::string& in, size_t& pos);
uint64_t read_le_u64(const std::string& in, size_t& pos);
uint32_t read_le_u32(const std::string& in, size_t& pos);

uint64_t fnv1a64(const std::string& bytes);

// Exact text encoding of a double as 16 hex digits of its LE bit pattern.
std::string double_to_hex(double v);
double hex_to_double(const std::string& hex);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace asd
