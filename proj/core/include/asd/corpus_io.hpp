#pragma once

#include <string>

#include "asd/corpus.hpp"

namespace asd {

// Self-describing binary corpus file: magic + version, generation config,
// speaker table, scenario blocks with raw arrays, trailing FNV-1a checksum.
// write_corpus / read_corpus round-trip bit-exactly; a corrupted byte fails
// the checksum instead of yielding garbage data.
void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

std::string serialize_corpus(const Corpus& corpus);
Corpus deserialize_corpus(const std::string& bytes);

}  // namespace asd
