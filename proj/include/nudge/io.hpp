#pragma once

// Binary embedding files and tab-separated label files.
//
// Embedding file layout (all integers little-endian):
//   bytes 0-3   "NUDG"
//   bytes 4-7   u32 version = 1
//   byte  8     u8 dtype: 1 = float32, 2 = float64
//   bytes 9-11  zero padding
//   bytes 12-19 u64 rows
//   bytes 20-27 u64 dim
//   then rows * dim little-endian values, row-major.
//
// Label file: one "query<TAB>record[<TAB>relevance]" entry per line, 0-based
// indices, relevance defaulting to 1; lines starting with '#' and blank lines
// are ignored.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nudge/core.hpp"

namespace nudge {

enum class DType : std::uint8_t { Float32 = 1, Float64 = 2 };

inline constexpr std::size_t kEmbeddingHeaderSize = 28;
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

struct EmbeddingFile {
  EmbeddingMatrix matrix;
  DType dtype = DType::Float64;
};

std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& matrix, DType dtype);
EmbeddingFile decode_embeddings(const std::vector<std::uint8_t>& bytes);

EmbeddingFile read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const std::filesystem::path& path, const EmbeddingMatrix& matrix,
                          DType dtype);

/// Optional index bounds checked while parsing.
struct LabelBounds {
  std::optional<std::size_t> query_count;
  std::optional<std::size_t> record_count;
};

LabelSet parse_labels(std::string_view text, const LabelBounds& bounds = {});
std::string format_labels(const LabelSet& labels);

LabelSet read_label_file(const std::filesystem::path& path, const LabelBounds& bounds = {});
void write_label_file(const std::filesystem::path& path, const LabelSet& labels);

}  // namespace nudge
