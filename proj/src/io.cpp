#include "nudge/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "nudge/error.hpp"

namespace nudge {

namespace {

constexpr char kMagic[4] = {'N', 'U', 'D', 'G'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
  }
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U value = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) value |= static_cast<U>(p[b]) << (8 * b);
  return value;
}

std::size_t dtype_size(DType dtype) { return dtype == DType::Float32 ? 4 : 8; }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const char* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw Error("failed writing " + path.string());
}

bool parse_index(std::string_view field, std::size_t& out) {
  if (field.empty()) return false;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

bool parse_real(std::string_view field, double& out) {
  if (field.empty()) return false;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const EmbeddingMatrix& matrix, DType dtype) {
  if (dtype != DType::Float32 && dtype != DType::Float64) {
    throw InvalidArgument("unknown dtype");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderSize + matrix.values().size() * dtype_size(dtype));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.insert(out.end(), 3, 0);
  put_le<std::uint64_t>(out, matrix.rows());
  put_le<std::uint64_t>(out, matrix.dim());
  for (double v : matrix.values()) {
    if (dtype == DType::Float32) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) throw InvalidArgument("value overflows float32: " + std::to_string(v));
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    } else {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

EmbeddingFile decode_embeddings(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kEmbeddingHeaderSize) {
    throw FormatError("embedding file too short for header (" + std::to_string(bytes.size()) +
                      " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected NUDG");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kEmbeddingFormatVersion) {
    throw FormatError("unsupported embedding file version " + std::to_string(version));
  }
  const std::uint8_t code = bytes[8];
  if (code != 1 && code != 2) throw FormatError("unknown dtype code " + std::to_string(code));
  if (bytes[9] != 0 || bytes[10] != 0 || bytes[11] != 0) {
    throw FormatError("nonzero header padding");
  }
  const DType dtype = static_cast<DType>(code);
  const auto rows = get_le<std::uint64_t>(bytes.data() + 12);
  const auto dim = get_le<std::uint64_t>(bytes.data() + 20);
  if (rows == 0 || dim == 0) throw FormatError("embedding file declares an empty matrix");

  const std::size_t width = dtype_size(dtype);
  const std::uint64_t body = bytes.size() - kEmbeddingHeaderSize;
  if (dim > std::numeric_limits<std::uint64_t>::max() / rows ||
      rows * dim > std::numeric_limits<std::uint64_t>::max() / width) {
    throw FormatError("embedding file dimensions overflow");
  }
  const std::uint64_t expected = rows * dim * width;
  if (body != expected) {
    throw FormatError("embedding body has " + std::to_string(body) + " bytes, expected " +
                      std::to_string(expected));
  }

  std::vector<double> values(rows * dim);
  const std::uint8_t* p = bytes.data() + kEmbeddingHeaderSize;
  for (std::size_t k = 0; k < values.size(); ++k, p += width) {
    values[k] = dtype == DType::Float32
                    ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                    : std::bit_cast<double>(get_le<std::uint64_t>(p));
    if (!std::isfinite(values[k])) {
      throw FormatError("non-finite value at row " + std::to_string(k / dim) + ", column " +
                        std::to_string(k % dim));
    }
  }
  return {EmbeddingMatrix(rows, dim, std::move(values)), dtype};
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  try {
    return decode_embeddings(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingMatrix& matrix,
                          DType dtype) {
  const auto bytes = encode_embeddings(matrix, dtype);
  write_bytes(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

LabelSet parse_labels(std::string_view text, const LabelBounds& bounds) {
  std::vector<LabelEntry> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto where = "label line " + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3) {
      throw FormatError(where + ": expected query<TAB>record[<TAB>relevance]");
    }
    LabelEntry e;
    if (!parse_index(fields[0], e.query)) throw FormatError(where + ": bad query index");
    if (!parse_index(fields[1], e.record)) throw FormatError(where + ": bad record index");
    if (fields.size() == 3) {
      if (!parse_real(fields[2], e.relevance)) throw FormatError(where + ": bad relevance");
      if (!(e.relevance > 0.0) || !std::isfinite(e.relevance)) {
        throw FormatError(where + ": relevance must be positive");
      }
    }
    if (bounds.query_count && e.query >= *bounds.query_count) {
      throw FormatError(where + ": query index " + std::to_string(e.query) +
                        " out of range (queries: " + std::to_string(*bounds.query_count) + ")");
    }
    if (bounds.record_count && e.record >= *bounds.record_count) {
      throw FormatError(where + ": record index " + std::to_string(e.record) +
                        " out of range (records: " + std::to_string(*bounds.record_count) + ")");
    }
    entries.push_back(e);
  }
  return LabelSet(std::move(entries));
}

std::string format_labels(const LabelSet& labels) {
  std::string out;
  char buf[64];
  for (const auto& e : labels.entries()) {
    out += std::to_string(e.query);
    out += '\t';
    out += std::to_string(e.record);
    if (e.relevance != 1.0) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), e.relevance);
      out += '\t';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

LabelSet read_label_file(const std::filesystem::path& path, const LabelBounds& bounds) {
  const auto bytes = read_bytes(path);
  try {
    return parse_labels(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        bounds);
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_label_file(const std::filesystem::path& path, const LabelSet& labels) {
  const auto text = format_labels(labels);
  write_bytes(path, text.data(), text.size());
}

}  // namespace nudge
