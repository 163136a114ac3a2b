#include "vecdenoise/embed_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace vecdenoise::io {

namespace {

bool is_field_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_field_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_field_space(line[i])) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::size_t parse_count(std::string_view field, const std::string& what) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("invalid " + what + " '" + std::string(field) + "'");
  }
  return value;
}

// Accumulates rows while honouring the lowercase/dedup policy.
class RowCollector {
 public:
  explicit RowCollector(bool lowercase) : lowercase_(lowercase) {}

  // Returns false if the row was dropped as a post-lowercasing duplicate.
  bool add(std::string token, std::vector<double> row, const std::string& where) {
    if (lowercase_) token = to_lower(token);
    if (vocab_.contains(token)) {
      if (lowercase_) return false;
      throw DataError("duplicate token '" + token + "' at " + where);
    }
    vocab_.add(std::move(token));
    values_.insert(values_.end(), row.begin(), row.end());
    return true;
  }

  EmbeddingMatrix finish(std::size_t dim) {
    const auto rows = static_cast<Eigen::Index>(vocab_.size());
    Matrix data(rows, static_cast<Eigen::Index>(dim));
    if (rows > 0) {
      std::copy(values_.begin(), values_.end(), data.data());
    }
    return EmbeddingMatrix(std::move(vocab_), std::move(data));
  }

 private:
  bool lowercase_;
  Vocabulary vocab_;
  std::vector<double> values_;
};

float read_le_float(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int b = 3; b >= 0; --b) bits = (bits << 8) | bytes[b];
  return std::bit_cast<float>(bits);
}

void write_le_float(std::ostream& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  std::array<char, 4> bytes{};
  for (auto& byte : bytes) {
    byte = static_cast<char>(bits & 0xffu);
    bits >>= 8;
  }
  out.write(bytes.data(), bytes.size());
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) {
  words_.reserve(words.size());
  for (auto& w : words) add(std::move(w));
}

std::size_t Vocabulary::add(std::string token) {
  const std::size_t row = words_.size();
  auto [it, inserted] = index_.emplace(token, row);
  if (!inserted) throw DataError("duplicate token '" + token + "'");
  words_.push_back(std::move(token));
  return row;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix::EmbeddingMatrix(Vocabulary vocab, Matrix data)
    : vocab_(std::move(vocab)), data_(std::move(data)) {
  if (static_cast<std::size_t>(data_.rows()) != vocab_.size()) {
    throw DataError("embedding has " + std::to_string(data_.rows()) + " rows but " +
                    std::to_string(vocab_.size()) + " tokens");
  }
  if (!data_.allFinite()) throw DataError("embedding contains non-finite values");
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
  });
  return out;
}

std::string format_number(double value, std::optional<int> precision) {
  std::array<char, 512> buf{};
  std::to_chars_result res;
  if (precision) {
    res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed,
                        *precision);
  } else {
    res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  }
  if (res.ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf.data(), res.ptr);
}

double parse_number(std::string_view field) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) {
    throw DataError("number out of range '" + std::string(field) + "'");
  }
  if (ec != std::errc() || ptr != last) {
    throw DataError("invalid number '" + std::string(field) + "'");
  }
  return value;
}

EmbeddingMatrix parse_embedding_text(std::istream& in, const TextOptions& opts) {
  RowCollector rows(opts.lowercase);
  std::optional<std::size_t> declared_rows;
  std::optional<std::size_t> dim;
  std::size_t data_lines = 0;
  std::size_t line_no = 0;
  std::string line;

  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);

    if (opts.header && !declared_rows) {
      if (fields.size() != 2) throw DataError("expected header 'V L' at " + where);
      declared_rows = parse_count(fields[0], "vocabulary size at " + where);
      dim = parse_count(fields[1], "dimension at " + where);
      if (*dim == 0) throw DataError("dimension must be >= 1 at " + where);
      continue;
    }

    if (!dim) dim = fields.size() - 1;
    if (*dim == 0) throw DataError("row has no values at " + where);
    if (fields.size() != *dim + 1) {
      throw DataError("ragged row at " + where + ": expected " + std::to_string(*dim) +
                      " values, got " + std::to_string(fields.size() - 1));
    }
    std::vector<double> values(*dim);
    for (std::size_t j = 0; j < *dim; ++j) {
      try {
        values[j] = parse_number(fields[j + 1]);
      } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " at " + where);
      }
      if (!std::isfinite(values[j])) throw DataError("non-finite value at " + where);
    }
    rows.add(std::string(fields[0]), std::move(values), where);
    ++data_lines;
  }

  if (opts.header && !declared_rows) throw DataError("missing header line");
  if (!dim) throw DataError("no embedding rows found");
  if (declared_rows && *declared_rows != data_lines) {
    throw DataError("header declares " + std::to_string(*declared_rows) + " rows but file has " +
                    std::to_string(data_lines));
  }
  return rows.finish(*dim);
}

EmbeddingMatrix parse_embedding_binary(std::istream& in, bool lowercase) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("truncated stream at byte offset 0: no header");
  std::size_t offset = header.size() + 1;
  auto fields = split_fields(header);
  if (fields.size() != 2) throw DataError("expected binary header 'V L'");
  const std::size_t vocab_size = parse_count(fields[0], "vocabulary size");
  const std::size_t dim = parse_count(fields[1], "dimension");
  if (dim == 0) throw DataError("dimension must be >= 1");

  RowCollector rows(lowercase);
  std::vector<unsigned char> raw(dim * 4);
  for (std::size_t r = 0; r < vocab_size; ++r) {
    int c = in.get();
    while (c == '\n' || c == ' ' || c == '\r' || c == '\t') {
      ++offset;
      c = in.get();
    }
    std::string token;
    while (c != std::char_traits<char>::eof() && c != ' ') {
      token.push_back(static_cast<char>(c));
      ++offset;
      c = in.get();
    }
    if (c == std::char_traits<char>::eof()) {
      throw DataError("truncated stream at byte offset " + std::to_string(offset) + " (record " +
                      std::to_string(r) + " of " + std::to_string(vocab_size) + ")");
    }
    ++offset;  // the separating space

    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != raw.size()) {
      throw DataError("truncated stream at byte offset " + std::to_string(offset + got) +
                      " inside vector for '" + token + "'");
    }
    std::vector<double> values(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      values[j] = static_cast<double>(read_le_float(raw.data() + 4 * j));
      if (!std::isfinite(values[j])) {
        throw DataError("non-finite value for '" + token + "' at byte offset " +
                        std::to_string(offset + 4 * j));
      }
    }
    offset += raw.size();
    rows.add(std::move(token), std::move(values), "byte offset " + std::to_string(offset));
  }

  int c = in.get();
  while (c == '\n' || c == ' ' || c == '\r' || c == '\t') c = in.get();
  if (c != std::char_traits<char>::eof()) {
    throw DataError("header declares " + std::to_string(vocab_size) +
                    " records but stream has more data");
  }
  return rows.finish(dim);
}

void write_embedding_text(std::ostream& out, const EmbeddingMatrix& emb,
                          std::optional<int> precision) {
  out << emb.size() << ' ' << emb.dim() << '\n';
  const Matrix& data = emb.data();
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << emb.vocab().word(i);
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      out << ' ' << format_number(data(static_cast<Eigen::Index>(i), j), precision);
    }
    out << '\n';
  }
}

void write_embedding_binary(std::ostream& out, const EmbeddingMatrix& emb) {
  out << emb.size() << ' ' << emb.dim() << '\n';
  const Matrix& data = emb.data();
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << emb.vocab().word(i) << ' ';
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      write_le_float(out, static_cast<float>(data(static_cast<Eigen::Index>(i), j)));
    }
    out << '\n';
  }
}

RestrictResult restrict_vocabulary(const EmbeddingMatrix& emb,
                                   const std::unordered_set<std::string>& keep) {
  std::vector<Eigen::Index> rows;
  Vocabulary vocab;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const auto& w = emb.vocab().word(i);
    if (keep.contains(w)) {
      rows.push_back(static_cast<Eigen::Index>(i));
      vocab.add(w);
    }
  }
  Matrix data(static_cast<Eigen::Index>(rows.size()), emb.dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    data.row(static_cast<Eigen::Index>(r)) = emb.data().row(rows[r]);
  }
  RestrictResult result{EmbeddingMatrix(std::move(vocab), std::move(data)), rows.size(),
                        keep.size()};
  return result;
}

void write_matrix_text(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_number(m(i, j));
    }
    out << '\n';
  }
}

Matrix parse_matrix_text(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    fields = split_fields(line);
    if (!fields.empty()) break;
  }
  if (fields.size() != 2) throw DataError("expected matrix header 'rows cols'");
  const auto rows = static_cast<Eigen::Index>(parse_count(fields[0], "row count"));
  const auto cols = static_cast<Eigen::Index>(parse_count(fields[1], "column count"));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw DataError("matrix truncated after " + std::to_string(i) + " of " +
                      std::to_string(rows) + " rows");
    }
    ++line_no;
    fields = split_fields(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols) {
      throw DataError("ragged matrix row at line " + std::to_string(line_no));
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = parse_number(fields[static_cast<std::size_t>(j)]);
      if (!std::isfinite(m(i, j))) {
        throw DataError("non-finite matrix entry at line " + std::to_string(line_no));
      }
    }
  }
  return m;
}

Format parse_format(std::string_view name) {
  if (name == "text" || name == "word2vec-text") return Format::Text;
  if (name == "glove") return Format::Glove;
  if (name == "binary" || name == "word2vec-binary") return Format::Binary;
  throw ConfigError("unknown embedding format '" + std::string(name) +
                    "' (expected text, glove or binary)");
}

EmbeddingMatrix load_embedding(const std::filesystem::path& path, Format format,
                               bool lowercase) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    switch (format) {
      case Format::Text:
        return parse_embedding_text(in, {.header = true, .lowercase = lowercase});
      case Format::Glove:
        return parse_embedding_text(in, {.header = false, .lowercase = lowercase});
      case Format::Binary:
        return parse_embedding_binary(in, lowercase);
    }
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  throw DataError("unreachable format");
}

void save_embedding_text(const std::filesystem::path& path, const EmbeddingMatrix& emb,
                         std::optional<int> precision) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_embedding_text(out, emb, precision);
  if (!out) throw DataError("write failed for " + path.string());
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_matrix_text(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_matrix_text(out, m);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace vecdenoise::io
