#include "xalign/embed_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_set>

#include "xalign/error.hpp"

namespace xalign {
namespace {

constexpr char kBinaryMagic[4] = {'X', 'E', 'M', 'B'};
constexpr std::uint8_t kBinaryVersion = 1;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) throw IoError(path.string() + ": truncated binary file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

EmbeddingSpace::EmbeddingSpace(std::vector<std::string> words, MatrixF vectors, std::string lang)
    : lang_(std::move(lang)), words_(std::move(words)), vectors_(std::move(vectors)) {
  if (static_cast<Index>(words_.size()) != vectors_.rows())
    throw UsageError("embedding space: " + std::to_string(words_.size()) + " words but " +
                     std::to_string(vectors_.rows()) + " rows");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<Index>(i)).second)
      throw UsageError("embedding space: duplicate word '" + words_[i] + "'");
  }
  if (!vectors_.allFinite()) {
    for (Index i = 0; i < vectors_.rows(); ++i)
      if (!vectors_.row(i).allFinite())
        throw NumericalError("embedding space: non-finite component in row of '" +
                             words_[static_cast<std::size_t>(i)] + "'");
  }
}

std::optional<Index> EmbeddingSpace::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Matrix EmbeddingSpace::head(Index n) const {
  n = std::clamp<Index>(n, 0, size());
  return vectors_.topRows(n).cast<double>();
}

Matrix EmbeddingSpace::rows(std::span<const Index> indices) const {
  Matrix out(static_cast<Index>(indices.size()), dim());
  for (std::size_t r = 0; r < indices.size(); ++r)
    out.row(static_cast<Index>(r)) = vectors_.row(indices[r]).cast<double>();
  return out;
}

bool EmbeddingSpace::operator==(const EmbeddingSpace& other) const {
  return lang_ == other.lang_ && words_ == other.words_ &&
         vectors_.rows() == other.vectors_.rows() && vectors_.cols() == other.vectors_.cols() &&
         vectors_ == other.vectors_;
}

EmbeddingSpace load_embeddings(const std::filesystem::path& path, const LoadOptions& options) {
  if (options.max_vocab <= 0) throw UsageError("max_vocab must be positive");
  std::ifstream in = open_in(path);
  const std::string name = path.string();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError(name, 1, "empty file");
  ++line_no;
  const auto header = split_ws(line);
  long long count = 0;
  long long dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) ||
      count < 0 || dim <= 0)
    throw FormatError(name, line_no, "malformed header, expected \"count dim\"");

  const Index keep_max = std::min<Index>(options.max_vocab, static_cast<Index>(count));
  std::vector<std::string> words;
  std::vector<float> values;
  words.reserve(static_cast<std::size_t>(keep_max));
  values.reserve(static_cast<std::size_t>(keep_max * dim));
  std::unordered_set<std::string> seen;
  std::vector<float> row(static_cast<std::size_t>(dim));

  long long rows_read = 0;
  while (static_cast<Index>(words.size()) < keep_max && rows_read < count) {
    if (!std::getline(in, line))
      throw FormatError(name, line_no + 1,
                        "file ends after " + std::to_string(rows_read) + " of " +
                            std::to_string(count) + " rows");
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) throw FormatError(name, line_no, "empty row");
    if (static_cast<long long>(tokens.size()) != dim + 1)
      throw FormatError(name, line_no,
                        "expected " + std::to_string(dim) + " components, found " +
                            std::to_string(tokens.size() - 1));
    ++rows_read;
    for (long long j = 0; j < dim; ++j) {
      double v = 0.0;
      if (!parse_number(tokens[static_cast<std::size_t>(j + 1)], v))
        throw FormatError(name, line_no, "cannot parse component " + std::to_string(j + 1));
      if (!std::isfinite(v) || !std::isfinite(static_cast<float>(v)))
        throw FormatError(name, line_no, "non-finite component " + std::to_string(j + 1));
      row[static_cast<std::size_t>(j)] = static_cast<float>(v);
    }
    std::string token = options.lowercase ? ascii_lower(tokens[0]) : std::string(tokens[0]);
    // Input is frequency-ordered, so the first occurrence wins.
    if (!seen.insert(token).second) continue;
    words.push_back(std::move(token));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (words.empty()) throw FormatError(name, line_no, "no embedding rows");

  MatrixF vectors = Eigen::Map<MatrixF>(values.data(), static_cast<Index>(words.size()), dim);
  return EmbeddingSpace(std::move(words), std::move(vectors), options.lang);
}

void save_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << space.size() << ' ' << space.dim() << '\n';
  char buf[64];
  for (Index i = 0; i < space.size(); ++i) {
    out << space.word(i);
    for (Index j = 0; j < space.dim(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), space.vectors()(i, j));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_embeddings_binary(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, std::ios::binary);
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  write_le<std::uint8_t>(out, kBinaryVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(space.dim()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(space.size()));
  const MatrixF& v = space.vectors();
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) write_le<float>(out, v(i, j));
  for (const auto& w : space.words()) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

EmbeddingSpace load_embeddings_binary(const std::filesystem::path& path, std::string lang) {
  std::ifstream in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0)
    throw IoError(path.string() + ": not an embedding cache (bad magic)");
  const auto version = read_le<std::uint8_t>(in, path);
  if (version != kBinaryVersion)
    throw IoError(path.string() + ": unsupported cache version " + std::to_string(version));
  const auto dim = static_cast<Index>(read_le<std::uint32_t>(in, path));
  const auto count = static_cast<Index>(read_le<std::uint64_t>(in, path));
  MatrixF vectors(count, dim);
  for (Index i = 0; i < count; ++i)
    for (Index j = 0; j < dim; ++j) vectors(i, j) = read_le<float>(in, path);
  std::vector<std::string> words(static_cast<std::size_t>(count));
  for (auto& w : words) {
    const auto len = read_le<std::uint32_t>(in, path);
    w.resize(len);
    if (!in.read(w.data(), len)) throw IoError(path.string() + ": truncated binary file");
  }
  return EmbeddingSpace(std::move(words), std::move(vectors), std::move(lang));
}

Normalization parse_normalization(std::string_view name) {
  if (name == "none") return Normalization::none;
  if (name == "unit") return Normalization::unit;
  if (name == "center_then_unit" || name == "center,unit") return Normalization::center_then_unit;
  throw UsageError("unknown normalization '" + std::string(name) + "'");
}

std::string_view to_string(Normalization mode) {
  switch (mode) {
    case Normalization::none: return "none";
    case Normalization::unit: return "unit";
    case Normalization::center_then_unit: return "center_then_unit";
  }
  return "?";
}

EmbeddingSpace normalize(const EmbeddingSpace& space, Normalization mode) {
  if (mode == Normalization::none) return space;
  Matrix v = space.vectors().cast<double>();
  if (mode == Normalization::center_then_unit) v.rowwise() -= v.colwise().mean();
  MatrixF out(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    const double n = v.row(i).norm();
    if (n == 0.0) throw NumericalError("cannot normalize zero vector of '" + space.word(i) + "'");
    // Rows already at unit norm (to float precision) are kept bit-for-bit.
    if (mode == Normalization::unit && std::abs(n - 1.0) <= 1e-6)
      out.row(i) = space.vectors().row(i);
    else
      out.row(i) = (v.row(i) / n).cast<float>();
  }
  return EmbeddingSpace(space.words(), std::move(out), space.lang());
}

Dictionary Dictionary::from_pairs(std::vector<WordPair> pairs, std::string src_lang,
                                  std::string tgt_lang) {
  Dictionary d;
  d.src_lang = std::move(src_lang);
  d.tgt_lang = std::move(tgt_lang);
  std::set<WordPair> seen;
  for (const auto& p : pairs)
    if (seen.insert(p).second) d.pairs.push_back(p);
  return d;
}

std::vector<Index> Dictionary::unique_sources() const {
  std::vector<Index> out;
  std::unordered_set<Index> seen;
  for (const auto& p : pairs)
    if (seen.insert(p.src).second) out.push_back(p.src);
  return out;
}

DictionaryLoad load_dictionary(const std::filesystem::path& path, const EmbeddingSpace& src,
                               const EmbeddingSpace& tgt) {
  std::ifstream in = open_in(path);
  DictionaryLoad result;
  result.dictionary.src_lang = src.lang();
  result.dictionary.tgt_lang = tgt.lang();
  std::set<WordPair> seen;
  std::vector<std::string> file_sources;
  std::unordered_set<std::string> file_source_set;
  std::unordered_set<Index> retained_sources;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens.size() < 2) throw FormatError(path.string(), line_no, "expected two words");
    const std::string s(tokens[0]);
    if (file_source_set.insert(s).second) file_sources.push_back(s);
    const auto si = src.find(tokens[0]);
    const auto ti = tgt.find(tokens[1]);
    if (!si || !ti) {
      ++result.dropped_pairs;
      continue;
    }
    const WordPair p{*si, *ti};
    if (!seen.insert(p).second) {
      ++result.duplicate_pairs;
      continue;
    }
    result.dictionary.pairs.push_back(p);
    retained_sources.insert(*si);
  }
  for (const auto& s : file_sources) {
    const auto si = src.find(s);
    if (!si || !retained_sources.contains(*si)) result.oov_sources.push_back(s);
  }
  return result;
}

void save_dictionary(const Dictionary& dict, const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                     const std::filesystem::path& path,
                     const std::vector<std::string>& header_comments) {
  std::ofstream out = open_out(path);
  for (const auto& c : header_comments) out << "# " << c << '\n';
  for (const auto& p : dict.pairs) out << src.word(p.src) << ' ' << tgt.word(p.tgt) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace xalign
