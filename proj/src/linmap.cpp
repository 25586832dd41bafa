#include "xalign/linmap.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xalign/error.hpp"

namespace xalign {
namespace {

constexpr char kMapMagic[4] = {'X', 'M', 'A', 'P'};
constexpr std::uint8_t kMapVersion = 1;

void check_pairs(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw UsageError("paired matrices differ in shape: " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + " vs " + std::to_string(y.rows()) + "x" +
                     std::to_string(y.cols()));
  if (x.rows() == 0) throw UsageError("no pairs to fit");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("non-finite input to mapping fit");
}

}  // namespace

MappingMatrix MappingMatrix::identity(Index dim, double beta) {
  return MappingMatrix{Matrix::Identity(dim, dim), beta};
}

FitResult least_squares_map(const Matrix& x, const Matrix& y) {
  check_pairs(x, y);
  const Index d = x.cols();
  if (x.rows() < d)
    throw UsageError("least squares needs at least d=" + std::to_string(d) + " pairs, got " +
                     std::to_string(x.rows()));
  // Column convention: W = Y X^T (X X^T)^-1; with rows, X X^T = x^T x.
  const Matrix gram = x.transpose() * x;
  Eigen::JacobiSVD<Matrix> svd(gram);
  const Vector& sv = svd.singularValues();
  const double cond = sv(d - 1) > 0.0 ? sv(0) / sv(d - 1) : INFINITY;
  if (!(cond <= 1e12))
    throw NumericalError("least squares: X X^T is rank deficient (condition number " +
                         std::to_string(cond) + ")");
  const Matrix cross = y.transpose() * x;  // Y X^T
  FitResult out;
  out.map.w = gram.ldlt().solve(cross.transpose()).transpose();
  out.residual = mapping_residual(out.map, x, y);
  return out;
}

FitResult procrustes(const Matrix& x, const Matrix& y) {
  check_pairs(x, y);
  const Matrix cross = y.transpose() * x;  // Y X^T
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("procrustes: SVD did not converge");
  FitResult out;
  out.map.w = svd.matrixU() * svd.matrixV().transpose();
  const Vector& sv = svd.singularValues();
  out.degenerate = sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0));
  out.residual = mapping_residual(out.map, x, y);
  return out;
}

MappingMatrix orthogonalize_step(const MappingMatrix& m) {
  const Matrix& w = m.w;
  MappingMatrix out = m;
  out.w = (1.0 + m.beta) * w - m.beta * (w * w.transpose()) * w;
  return out;
}

Matrix apply_map(const MappingMatrix& m, const Matrix& rows) {
  if (rows.cols() != m.dim())
    throw UsageError("apply_map: vectors have dimension " + std::to_string(rows.cols()) +
                     ", map expects " + std::to_string(m.dim()));
  return rows * m.w.transpose();
}

Matrix apply_map(const MappingMatrix& m, const MatrixF& rows) {
  return apply_map(m, Matrix(rows.cast<double>()));
}

double orthogonality_error(const MappingMatrix& m) {
  return (m.w * m.w.transpose() - Matrix::Identity(m.dim(), m.dim())).norm();
}

Vector singular_values(const MappingMatrix& m) {
  return Eigen::JacobiSVD<Matrix>(m.w).singularValues();
}

double mapping_residual(const MappingMatrix& m, const Matrix& x, const Matrix& y) {
  return (x * m.w.transpose() - y).norm();
}

std::pair<Matrix, Matrix> gather_pairs(const Dictionary& dict, const EmbeddingSpace& src,
                                       const EmbeddingSpace& tgt) {
  std::vector<Index> si;
  std::vector<Index> ti;
  si.reserve(dict.size());
  ti.reserve(dict.size());
  for (const auto& p : dict.pairs) {
    si.push_back(p.src);
    ti.push_back(p.tgt);
  }
  return {src.rows(si), tgt.rows(ti)};
}

void save_mapping(const MappingMatrix& m, const std::filesystem::path& path,
                  std::span<const std::string> comments) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  auto fmt = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
  };
  out << m.dim() << ' ' << fmt(m.beta) << '\n';
  for (Index i = 0; i < m.dim(); ++i) {
    for (Index j = 0; j < m.dim(); ++j) out << (j ? " " : "") << fmt(m.w(i, j));
    out << '\n';
  }
  for (const auto& c : comments) out << "# " << c << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

MappingMatrix load_mapping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.front() != '#') return true;
    }
    return false;
  };
  if (!next_line()) throw FormatError(path.string(), 1, "empty mapping file");
  std::istringstream header(line);
  long long d = 0;
  MappingMatrix m;
  if (!(header >> d >> m.beta) || d <= 0)
    throw FormatError(path.string(), line_no, "malformed header, expected \"d beta\"");
  m.w.resize(d, d);
  for (Index i = 0; i < d; ++i) {
    if (!next_line()) throw FormatError(path.string(), line_no + 1, "missing matrix row");
    std::istringstream row(line);
    for (Index j = 0; j < d; ++j) {
      std::string tok;
      if (!(row >> tok)) throw FormatError(path.string(), line_no, "row has too few values");
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw FormatError(path.string(), line_no, "bad value '" + tok + "'");
      m.w(i, j) = v;
    }
    std::string extra;
    if (row >> extra) throw FormatError(path.string(), line_no, "row has too many values");
  }
  return m;
}

void save_mapping_binary(const MappingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  static_assert(std::endian::native == std::endian::little, "binary mapping assumes little-endian");
  out.write(kMapMagic, 4);
  out.put(static_cast<char>(kMapVersion));
  const auto d = static_cast<std::uint32_t>(m.dim());
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(&m.beta), sizeof(m.beta));
  out.write(reinterpret_cast<const char*>(m.w.data()),
            static_cast<std::streamsize>(m.w.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

MappingMatrix load_mapping_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMapMagic, 4) != 0)
    throw IoError(path.string() + ": not a mapping file (bad magic)");
  const int version = in.get();
  if (version != kMapVersion)
    throw IoError(path.string() + ": unsupported mapping version " + std::to_string(version));
  std::uint32_t d = 0;
  MappingMatrix m;
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  in.read(reinterpret_cast<char*>(&m.beta), sizeof(m.beta));
  m.w.resize(d, d);
  in.read(reinterpret_cast<char*>(m.w.data()), static_cast<std::streamsize>(m.w.size() * sizeof(double)));
  if (!in) throw IoError(path.string() + ": truncated mapping file");
  return m;
}

}  // namespace xalign
