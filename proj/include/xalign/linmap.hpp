#pragma once

#include <filesystem>
#include <span>

#include "xalign/embed_io.hpp"
#include "xalign/types.hpp"

namespace xalign {

/// Square linear map W applied to column vectors (x -> Wx). With the
/// library's row-per-vector layout, mapping a stack of rows X is X * W^T.
struct MappingMatrix {
  Matrix w;
  double beta = 0.01;  ///< orthogonalization strength

  static MappingMatrix identity(Index dim, double beta = 0.01);
  Index dim() const { return w.rows(); }
};

struct FitResult {
  MappingMatrix map;
  double residual = 0.0;     ///< ||W X - Y||_F at the solution
  bool degenerate = false;   ///< cross-covariance was rank deficient
};

/// Unconstrained minimizer of ||W X - Y||_F. Rows of `x` and `y` are the
/// paired source/target vectors (p rows, p >= d). Throws NumericalError when
/// X X^T has condition number above 1e12.
FitResult least_squares_map(const Matrix& x, const Matrix& y);

/// Orthogonal minimizer W = U V^T where U S V^T = SVD(Y X^T).
FitResult procrustes(const Matrix& x, const Matrix& y);

/// W <- (1 + beta) W - beta (W W^T) W
MappingMatrix orthogonalize_step(const MappingMatrix& m);

/// Maps every row: returns rows * W^T. Throws UsageError on dimension mismatch.
Matrix apply_map(const MappingMatrix& m, const Matrix& rows);
Matrix apply_map(const MappingMatrix& m, const MatrixF& rows);

/// ||W W^T - I||_F
double orthogonality_error(const MappingMatrix& m);
Vector singular_values(const MappingMatrix& m);

/// ||W X - Y||_F for row-stacked pairs.
double mapping_residual(const MappingMatrix& m, const Matrix& x, const Matrix& y);

/// Stacks the source and target vectors of every dictionary pair.
std::pair<Matrix, Matrix> gather_pairs(const Dictionary& dict, const EmbeddingSpace& src,
                                       const EmbeddingSpace& tgt);

/// Text form: "d beta" header, d lines of d values, optional "# ..." trailer.
void save_mapping(const MappingMatrix& m, const std::filesystem::path& path,
                  std::span<const std::string> comments = {});
MappingMatrix load_mapping(const std::filesystem::path& path);

/// Binary form: "XMAP", version byte, u32 d, f64 beta, d*d little-endian f64.
void save_mapping_binary(const MappingMatrix& m, const std::filesystem::path& path);
MappingMatrix load_mapping_binary(const std::filesystem::path& path);

}  // namespace xalign
