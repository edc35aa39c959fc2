#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dkmo/linalg.hpp"

// On-disk matrix formats.
//
//   CSV      headerless, one row per line, comma-separated reals. Writes use
//            the shortest round-trip representation, so CSV and binary
//            encodings of the same table load to identical doubles.
//   "DKMK"   square tables: magic, u32 LE n, n*n float64 LE row-major.
//   "DKMR"   rectangular tables: magic, u32 LE rows, u32 LE cols, then
//            rows*cols float64 LE row-major.
namespace dkmo::io {

using linalg::Matrix;

// Shortest round-trip decimal form.
std::string format_double(double v);

enum class MatrixFormat { csv, binary };

Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

Matrix read_matrix_binary(const std::filesystem::path& path);
// Square matrices are written as DKMK, everything else as DKMR.
void write_matrix_binary(const std::filesystem::path& path, const Matrix& m);

// Dispatches on the leading magic bytes.
Matrix read_matrix(const std::filesystem::path& path);
Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format);

// One integer per line, 0-indexed.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

}  // namespace dkmo::io
