#pragma once

// Reader/writer for `.da3d` slice-embedding files.
//
// Layout (all integers little-endian):
//   bytes 0..3   magic "DA3D" (0x44 0x41 0x33 0x44)
//   bytes 4..7   uint32 format version, currently 1
//   bytes 8..11  uint32 d, embedding dimension
//   bytes 12..15 uint32 N, slice count
//   then N*d IEEE-754 float32 values, little-endian, row-major
//   (slice index varies slowest). Nothing follows the payload.
//
// Label and subject id are not stored here; they live in the manifest.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "da3d/errors.hpp"

namespace da3d {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

// Rows are slices, columns are embedding coordinates.
using SliceMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;

struct SliceBag {
  std::string subject_id;
  int label = 0;
  SliceMatrix slices;

  Eigen::Index slice_count() const { return slices.rows(); }
  Eigen::Index dim() const { return slices.cols(); }
};

enum class FormatErrorKind {
  BadMagic,
  UnsupportedVersion,
  Truncated,
  TrailingData,
  DimensionMismatch,
  NonFinite,
  EmptyBag,
  Io,
};

const char* to_string(FormatErrorKind kind);

class FormatError : public DataError {
 public:
  FormatError(FormatErrorKind kind, const std::string& detail)
      : DataError(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

  FormatErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  FormatErrorKind kind_;
  std::string detail_;
};

// Byte count of a file holding `slices` x `dim`.
constexpr std::size_t encoded_size(std::size_t slices, std::size_t dim) {
  return kHeaderBytes + slices * dim * sizeof(float);
}

// Throws FormatError{NonFinite} naming the first offending row, or
// FormatError{EmptyBag} when there are no rows or columns.
void validate_slices(const SliceMatrix& slices);

std::size_t write_bag(const SliceMatrix& slices, std::ostream& out);
std::size_t write_bag(const SliceBag& bag, std::ostream& out);
std::size_t write_bag_file(const SliceMatrix& slices, const std::filesystem::path& path);

// Reads one matrix. When `expected_dim` is set a different d is reported as
// DimensionMismatch. Any byte after the payload is TrailingData.
SliceMatrix read_bag(std::istream& in, std::optional<std::uint32_t> expected_dim = std::nullopt);
SliceMatrix read_bag_file(const std::filesystem::path& path,
                          std::optional<std::uint32_t> expected_dim = std::nullopt);

}  // namespace da3d
