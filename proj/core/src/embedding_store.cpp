#include "da3d/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace da3d {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'A', '3', 'D'};

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Reads up to `n` bytes, returns the count actually read.
std::size_t read_some(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::BadMagic: return "bad magic";
    case FormatErrorKind::UnsupportedVersion: return "unsupported version";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::TrailingData: return "trailing data";
    case FormatErrorKind::DimensionMismatch: return "dimension mismatch";
    case FormatErrorKind::NonFinite: return "non-finite value";
    case FormatErrorKind::EmptyBag: return "empty bag";
    case FormatErrorKind::Io: return "i/o error";
  }
  return "unknown";
}

void validate_slices(const SliceMatrix& slices) {
  if (slices.rows() == 0 || slices.cols() == 0) {
    throw FormatError(FormatErrorKind::EmptyBag,
                      "bag has " + std::to_string(slices.rows()) + " rows and " +
                          std::to_string(slices.cols()) + " columns");
  }
  for (Eigen::Index r = 0; r < slices.rows(); ++r) {
    if (!slices.row(r).allFinite()) {
      throw FormatError(FormatErrorKind::NonFinite, "row " + std::to_string(r));
    }
  }
}

std::size_t write_bag(const SliceMatrix& slices, std::ostream& out) {
  validate_slices(slices);
  const auto n = static_cast<std::size_t>(slices.rows());
  const auto d = static_cast<std::size_t>(slices.cols());

  std::vector<char> buf;
  buf.reserve(encoded_size(n, d));
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  put_u32(buf, kFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(d));
  put_u32(buf, static_cast<std::uint32_t>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      put_u32(buf, std::bit_cast<std::uint32_t>(slices(static_cast<Eigen::Index>(r),
                                                       static_cast<Eigen::Index>(c))));
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError(FormatErrorKind::Io, "write failed");
  return buf.size();
}

std::size_t write_bag(const SliceBag& bag, std::ostream& out) {
  return write_bag(bag.slices, out);
}

std::size_t write_bag_file(const SliceMatrix& slices, const std::filesystem::path& path) {
  validate_slices(slices);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string() + " for writing");
  return write_bag(slices, out);
}

SliceMatrix read_bag(std::istream& in, std::optional<std::uint32_t> expected_dim) {
  std::array<unsigned char, kHeaderBytes> header{};
  const std::size_t got = read_some(in, reinterpret_cast<char*>(header.data()), kHeaderBytes);

  const std::size_t magic_bytes = std::min<std::size_t>(got, kMagic.size());
  for (std::size_t i = 0; i < magic_bytes; ++i) {
    if (header[i] != static_cast<unsigned char>(kMagic[i])) {
      throw FormatError(FormatErrorKind::BadMagic, "expected \"DA3D\"");
    }
  }
  if (got < kHeaderBytes) {
    throw FormatError(FormatErrorKind::Truncated,
                      "header has " + std::to_string(got) + " of 16 bytes");
  }

  const std::uint32_t version = get_u32(header.data() + 4);
  if (version != kFormatVersion) {
    throw FormatError(FormatErrorKind::UnsupportedVersion, "version " + std::to_string(version));
  }
  const std::uint32_t d = get_u32(header.data() + 8);
  const std::uint32_t n = get_u32(header.data() + 12);
  if (n == 0 || d == 0) {
    throw FormatError(FormatErrorKind::EmptyBag,
                      "N=" + std::to_string(n) + " d=" + std::to_string(d));
  }
  if (expected_dim && *expected_dim != d) {
    throw FormatError(FormatErrorKind::DimensionMismatch,
                      "file d=" + std::to_string(d) + ", dataset d=" + std::to_string(*expected_dim));
  }

  // Read in bounded chunks so a corrupted N cannot trigger a huge allocation
  // before the stream runs dry.
  const std::uint64_t payload = static_cast<std::uint64_t>(n) * d * sizeof(float);
  std::vector<unsigned char> bytes;
  constexpr std::size_t kChunk = 1 << 20;
  while (bytes.size() < payload) {
    const std::size_t want = static_cast<std::size_t>(
        std::min<std::uint64_t>(kChunk, payload - bytes.size()));
    const std::size_t old = bytes.size();
    bytes.resize(old + want);
    const std::size_t r = read_some(in, reinterpret_cast<char*>(bytes.data() + old), want);
    if (r < want) {
      throw FormatError(FormatErrorKind::Truncated,
                        "payload has " + std::to_string(old + r) + " of " +
                            std::to_string(payload) + " bytes");
    }
  }
  if (in.peek() != std::istream::traits_type::eof()) {
    throw FormatError(FormatErrorKind::TrailingData, "bytes after payload");
  }

  SliceMatrix slices(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const unsigned char* p = bytes.data();
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < d; ++c, p += 4) {
      const float v = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(v)) {
        throw FormatError(FormatErrorKind::NonFinite,
                          "row " + std::to_string(r) + " column " + std::to_string(c));
      }
      slices(r, c) = v;
    }
  }
  return slices;
}

SliceMatrix read_bag_file(const std::filesystem::path& path,
                          std::optional<std::uint32_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
  try {
    return read_bag(in, expected_dim);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace da3d
