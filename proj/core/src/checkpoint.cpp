#include "da3d/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <vector>

#include "da3d/errors.hpp"

namespace da3d {

namespace {

constexpr char kMagic[4] = {'D', 'A', '3', 'C'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    out_.append(static_cast<const char*>(p), n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw DataError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    const std::uint64_t lo = u32(what);
    const std::uint64_t hi = u32(what);
    return lo | (hi << 32);
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

template <typename Tensor>
std::vector<std::uint32_t> dims_of(const Tensor& t) {
  if constexpr (Tensor::ColsAtCompileTime == 1) {
    return {static_cast<std::uint32_t>(t.rows())};
  } else {
    return {static_cast<std::uint32_t>(t.rows()), static_cast<std::uint32_t>(t.cols())};
  }
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  checkpoint.params.validate();
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u64(checkpoint.seed);
  w.str(checkpoint.config_json);
  w.u32(8);
  for_each_tensor(
      [&](const char* name, const auto& t) {
        w.str(name);
        const auto dims = dims_of(t);
        w.u32(static_cast<std::uint32_t>(dims.size()));
        for (auto d : dims) w.u32(d);
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
          for (Eigen::Index c = 0; c < t.cols(); ++c) w.f32(t(r, c));
        }
      },
      checkpoint.params);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (bytes.compare(0, 4, kMagic, 4) != 0) throw DataError("not a checkpoint (bad magic)");
  (void)r.u32("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.seed = r.u64("seed");
  ck.config_json = r.str("config");
  const std::uint32_t count = r.u32("tensor count");
  if (count != 8) throw DataError("checkpoint has " + std::to_string(count) + " tensors, expected 8");

  for_each_tensor(
      [&](const char* name, auto& t) {
        const std::string got = r.str("tensor name");
        if (got != name) throw DataError("checkpoint tensor '" + got + "' where '" + name + "' expected");
        const auto expected_rank = dims_of(t).size();
        const std::uint32_t rank = r.u32("rank");
        if (rank != expected_rank) throw DataError("tensor '" + got + "' has wrong rank");
        const std::uint32_t rows = r.u32("dims");
        const std::uint32_t cols = rank == 2 ? r.u32("dims") : 1;
        r.need(static_cast<std::size_t>(rows) * cols * 4, name);
        t.resize(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i) {
          for (std::uint32_t j = 0; j < cols; ++j) t(i, j) = r.f32(name);
        }
      },
      ck.params);
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  ck.params.validate();
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace da3d
