#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "trustrec/error.hpp"

namespace trustrec::binary {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout is little-endian; add byte swapping for this target");

// Checkpoint layout: 4-byte magic, u32 version, then a stream of
// little-endian u64 counts and f64 arrays. Matrices are written as
// (rows: u64, cols: u64, rows*cols f64 in row-major order).

class Writer {
 public:
  Writer(const std::string& path, std::string_view magic, std::uint32_t version)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw InputError("cannot write " + path);
    if (magic.size() != 4) throw std::logic_error("checkpoint magic must be 4 bytes");
    out_.write(magic.data(), 4);
    u32(version);
  }

  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void matrix(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  void vector(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) f64(v[k]);
  }

  void close() {
    out_.close();
    if (!out_) throw InputError("failed writing " + path_);
  }

 private:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  Reader(const std::string& path, std::string_view magic, std::uint32_t version)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw InputError("cannot open " + path);
    char buf[4];
    in_.read(buf, 4);
    if (!in_ || std::string_view(buf, 4) != magic) throw InputError(path + ": not a " + std::string(magic) + " checkpoint");
    if (u32() != version) throw InputError(path + ": unsupported checkpoint version");
  }

  std::uint32_t u32() { return read<std::uint32_t>(); }
  std::uint64_t u64() { return read<std::uint64_t>(); }
  double f64() { return read<double>(); }

  Eigen::MatrixXd matrix() {
    const auto rows = u64();
    const auto cols = u64();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
    return m;
  }

  Eigen::VectorXd vector() {
    const auto n = u64();
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = f64();
    return v;
  }

 private:
  template <class T>
  T read() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw InputError(path_ + ": truncated checkpoint");
    return v;
  }

  std::ifstream in_;
  std::string path_;
};

}  // namespace trustrec::binary
