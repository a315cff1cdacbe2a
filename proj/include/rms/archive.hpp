#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "rms/common.hpp"

namespace rms {

/// Little-endian primitive writer, independent of host byte order.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void bytes(std::string_view raw);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::string bytes(std::size_t n);

 private:
  std::istream& in_;
};

/// Named tensors and text fields in one versioned file.
///
/// Layout: magic "RMSCKPT\0", u32 version, u32 tensor count, then per tensor
/// {name, u32 rows, u32 cols, rows*cols f64 row-major}; u32 text count, then
/// {name, value}. Entries are written in name order so output is byte-stable.
class TensorArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, const Eigen::MatrixXd& m) { tensors_[name] = m; }
  void put(const std::string& name, const Eigen::VectorXd& v) { tensors_[name] = v; }
  void put_text(const std::string& name, std::string value) { text_[name] = std::move(value); }
  void put_int(const std::string& name, std::int64_t value) { text_[name] = std::to_string(value); }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  bool has_text(const std::string& name) const { return text_.count(name) > 0; }
  /// Throws Error naming the missing entry.
  const Eigen::MatrixXd& matrix(const std::string& name) const;
  Eigen::VectorXd vector(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  std::int64_t integer(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  static TensorArchive read(std::istream& in);

 private:
  std::map<std::string, Eigen::MatrixXd> tensors_;
  std::map<std::string, std::string> text_;
};

}  // namespace rms
