#include "rms/archive.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace rms {

namespace {

constexpr std::string_view kMagic{"RMSCKPT\0", 8};

}  // namespace

void BinaryWriter::u32(std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out_.write(buf, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out_.write(buf, 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::bytes(std::string_view raw) {
  out_.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

std::string BinaryReader::bytes(std::size_t n) {
  std::string buf(n, '\0');
  in_.read(buf.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw Error("binary read: unexpected end of file");
  return buf;
}

std::uint32_t BinaryReader::u32() {
  auto raw = bytes(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  auto raw = bytes(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  auto n = u64();
  if (n > (1ULL << 32)) throw Error("binary read: implausible string length");
  return bytes(n);
}

const Eigen::MatrixXd& TensorArchive::matrix(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("archive: missing tensor '" + name + "'");
  return it->second;
}

Eigen::VectorXd TensorArchive::vector(const std::string& name) const {
  const auto& m = matrix(name);
  if (m.cols() != 1) throw Error("archive: tensor '" + name + "' is not a column vector");
  return m.col(0);
}

const std::string& TensorArchive::text(const std::string& name) const {
  auto it = text_.find(name);
  if (it == text_.end()) throw Error("archive: missing field '" + name + "'");
  return it->second;
}

std::int64_t TensorArchive::integer(const std::string& name) const { return std::stoll(text(name)); }

void TensorArchive::write(std::ostream& out) const {
  BinaryWriter w(out);
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& [name, m] : tensors_) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
  w.u32(static_cast<std::uint32_t>(text_.size()));
  for (const auto& [name, value] : text_) {
    w.str(name);
    w.str(value);
  }
}

TensorArchive TensorArchive::read(std::istream& in) {
  BinaryReader r(in);
  if (r.bytes(kMagic.size()) != kMagic) throw Error("archive: bad magic");
  auto version = r.u32();
  if (version != kVersion) throw Error("archive: unsupported version " + std::to_string(version));
  TensorArchive ar;
  auto count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    auto name = r.str();
    auto rows = r.u32();
    auto cols = r.u32();
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
    ar.tensors_.emplace(std::move(name), std::move(m));
  }
  auto ntext = r.u32();
  for (std::uint32_t t = 0; t < ntext; ++t) {
    auto name = r.str();
    ar.text_.emplace(std::move(name), r.str());
  }
  return ar;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return read(in);
}

}  // namespace rms
