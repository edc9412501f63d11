#include "emoint/archive.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "emoint/error.hpp"

namespace emoint {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'O', 'I', 'N', 'T', 'M', '\0'};
// Guards against allocating absurd sizes when reading a corrupt header.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <class T>
T byteswap_if_needed(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <class T>
void put_raw(std::ostream& out, T v) {
  v = byteswap_if_needed(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ostream& out, const std::string& s) {
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

[[noreturn]] void truncated() { throw Error(ErrorCode::kFormat, "model file is truncated"); }

template <class T>
T get_raw(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) truncated();
  return byteswap_if_needed(v);
}

std::string get_str(std::istream& in) {
  auto n = get_raw<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) truncated();
  return s;
}

}  // namespace

void Archive::put_tensor(const nn::TensorRef& t) {
  StoredTensor s;
  s.name = t.name;
  s.rows = static_cast<std::uint64_t>(t.rows);
  s.cols = static_cast<std::uint64_t>(t.cols);
  s.values.assign(t.values().begin(), t.values().end());
  tensors.push_back(std::move(s));
}

void Archive::put_tensors(const nn::TensorList& list) {
  for (const auto& t : list) put_tensor(t);
}

const std::string& Archive::get(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw Error(ErrorCode::kFormat, "model file lacks metadata '" + key + "'");
  return it->second;
}

long Archive::get_int(const std::string& key) const {
  const auto& s = get(key);
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::kFormat, "metadata '" + key + "' is not an integer");
  }
  return v;
}

double Archive::get_double(const std::string& key) const {
  const auto& s = get(key);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::kFormat, "metadata '" + key + "' is not a number");
  }
  return v;
}

void Archive::load_into(const nn::TensorRef& dst) const {
  auto it = std::find_if(tensors.begin(), tensors.end(),
                         [&](const StoredTensor& t) { return t.name == dst.name; });
  if (it == tensors.end()) throw Error(ErrorCode::kFormat, "model file lacks tensor '" + dst.name + "'");
  if (it->rows != static_cast<std::uint64_t>(dst.rows) ||
      it->cols != static_cast<std::uint64_t>(dst.cols)) {
    throw Error(ErrorCode::kShape, "tensor '" + dst.name + "': expected " + std::to_string(dst.rows) +
                                       "x" + std::to_string(dst.cols) + ", file has " +
                                       std::to_string(it->rows) + "x" + std::to_string(it->cols));
  }
  std::copy(it->values.begin(), it->values.end(), dst.values().begin());
}

void Archive::load_all(const nn::TensorList& dsts) const {
  for (const auto& d : dsts) load_into(d);
}

void Archive::require_kind(const std::string& expected) const {
  if (kind != expected) {
    throw Error(ErrorCode::kFormat, "expected a '" + expected + "' model, file holds '" + kind + "'");
  }
}

void Archive::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_raw<std::uint32_t>(out, kArchiveVersion);
  put_str(out, kind);
  put_raw<std::uint64_t>(out, seed);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    put_str(out, k);
    put_str(out, v);
  }
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_str(out, t.name);
    put_raw<std::uint64_t>(out, t.rows);
    put_raw<std::uint64_t>(out, t.cols);
    for (double v : t.values) put_raw<double>(out, v);
  }
}

Archive Archive::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic))) truncated();
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kFormat, "not a model file (bad magic)");
  }
  const auto version = get_raw<std::uint32_t>(in);
  if (version != kArchiveVersion) {
    throw Error(ErrorCode::kFormat, "unsupported model format version " + std::to_string(version) +
                                        " (expected " + std::to_string(kArchiveVersion) + ")");
  }
  Archive a;
  a.kind = get_str(in);
  a.seed = get_raw<std::uint64_t>(in);
  const auto n_meta = get_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_str(in);
    a.metadata[k] = get_str(in);
  }
  const auto n_tensors = get_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    StoredTensor t;
    t.name = get_str(in);
    t.rows = get_raw<std::uint64_t>(in);
    t.cols = get_raw<std::uint64_t>(in);
    if (t.cols != 0 && t.rows > kMaxElements / t.cols) truncated();
    t.values.resize(t.rows * t.cols);
    for (double& v : t.values) v = get_raw<double>(in);
    a.tensors.push_back(std::move(t));
  }
  return a;
}

void Archive::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp + "'");
    write(out);
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(ErrorCode::kIo, "cannot rename '" + tmp + "' to '" + path + "'");
  }
}

Archive Archive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open model file '" + path + "'");
  try {
    return read(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace emoint
