#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "emoint/rnn.hpp"

namespace emoint {

/// Versioned binary model container shared by every persisted model.
///
/// Layout, all integers and doubles little-endian:
///
///   bytes[8]  magic "EMOINTM\0"
///   u32       format version (kArchiveVersion)
///   str       model kind ("charlm", "word", "svr", ...)
///   u64       seed
///   u32       metadata count, then per entry: str key, str value
///   u32       tensor count, then per tensor:
///               str name, u64 rows, u64 cols, f64[rows*cols] column-major
///
/// where `str` is a u32 byte length followed by the bytes.
inline constexpr std::uint32_t kArchiveVersion = 1;

struct StoredTensor {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> values;
};

class Archive {
 public:
  std::string kind;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;
  std::vector<StoredTensor> tensors;

  void put(const std::string& key, const std::string& value) { metadata[key] = value; }
  void put_tensor(const nn::TensorRef& t);
  void put_tensors(const nn::TensorList& list);

  const std::string& get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;

  // Copies the named tensor into `dst`, rejecting any shape difference.
  void load_into(const nn::TensorRef& dst) const;
  void load_all(const nn::TensorList& dsts) const;

  void require_kind(const std::string& expected) const;

  void write(std::ostream& out) const;
  static Archive read(std::istream& in);

  // Written via a temp file and rename.
  void save(const std::string& path) const;
  static Archive load(const std::string& path);
};

}  // namespace emoint
