#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ami::zip {

/// Read-only view of a ZIP file held in memory. Supports stored and deflated
/// entries; ZIP64 and encryption are rejected.
class Reader {
 public:
  static Reader open(const std::filesystem::path& path);
  static Reader from_bytes(std::vector<std::uint8_t> bytes);

  std::vector<std::string> names() const;
  bool contains(const std::string& name) const { return entries_.contains(name); }
  /// Entry contents; throws NotFoundError for a missing entry.
  std::vector<std::uint8_t> read(const std::string& name) const;
  std::string read_text(const std::string& name) const;

 private:
  struct Entry {
    std::uint16_t method = 0;
    std::uint32_t crc = 0;
    std::uint64_t compressed_size = 0;
    std::uint64_t size = 0;
    std::uint64_t local_header_offset = 0;
  };

  std::vector<std::uint8_t> bytes_;
  std::map<std::string, Entry> entries_;
};

/// Builds a ZIP with deflated entries and fixed timestamps, so identical
/// inputs give identical archives.
class Writer {
 public:
  void add(const std::string& name, const std::vector<std::uint8_t>& data);
  void add(const std::string& name, const std::string& text);
  std::vector<std::uint8_t> finish() const;
  void write(const std::filesystem::path& path) const;

 private:
  struct Pending {
    std::string name;
    std::vector<std::uint8_t> data;
  };
  std::vector<Pending> pending_;
};

}  // namespace ami::zip
