#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ami::fs {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Write-temp-then-rename. With `durable`, the temp file and the parent
/// directory are fsynced so the rename survives a power loss.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                  bool durable = true);
void atomic_write(const std::filesystem::path& path, std::string_view text, bool durable = true);

/// Appends one line (a '\n' is added) and fsyncs before returning.
void append_line_durable(const std::filesystem::path& path, std::string_view line);

/// Throws IoError if `dir` cannot be created or written to.
void ensure_writable_dir(const std::filesystem::path& dir);

/// Exclusive advisory lock on a lock file, held for the object's lifetime.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& lock_path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace ami::fs
