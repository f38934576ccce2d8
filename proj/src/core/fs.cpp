#include "ami/core/fs.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "ami/core/error.hpp"

namespace ami::fs {

namespace {

std::string errno_message(const std::string& what, const std::filesystem::path& path) {
  return what + " " + path.string() + ": " + std::strerror(errno);
}

void write_all(int fd, const std::uint8_t* data, std::size_t size, const std::filesystem::path& path) {
  while (size > 0) {
    const ssize_t n = ::write(fd, data, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(errno_message("write failed for", path));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

void fsync_dir(const std::filesystem::path& dir) {
  const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::atomic<unsigned> g_temp_counter{0};

}  // namespace

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes, bool durable) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const auto tmp = std::filesystem::path(path.string() + ".tmp." + std::to_string(::getpid()) + "." +
                                         std::to_string(g_temp_counter.fetch_add(1)));
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError(errno_message("cannot create", tmp));
  try {
    write_all(fd, bytes.data(), bytes.size(), tmp);
    if (durable && ::fsync(fd) != 0) throw IoError(errno_message("fsync failed for", tmp));
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw IoError(errno_message("rename failed for", path));
  }
  if (durable) fsync_dir(parent);
}

void atomic_write(const std::filesystem::path& path, std::string_view text, bool durable) {
  atomic_write(path,
               std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), durable);
}

void append_line_durable(const std::filesystem::path& path, std::string_view line) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError(errno_message("cannot open", path));
  std::string buf(line);
  buf.push_back('\n');
  try {
    write_all(fd, reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size(), path);
    if (::fsync(fd) != 0) throw IoError(errno_message("fsync failed for", path));
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

void ensure_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / (".probe." + std::to_string(::getpid()));
  const int fd = ::open(probe.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError(errno_message("directory not writable:", dir));
  ::close(fd);
  ::unlink(probe.c_str());
}

FileLock::FileLock(const std::filesystem::path& lock_path) {
  if (lock_path.has_parent_path()) std::filesystem::create_directories(lock_path.parent_path());
  fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError(errno_message("cannot open lock", lock_path));
  while (::flock(fd_, LOCK_EX) != 0) {
    if (errno != EINTR) {
      ::close(fd_);
      throw IoError(errno_message("flock failed on", lock_path));
    }
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace ami::fs
