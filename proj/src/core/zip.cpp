#include "ami/core/zip.hpp"

#include <algorithm>
#include <zlib.h>

#include <cstring>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"

namespace ami::zip {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralDirSig = 0x06054b50;
// 1980-01-01 00:00 in DOS format.
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

std::uint16_t u16(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 2 > b.size()) throw ParseError("truncated zip structure", at);
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw ParseError("truncated zip structure", at);
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> raw_deflate(const std::vector<std::uint8_t>& data) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(data.size())));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::vector<std::uint8_t> raw_inflate(const std::uint8_t* data, std::size_t size, std::size_t expected) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw IoError("inflateInit2 failed");
  std::vector<std::uint8_t> out(std::max<std::size_t>(expected, 1));
  zs.next_in = const_cast<Bytef*>(data);
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw ParseError("corrupt deflate stream in zip");
  out.resize(expected);
  return out;
}

std::uint32_t crc_of(const std::vector<std::uint8_t>& data) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

}  // namespace

Reader Reader::open(const std::filesystem::path& path) {
  return from_bytes(fs::read_bytes(path));
}

Reader Reader::from_bytes(std::vector<std::uint8_t> bytes) {
  Reader r;
  r.bytes_ = std::move(bytes);
  const auto& b = r.bytes_;
  if (b.size() < 22) throw ParseError("not a zip archive: too short", 0);
  // The end-of-central-directory record sits within the last 64 KiB + 22 bytes.
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = b.size() > 65557 ? b.size() - 65557 : 0;
  for (std::size_t i = b.size() - 22 + 1; i-- > lowest;) {
    if (u32(b, i) == kEndOfCentralDirSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) throw ParseError("not a zip archive: no end of central directory", b.size());
  const std::uint16_t count = u16(b, eocd + 10);
  const std::uint32_t cd_offset = u32(b, eocd + 16);
  if (cd_offset == 0xFFFFFFFFu) throw ParseError("zip64 archives are not supported", eocd);
  std::size_t at = cd_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (u32(b, at) != kCentralHeaderSig) throw ParseError("bad central directory entry", at);
    const std::uint16_t flags = u16(b, at + 8);
    if (flags & 0x1) throw ParseError("encrypted zip entries are not supported", at);
    Entry e;
    e.method = u16(b, at + 10);
    e.crc = u32(b, at + 16);
    e.compressed_size = u32(b, at + 20);
    e.size = u32(b, at + 24);
    const std::uint16_t name_len = u16(b, at + 28);
    const std::uint16_t extra_len = u16(b, at + 30);
    const std::uint16_t comment_len = u16(b, at + 32);
    e.local_header_offset = u32(b, at + 42);
    if (at + 46 + name_len > b.size()) throw ParseError("truncated central directory", at);
    std::string name(reinterpret_cast<const char*>(b.data() + at + 46), name_len);
    r.entries_.emplace(std::move(name), e);
    at += 46u + name_len + extra_len + comment_len;
  }
  return r;
}

std::vector<std::string> Reader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::uint8_t> Reader::read(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw NotFoundError("zip entry not found: " + name);
  const Entry& e = it->second;
  const std::size_t at = e.local_header_offset;
  if (u32(bytes_, at) != kLocalHeaderSig) throw ParseError("bad local header for " + name, at);
  const std::size_t data_at = at + 30 + u16(bytes_, at + 26) + u16(bytes_, at + 28);
  if (data_at + e.compressed_size > bytes_.size()) throw ParseError("truncated entry " + name, data_at);
  std::vector<std::uint8_t> out;
  if (e.method == 0) {
    out.assign(bytes_.begin() + static_cast<std::ptrdiff_t>(data_at),
               bytes_.begin() + static_cast<std::ptrdiff_t>(data_at + e.compressed_size));
  } else if (e.method == 8) {
    out = raw_inflate(bytes_.data() + data_at, e.compressed_size, e.size);
  } else {
    throw ParseError("unsupported compression method " + std::to_string(e.method) + " for " + name, at);
  }
  if (crc_of(out) != e.crc) throw ParseError("crc mismatch for " + name, at);
  return out;
}

std::string Reader::read_text(const std::string& name) const {
  const auto bytes = read(name);
  return std::string(bytes.begin(), bytes.end());
}

void Writer::add(const std::string& name, const std::vector<std::uint8_t>& data) {
  pending_.push_back({name, data});
}

void Writer::add(const std::string& name, const std::string& text) {
  pending_.push_back({name, std::vector<std::uint8_t>(text.begin(), text.end())});
}

std::vector<std::uint8_t> Writer::finish() const {
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> central;
  for (const auto& p : pending_) {
    const auto compressed = raw_deflate(p.data);
    const std::uint32_t crc = crc_of(p.data);
    const auto offset = static_cast<std::uint32_t>(out.size());
    put32(out, kLocalHeaderSig);
    put16(out, 20);
    put16(out, 0);
    put16(out, 8);
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, static_cast<std::uint32_t>(compressed.size()));
    put32(out, static_cast<std::uint32_t>(p.data.size()));
    put16(out, static_cast<std::uint16_t>(p.name.size()));
    put16(out, 0);
    out.insert(out.end(), p.name.begin(), p.name.end());
    out.insert(out.end(), compressed.begin(), compressed.end());

    put32(central, kCentralHeaderSig);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, 8);
    put16(central, kDosTime);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, static_cast<std::uint32_t>(compressed.size()));
    put32(central, static_cast<std::uint32_t>(p.data.size()));
    put16(central, static_cast<std::uint16_t>(p.name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central.insert(central.end(), p.name.begin(), p.name.end());
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  put32(out, kEndOfCentralDirSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(pending_.size()));
  put16(out, static_cast<std::uint16_t>(pending_.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

void Writer::write(const std::filesystem::path& path) const {
  fs::atomic_write(path, finish(), /*durable=*/false);
}

}  // namespace ami::zip
