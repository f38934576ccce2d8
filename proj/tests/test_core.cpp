#include <filesystem>
#include <random>

#include "ami/core/csv.hpp"
#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/hash.hpp"
#include "ami/core/image_io.hpp"
#include "ami/core/xml.hpp"
#include "ami/core/zip.hpp"
#include "ami/kernels/image.hpp"
#include "doctest.h"

using namespace ami;
namespace stdfs = std::filesystem;

TEST_CASE("csv quoting round trip") {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const auto line = csv::format_row(fields);
  CHECK(line == "plain,\"with,comma\",\"with \"\"quote\"\"\",\"multi\nline\",\n");
  const auto rows = csv::parse(line + "a,b\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fields == fields);
  CHECK(rows[1].fields == std::vector<std::string>{"a", "b"});
  CHECK(rows[1].line == 3);
}

TEST_CASE("csv without quote character keeps quotes literal") {
  const csv::Dialect tab{'\t', std::nullopt};
  const auto rows = csv::parse("a\t\"b\"\tc\n\nx\ty\tz", tab);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fields[1] == "\"b\"");
  CHECK(rows[1].fields[2] == "z");
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("zip writer and reader agree") {
  zip::Writer w;
  std::string big(100000, 'x');
  for (std::size_t i = 0; i < big.size(); i += 7) big[i] = static_cast<char>('a' + i % 26);
  w.add("meta.xml", std::string("<archive/>"));
  w.add("dir/big.txt", big);
  w.add("empty", std::string());
  const auto bytes = w.finish();
  CHECK(bytes == w.finish());
  const auto r = zip::Reader::from_bytes(bytes);
  CHECK(r.names().size() == 3);
  CHECK(r.read_text("meta.xml") == "<archive/>");
  CHECK(r.read_text("dir/big.txt") == big);
  CHECK(r.read_text("empty").empty());
  CHECK_THROWS_AS(r.read("missing"), NotFoundError);
  CHECK_THROWS(zip::Reader::from_bytes({'n', 'o', 't', 'z', 'i', 'p'}));
}

TEST_CASE("zip detects corruption") {
  zip::Writer w;
  w.add("a.txt", std::string(5000, 'q'));
  auto bytes = w.finish();
  // Flip a byte inside the compressed payload (after the 30-byte header + name).
  bytes[40] ^= 0xFF;
  const auto r = zip::Reader::from_bytes(bytes);
  CHECK_THROWS(r.read("a.txt"));
}

TEST_CASE("xml parse") {
  const auto root = xml::parse(R"(<?xml version="1.0"?>
<!-- comment -->
<a:archive xmlns:a="x" attr='1 &amp; 2'>
  <core rowType="R"><files><location>occ.txt</location></files></core>
  <ext/><ext/>
  <![CDATA[raw <text>]]>
</a:archive>)");
  CHECK(root.local_name() == "archive");
  CHECK(root.attribute("attr") == "1 & 2");
  REQUIRE(root.child("core"));
  CHECK(root.child("core")->child("files")->child("location")->text == "occ.txt");
  CHECK(root.children_named("ext").size() == 2);
  try {
    xml::parse("<a><b></a>");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset().has_value());
  }
  CHECK(xml::escape("<&\">") == "&lt;&amp;&quot;&gt;");
}

TEST_CASE("png and jpeg round trip") {
  Raster img(13, 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 13; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(x * 19), static_cast<std::uint8_t>(y * 30), 77,
                     static_cast<std::uint8_t>(x == 0 ? 0 : 255)});
  const auto png = encode_png(img);
  CHECK(sniff_image_format(png) == ImageFormat::png);
  CHECK(decode_image(png) == img);
  CHECK(raster_digest(decode_image(png)) == raster_digest(img));
  const auto jpg = encode_jpeg(img);
  CHECK(sniff_image_format(jpg) == ImageFormat::jpeg);
  const auto back = decode_image(jpg);
  CHECK(back.width() == 13);
  CHECK(back.height() == 7);
  const std::vector<std::uint8_t> junk{1, 2, 3};
  CHECK_THROWS_AS(decode_image(junk), InputError);
}

TEST_CASE("atomic write and durable append") {
  const auto dir = stdfs::temp_directory_path() / "ami_test_core_fs";
  stdfs::remove_all(dir);
  fs::ensure_writable_dir(dir);
  fs::atomic_write(dir / "f.txt", std::string_view("one"));
  fs::atomic_write(dir / "f.txt", std::string_view("two"));
  CHECK(fs::read_text(dir / "f.txt") == "two");
  fs::append_line_durable(dir / "l.txt", "a");
  fs::append_line_durable(dir / "l.txt", "b");
  CHECK(fs::read_text(dir / "l.txt") == "a\nb\n");
  CHECK_THROWS_AS(fs::read_text(dir / "missing"), Error);
  stdfs::remove_all(dir);
}

namespace {

Raster random_raster(std::mt19937_64& rng, int w, int h) {
  Raster r(w, h);
  std::uniform_int_distribution<int> v(0, 255);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      r.set(x, y, {static_cast<std::uint8_t>(v(rng)), static_cast<std::uint8_t>(v(rng)),
                   static_cast<std::uint8_t>(v(rng)), 255});
  return r;
}

// Label propagation to a fixed point: every foreground pixel repeatedly takes
// the minimum label of its 8-neighbourhood. Independent of both kernels.
std::size_t count_components(const std::vector<std::uint8_t>& mask, int w, int h, std::vector<int>& label) {
  label.assign(mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) label[i] = mask[i] ? static_cast<int>(i) + 1 : 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int& l = label[static_cast<std::size_t>(y) * w + x];
        if (!l) continue;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const int o = label[static_cast<std::size_t>(ny) * w + nx];
            if (o && o < l) {
              l = o;
              changed = true;
            }
          }
      }
  }
  std::vector<int> roots;
  for (int l : label)
    if (l) roots.push_back(l);
  std::sort(roots.begin(), roots.end());
  return static_cast<std::size_t>(std::unique(roots.begin(), roots.end()) - roots.begin());
}

}  // namespace

TEST_CASE("gray, median and threshold kernels: serial equals omp") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto img = random_raster(rng, 17 + t * 13, 9 + t * 7);
    const auto g1 = kernels::to_gray_serial(img), g2 = kernels::to_gray_omp(img);
    CHECK(g1.pixels == g2.pixels);
    CHECK(g1.at(3, 2) == luma(img.at(3, 2).r, img.at(3, 2).g, img.at(3, 2).b));
    const auto m = kernels::median_gray_serial(g1);
    CHECK(m == kernels::median_gray_omp(g1));
    auto sorted = g1.pixels;
    std::sort(sorted.begin(), sorted.end());
    CHECK(m == sorted[(sorted.size() + 1) / 2 - 1]);
    const auto d1 = kernels::threshold_absdiff_serial(g1, m, 40), d2 = kernels::threshold_absdiff_omp(g1, m, 40);
    CHECK(d1.diff == d2.diff);
    CHECK(d1.mask == d2.mask);
  }
}

TEST_CASE("connected components: serial equals omp and the propagation oracle") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 60; ++t) {
    const int w = 1 + static_cast<int>(rng() % 70), h = 1 + static_cast<int>(rng() % 90);
    const double density = 0.2 + 0.5 * static_cast<double>(rng() % 100) / 100.0;
    std::bernoulli_distribution fg(density);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h), diff(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = fg(rng);
      diff[i] = static_cast<std::uint8_t>(rng() % 256);
    }
    const auto a = kernels::label_components_serial(mask, diff, w, h);
    const auto b = kernels::label_components_omp(mask, diff, w, h);
    CHECK(a.labels == b.labels);
    CHECK(a.components == b.components);
    std::vector<int> lab;
    CHECK(a.components.size() == count_components(mask, w, h, lab));
    std::int64_t area = 0;
    for (const auto& c : a.components) area += c.area;
    CHECK(area == std::count(mask.begin(), mask.end(), 1));
  }
}
