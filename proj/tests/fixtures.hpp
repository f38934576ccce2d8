#pragma once

// Hand-built fixtures shared by the unit and acceptance tests.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ami/core/image_io.hpp"
#include "ami/core/zip.hpp"
#include "ami/dwca/archive.hpp"
#include "httplib.h"

namespace fixture {

inline std::vector<std::uint8_t> archive(const std::vector<std::pair<std::string, std::string>>& files) {
  ami::zip::Writer w;
  for (const auto& [name, text] : files) w.add(name, text);
  return w.finish();
}

// Tab-delimited, one header line, no quoting; an unknown core column and an
// unknown media column that must pass through.
inline std::vector<std::uint8_t> tab_archive() {
  const std::string meta = R"(<?xml version="1.0" encoding="UTF-8"?>
<archive xmlns="http://rs.tdwg.org/dwc/text/" metadata="eml.xml">
  <core encoding="UTF-8" fieldsTerminatedBy="\t" linesTerminatedBy="\n" fieldsEnclosedBy="" ignoreHeaderLines="1" rowType="http://rs.tdwg.org/dwc/terms/Occurrence">
    <files><location>occurrence.txt</location></files>
    <id index="0"/>
    <field index="1" term="http://rs.gbif.org/terms/1.0/taxonKey"/>
    <field index="2" term="http://rs.tdwg.org/dwc/terms/lifeStage"/>
    <field index="3" term="http://rs.gbif.org/terms/1.0/datasetKey"/>
    <field index="4" term="http://rs.tdwg.org/dwc/terms/decimalLatitude"/>
    <field index="5" term="http://rs.tdwg.org/dwc/terms/decimalLongitude"/>
    <field index="6" term="http://purl.org/dc/terms/publisher"/>
    <field index="7" term="http://rs.tdwg.org/dwc/terms/country"/>
  </core>
  <extension encoding="UTF-8" fieldsTerminatedBy="\t" linesTerminatedBy="\n" fieldsEnclosedBy="" ignoreHeaderLines="1" rowType="http://rs.gbif.org/terms/1.0/Multimedia">
    <files><location>multimedia.txt</location></files>
    <coreid index="0"/>
    <field index="1" term="http://purl.org/dc/terms/identifier"/>
    <field index="2" term="http://purl.org/dc/terms/format"/>
  </extension>
</archive>
)";
  const std::string occ =
      "gbifID\ttaxonKey\tlifeStage\tdatasetKey\tlat\tlon\tpublisher\tcountry\n"
      "1001\t1737\tadult\tds-a\t45.5\t-73.6\tInsectarium\tCA\n"
      "1002\t1738\t\tds-b\t\t\t\tVT\n";
  const std::string mm =
      "gbifID\tidentifier\tformat\n"
      "1001\thttp://img.example/1.jpg\timage/jpeg\n"
      "1001\thttp://img.example/2.jpg\timage/jpeg\n"
      "1002\thttp://img.example/3.png\timage/png\n";
  return archive({{"meta.xml", meta}, {"occurrence.txt", occ}, {"multimedia.txt", mm}});
}

// Comma-delimited with double-quote enclosure and a header; values contain
// commas, quotes and a newline.
inline std::vector<std::uint8_t> comma_quoted_archive() {
  const std::string meta = R"(<archive xmlns="http://rs.tdwg.org/dwc/text/">
  <core fieldsTerminatedBy="," fieldsEnclosedBy='"' ignoreHeaderLines="1" rowType="http://rs.tdwg.org/dwc/terms/Occurrence">
    <files><location>occ.csv</location></files>
    <id index="0"/>
    <field index="0" term="http://rs.tdwg.org/dwc/terms/occurrenceID"/>
    <field index="1" term="http://rs.gbif.org/terms/1.0/taxonKey"/>
    <field index="2" term="http://rs.gbif.org/terms/1.0/datasetKey"/>
    <field index="3" term="http://purl.org/dc/terms/publisher"/>
    <field index="4" term="http://rs.tdwg.org/dwc/terms/locality"/>
  </core>
  <extension fieldsTerminatedBy="," fieldsEnclosedBy='"' ignoreHeaderLines="1" rowType="http://rs.gbif.org/terms/1.0/Multimedia">
    <files><location>media.csv</location></files>
    <coreid index="0"/>
    <field index="1" term="http://purl.org/dc/terms/identifier"/>
    <field index="2" term="http://purl.org/dc/terms/title"/>
  </extension>
</archive>
)";
  const std::string occ =
      "occurrenceID,taxonKey,datasetKey,publisher,locality\n"
      "urn:occ:1,5001,ds-x,\"Museum, Natural History\",\"Ridge \"\"North\"\"\"\n"
      "urn:occ:2,5002,ds-x,,\"two\nlines\"\n"
      "urn:occ:3,5001,ds-y,Lab,plain\n";
  const std::string mm =
      "occurrenceID,identifier,title\n"
      "urn:occ:1,http://img.example/a.jpg,\"wing, dorsal\"\n"
      "urn:occ:3,http://img.example/b.jpg,\n"
      "urn:occ:9,http://img.example/orphan.jpg,no such occurrence\n";
  return archive({{"meta.xml", meta}, {"occ.csv", occ}, {"media.csv", mm}});
}

// Comma-delimited, no header line, no quoting, a constant-valued field and a
// non-multimedia extension that is ignored.
inline std::vector<std::uint8_t> comma_headerless_archive() {
  const std::string meta = R"(<archive xmlns="http://rs.tdwg.org/dwc/text/">
  <core fieldsTerminatedBy="," fieldsEnclosedBy="" ignoreHeaderLines="0" rowType="http://rs.tdwg.org/dwc/terms/Occurrence">
    <files><location>core.txt</location></files>
    <id index="0"/>
    <field index="1" term="http://rs.gbif.org/terms/1.0/taxonKey"/>
    <field index="2" term="http://rs.tdwg.org/dwc/terms/lifeStage"/>
    <field term="http://rs.gbif.org/terms/1.0/datasetKey" default="ds-const"/>
  </core>
  <extension fieldsTerminatedBy="," fieldsEnclosedBy="" ignoreHeaderLines="0" rowType="http://rs.gbif.org/terms/1.0/Multimedia">
    <files><location>mm.txt</location></files>
    <coreid index="0"/>
    <field index="1" term="http://purl.org/dc/terms/identifier"/>
  </extension>
  <extension fieldsTerminatedBy="," ignoreHeaderLines="0" rowType="http://rs.gbif.org/terms/1.0/VernacularName">
    <files><location>vern.txt</location></files>
    <coreid index="0"/>
    <field index="1" term="http://rs.tdwg.org/dwc/terms/vernacularName"/>
  </extension>
</archive>
)";
  const std::string occ = "a1,42,imago\na2,43,pupa\na3,42,adult\nbroken-row-with-too-many,1,2,3,4\n";
  const std::string mm = "a1,file:///tmp/x1.png\na3,file:///tmp/x2.png\na3,file:///tmp/x3.png\n";
  const std::string vern = "a1,Luna moth\n";
  return archive({{"meta.xml", meta}, {"core.txt", occ}, {"mm.txt", mm}, {"vern.txt", vern}});
}

inline std::vector<std::uint8_t> solid_png(int w, int h, std::uint8_t shade) {
  return ami::encode_png(ami::Raster(w, h, {shade, static_cast<std::uint8_t>(255 - shade), 90, 255}));
}

/// Local HTTP server serving fixed bodies; counts requests per path.
class StubServer {
 public:
  StubServer() {
    server_.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      ++hits_[req.path];
      const auto it = bodies_.find(req.path);
      if (it == bodies_.end()) {
        res.status = 404;
        return;
      }
      res.set_content(it->second.first, it->second.second);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  void serve(const std::string& path, const std::vector<std::uint8_t>& body, const std::string& type = "image/png") {
    std::lock_guard lock(mutex_);
    bodies_[path] = {std::string(body.begin(), body.end()), type};
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
  std::size_t hits(const std::string& path) {
    std::lock_guard lock(mutex_);
    return hits_[path];
  }
  std::size_t total_hits() {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [_, k] : hits_) n += k;
    return n;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
  std::map<std::string, std::pair<std::string, std::string>> bodies_;
  std::map<std::string, std::size_t> hits_;
};

struct CleaningCase {
  std::vector<std::uint8_t> archive;
  std::map<std::string, ami::dwca::Verdict> expected;  // by media URL
};

/// Archive whose media cover every removal category. Images are served by
/// `server`; the description-only and habitat datasets are blacklisted.
inline CleaningCase cleaning_archive(StubServer& server) {
  using ami::dwca::Verdict;
  server.serve("/big-a.png", solid_png(200, 150, 10));
  server.serve("/big-a-mirror.png", solid_png(200, 150, 10));  // same bytes, other URL
  server.serve("/thumb.png", solid_png(90, 60, 20));
  server.serve("/larva.png", solid_png(300, 300, 30));
  server.serve("/description.png", solid_png(300, 300, 40));
  server.serve("/habitat.png", solid_png(300, 300, 50));
  server.serve("/nostage.png", solid_png(256, 256, 60));
  server.serve("/imago.png", solid_png(128, 400, 70));
  server.serve("/not-an-image.png", {'h', 'e', 'l', 'l', 'o'}, "text/plain");
  const std::string meta = R"(<archive xmlns="http://rs.tdwg.org/dwc/text/">
  <core fieldsTerminatedBy="\t" ignoreHeaderLines="1" rowType="http://rs.tdwg.org/dwc/terms/Occurrence">
    <files><location>occurrence.txt</location></files>
    <id index="0"/>
    <field index="1" term="http://rs.gbif.org/terms/1.0/taxonKey"/>
    <field index="2" term="http://rs.tdwg.org/dwc/terms/lifeStage"/>
    <field index="3" term="http://rs.gbif.org/terms/1.0/datasetKey"/>
  </core>
  <extension fieldsTerminatedBy="\t" ignoreHeaderLines="1" rowType="http://rs.gbif.org/terms/1.0/Multimedia">
    <files><location>multimedia.txt</location></files>
    <coreid index="0"/>
    <field index="1" term="http://purl.org/dc/terms/identifier"/>
  </extension>
</archive>
)";
  std::string occ = "id\ttaxonKey\tlifeStage\tdatasetKey\n";
  occ += "o01\t1\tAdult\tds-good\n";
  occ += "o02\t1\tadult\tds-good\n";
  occ += "o03\t2\tadult\tds-good\n";
  occ += "o04\t2\tlarva\tds-good\n";
  occ += "o05\t3\tadult\tds-descriptions\n";
  occ += "o06\t3\tadult\tds-habitat\n";
  occ += "o07\t3\t\tds-good\n";
  occ += "o08\t4\timago\tds-good\n";
  occ += "o09\t4\tadult\tds-good\n";
  occ += "o10\t4\tadult\tds-good\n";
  CleaningCase c;
  std::string mm = "id\tidentifier\n";
  auto add = [&](const std::string& occ_id, const std::string& path, Verdict v) {
    mm += occ_id + "\t" + server.url(path) + "\n";
    c.expected[server.url(path)] = v;
  };
  // The mirror is listed first but belongs to the larger occurrence id, so
  // the kept copy is o01's.
  add("o02", "/big-a-mirror.png", Verdict::duplicate);
  add("o01", "/big-a.png", Verdict::kept);
  add("o03", "/thumb.png", Verdict::thumbnail);
  add("o04", "/larva.png", Verdict::non_adult);
  add("o05", "/description.png", Verdict::blacklisted_dataset);
  add("o06", "/habitat.png", Verdict::blacklisted_dataset);
  add("o07", "/nostage.png", Verdict::kept);
  add("o08", "/imago.png", Verdict::kept);
  add("o09", "/not-an-image.png", Verdict::fetch_failed);
  add("o10", "/missing.png", Verdict::fetch_failed);
  c.archive = archive({{"meta.xml", meta}, {"occurrence.txt", occ}, {"multimedia.txt", mm}});
  return c;
}

}  // namespace fixture
