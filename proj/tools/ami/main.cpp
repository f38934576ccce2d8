// ami: command-line front end of the engine.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 model backend error.

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/image_io.hpp"
#include "ami/dwca/archive.hpp"
#include "ami/dwca/media.hpp"
#include "ami/inference/stages.hpp"
#include "ami/pipeline/engine.hpp"
#include "ami/service/service.hpp"
#include "ami/synthgen/crop_store.hpp"
#include "ami/synthgen/scene.hpp"
#include "ami/taxonomy/checklist.hpp"

namespace {

using json = nlohmann::json;
namespace stdfs = std::filesystem;
using namespace ami;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration: return 1;
    case ErrorKind::stage: return 3;
    default: return 2;
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else fs::atomic_write(path, text);
}

std::vector<Raster> load_pngs(const stdfs::path& dir) {
  std::vector<stdfs::path> files;
  for (const auto& e : stdfs::directory_iterator(dir))
    if (e.path().extension() == ".png" || e.path().extension() == ".jpg" || e.path().extension() == ".jpeg")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Raster> out;
  for (const auto& f : files) out.push_back(read_image(f));
  return out;
}

/// "backend" or "backend:model_uri".
inference::ModelSpec parse_model_flag(const std::string& text, inference::Stage stage, double threshold, int resolution) {
  inference::ModelSpec spec;
  spec.stage = stage;
  const auto colon = text.find(':');
  spec.backend = inference::parse_backend(text.substr(0, colon));
  if (colon != std::string::npos) spec.model_uri = text.substr(colon + 1);
  spec.threshold = threshold;
  spec.input_resolution = resolution;
  inference::validate(spec);
  return spec;
}

std::string job_line(const pipeline::PipelineJob& j) {
  std::ostringstream s;
  s << j.job_id << "  " << pipeline::to_string(j.state) << "  " << j.session_id << "  " << j.frames_done << "/"
    << j.frames_total;
  if (j.frames_failed) s << " (" << j.frames_failed << " failed)";
  if (j.error) s << "  " << *j.error;
  return s.str();
}

/// Exit status after a worker run: 3 if a job it ran failed on a model
/// stage, 2 if one failed otherwise.
int run_status(const std::vector<pipeline::PipelineJob>& before, const std::vector<pipeline::PipelineJob>& after) {
  std::map<std::string, std::size_t> attempts;
  for (const auto& j : before) attempts[j.job_id] = j.attempts;
  int code = 0;
  for (const auto& j : after) {
    if (j.state != pipeline::JobState::failed) continue;
    const auto it = attempts.find(j.job_id);
    if (it != attempts.end() && it->second == j.attempts) continue;
    code = std::max(code, j.error && j.error->rfind("stage:", 0) == 0 ? 3 : 2);
  }
  return code;
}

service::Service* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated moth monitoring engine"};
  app.require_subcommand(1);
  std::string home_flag;
  app.add_option("--home", home_flag, "Engine home directory (default $AMI_HOME or ./ami_home)");
  auto home = [&] { return home_flag.empty() ? pipeline::default_home() : stdfs::path(home_flag); };

  // taxonomy
  auto* tax = app.add_subcommand("taxonomy", "Checklist reconciliation and lineage");
  tax->require_subcommand(1);
  std::string backbone_path, checklist_path, out_path;
  double fuzzy = taxonomy::kDefaultFuzzyThreshold;
  auto* tax_norm = tax->add_subcommand("normalize", "Resolve a checklist against a backbone");
  tax_norm->add_option("--backbone", backbone_path, "Backbone CSV")->required();
  tax_norm->add_option("--checklist", checklist_path, "Names, one per line, or CSV with scientificName")->required();
  tax_norm->add_option("--threshold", fuzzy, "Fuzzy similarity threshold")->check(CLI::Range(0.0, 1.0));
  tax_norm->add_option("-o,--output", out_path, "Processed checklist CSV (default stdout)");
  std::int64_t taxon_key = 0;
  auto* tax_lin = tax->add_subcommand("lineage", "Species, genus and family of a taxon key");
  tax_lin->add_option("--backbone", backbone_path, "Backbone CSV")->required();
  tax_lin->add_option("key", taxon_key, "Taxon key")->required();

  // dwca
  auto* dw = app.add_subcommand("dwca", "Darwin Core Archive ingestion and cleaning");
  dw->require_subcommand(1);
  std::string archive_path, out_dir, occ_path, media_path, cache_dir, manifest_path, rejects_path;
  auto* dw_parse = dw->add_subcommand("parse", "Parse an archive into occurrences.jsonl and media.jsonl");
  dw_parse->add_option("archive", archive_path, "DwC-A zip")->required();
  dw_parse->add_option("--out", out_dir, "Output directory")->required();
  int concurrency = 4, retries = 2;
  bool retry_failed = false;
  auto* dw_fetch = dw->add_subcommand("fetch", "Download and cache media, filling hashes and sizes");
  dw_fetch->add_option("--media", media_path, "media.jsonl (updated in place)")->required();
  dw_fetch->add_option("--cache", cache_dir, "Cache directory")->required();
  dw_fetch->add_option("--concurrency", concurrency)->check(CLI::PositiveNumber);
  dw_fetch->add_option("--retries", retries)->check(CLI::NonNegativeNumber);
  dw_fetch->add_flag("--retry-failed", retry_failed, "Retry records already marked fetch_failed");
  int thumb = 128;
  std::vector<std::string> blacklist, adult_stages;
  auto* dw_clean = dw->add_subcommand("clean", "Assign cleaning verdicts to media");
  dw_clean->add_option("--occurrences", occ_path, "occurrences.jsonl")->required();
  dw_clean->add_option("--media", media_path, "media.jsonl (updated in place)")->required();
  dw_clean->add_option("--thumbnail-min", thumb, "Minimum image side in pixels")->check(CLI::NonNegativeNumber);
  dw_clean->add_option("--blacklist", blacklist, "Dataset keys to drop");
  dw_clean->add_option("--adult-stages", adult_stages, "Life-stage values treated as adult");
  std::size_t cap = dwca::kDefaultCapPerSpecies;
  std::uint64_t seed = 0;
  auto* dw_export = dw->add_subcommand("export", "Write a per-species capped training manifest");
  dw_export->add_option("--occurrences", occ_path)->required();
  dw_export->add_option("--media", media_path)->required();
  dw_export->add_option("--checklist", checklist_path, "Processed checklist CSV")->required();
  dw_export->add_option("--cache", cache_dir)->required();
  dw_export->add_option("--cap", cap, "Images per species")->check(CLI::PositiveNumber);
  dw_export->add_option("--seed", seed);
  dw_export->add_option("-o,--output", manifest_path, "Manifest CSV (default stdout)");
  dw_export->add_option("--rejects", rejects_path, "Rejects CSV");
  std::string delimiter = "tab";
  bool no_header = false;
  auto* dw_pack = dw->add_subcommand("pack", "Serialize occurrences and media back into an archive");
  dw_pack->add_option("--occurrences", occ_path)->required();
  dw_pack->add_option("--media", media_path)->required();
  dw_pack->add_option("-o,--output", archive_path)->required();
  dw_pack->add_option("--delimiter", delimiter)->check(CLI::IsMember({"tab", "comma"}));
  dw_pack->add_flag("--no-header", no_header);

  // synth
  auto* syn = app.add_subcommand("synth", "Synthetic detection scenes");
  syn->require_subcommand(1);
  std::string bg_dir, crops_dir;
  synthgen::DatasetSpec ds;
  std::vector<int> rotations{0, 90, 180, 270};
  bool no_overlap = false, no_flip = false, serial = false;
  std::size_t begin = 0;
  std::optional<std::size_t> end;
  auto* syn_gen = syn->add_subcommand("generate", "Render scenes and a COCO annotation file");
  syn_gen->add_option("--backgrounds", bg_dir, "Directory of background images")->required();
  syn_gen->add_option("--crops", crops_dir, "Crop store directory (approved crops are used)")->required();
  syn_gen->add_option("--out", out_dir, "Output directory")->required();
  syn_gen->add_option("--scenes", ds.n_scenes, "Number of scenes");
  syn_gen->add_option("--seed", ds.seed);
  syn_gen->add_option("--n-min", ds.scene.n_min)->check(CLI::NonNegativeNumber);
  syn_gen->add_option("--n-max", ds.scene.n_max)->check(CLI::NonNegativeNumber);
  syn_gen->add_flag("--no-overlap", no_overlap);
  syn_gen->add_option("--max-iou", ds.scene.max_overlap_iou)->check(CLI::Range(0.0, 1.0));
  syn_gen->add_option("--min-separation", ds.scene.min_separation_px)->check(CLI::NonNegativeNumber);
  syn_gen->add_flag("--no-flip", no_flip);
  syn_gen->add_option("--rotations", rotations)->delimiter(',');
  syn_gen->add_option("--begin", begin, "First scene index (shard mode)");
  syn_gen->add_option("--end", end, "One past the last scene index (shard mode)");
  syn_gen->add_flag("--serial", serial, "Render on one thread");
  std::string crop_id, review_state;
  auto* syn_review = syn->add_subcommand("review", "Set a crop's review state");
  syn_review->add_option("--crops", crops_dir)->required();
  syn_review->add_option("crop", crop_id)->required();
  syn_review->add_option("state", review_state)->required()->check(CLI::IsMember({"unreviewed", "approved", "rejected"}));
  std::vector<std::string> merge_inputs;
  auto* syn_merge = syn->add_subcommand("merge", "Merge shard annotation files");
  syn_merge->add_option("inputs", merge_inputs)->required();
  syn_merge->add_option("-o,--output", out_path)->required();

  // inference
  std::string image_path, detector_flag = "blob", binary_flag, species_flag, life_flag, spec_path;
  double det_threshold = 0.5, bin_threshold = 0.5, sp_threshold = 0.0, ls_threshold = 0.5;
  int resolution = 128, top_k = 5;
  auto add_model_flags = [&](CLI::App* cmd, bool binary_required) {
    cmd->add_option("--detector", detector_flag, "backend[:model_uri]");
    auto* b = cmd->add_option("--binary", binary_flag, "backend[:model_uri]");
    if (binary_required) b->required();
    cmd->add_option("--species", species_flag, "backend[:model_uri]");
    cmd->add_option("--life-stage", life_flag, "backend[:model_uri]");
    cmd->add_option("--detector-threshold", det_threshold)->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--binary-threshold", bin_threshold)->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--resolution", resolution)->check(CLI::PositiveNumber);
    cmd->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  };
  auto stage_specs = [&] {
    inference::StageSpecs s;
    s.detector = parse_model_flag(detector_flag, inference::Stage::detector, det_threshold, resolution);
    s.binary = parse_model_flag(binary_flag, inference::Stage::binary, bin_threshold, resolution);
    if (!species_flag.empty())
      s.species = parse_model_flag(species_flag, inference::Stage::species, sp_threshold, resolution);
    if (!life_flag.empty())
      s.life_stage = parse_model_flag(life_flag, inference::Stage::life_stage, ls_threshold, resolution);
    s.top_k = top_k;
    return s;
  };
  auto* run = app.add_subcommand("run", "Run the staged pipeline on one image");
  run->add_option("image", image_path)->required();
  add_model_flags(run, true);
  auto* recipe = app.add_subcommand("recipe", "Print the species-classifier training recipe");
  recipe->add_option("-o,--output", out_path);

  // pipeline
  std::string data_root;
  auto* init = app.add_subcommand("init", "Create or update the engine home configuration");
  init->add_option("--data-root", data_root, "Root of root/<deployment>/... image trees");
  double failure_threshold = -1;
  int frame_workers = 0;
  init->add_option("--failure-threshold", failure_threshold)->check(CLI::Range(0.0, 1.0));
  init->add_option("--frame-workers", frame_workers)->check(CLI::PositiveNumber);
  auto* discover = app.add_subcommand("discover", "Group images into noon-to-noon sessions");
  discover->add_option("--root", data_root, "Data root (default: configured)");
  std::string session_id;
  double gate = 0.8;
  std::vector<double> weights;
  auto* enqueue = app.add_subcommand("enqueue", "Queue a session for processing");
  enqueue->add_option("--session", session_id)->required();
  enqueue->add_option("--spec", spec_path, "Job spec JSON (overrides model flags)");
  add_model_flags(enqueue, false);
  enqueue->add_option("--gate", gate)->check(CLI::Range(0.0, 1.0));
  enqueue->add_option("--weights", weights, "w_iou,w_size,w_dist,w_feat")->delimiter(',')->expected(4);
  int n_workers = 1;
  auto* work = app.add_subcommand("work", "Process queued jobs until the queue is empty");
  work->add_option("-n", n_workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* resume = app.add_subcommand("resume", "Finish jobs abandoned by crashed workers");
  std::string job_id;
  auto* status = app.add_subcommand("status", "Show jobs");
  status->add_option("job", job_id);
  bool as_json = false;
  status->add_flag("--json", as_json);
  auto* cancel = app.add_subcommand("cancel", "Cancel a queued or running job");
  cancel->add_option("job", job_id)->required();
  auto* retry = app.add_subcommand("retry", "Requeue a failed job");
  retry->add_option("job", job_id)->required();
  std::string format = "jsonl";
  auto* exp = app.add_subcommand("export", "Export a session's latest results");
  exp->add_option("--session", session_id)->required();
  exp->add_option("--format", format)->check(CLI::IsMember({"jsonl", "csv"}));
  exp->add_option("-o,--output", out_path);
  service::ServiceConfig svc;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--host", svc.host);
  serve->add_option("--port", svc.port);
  serve->add_option("--crops", svc.crops_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (tax_norm->parsed()) {
      const auto bb = taxonomy::Backbone::load_csv(backbone_path);
      const auto names = taxonomy::read_checklist_names(fs::read_text(checklist_path));
      write_output(out_path, taxonomy::format_processed_checklist(taxonomy::normalize_checklist(names, bb, fuzzy), bb));
    } else if (tax_lin->parsed()) {
      const auto bb = taxonomy::Backbone::load_csv(backbone_path);
      const auto lin = bb.lineage(taxon_key);
      auto opt = [](const std::optional<taxonomy::TaxonKey>& k) { return k ? json(*k) : json(nullptr); };
      std::cout << json{{"species", opt(lin.species)}, {"genus", opt(lin.genus)}, {"family", lin.family}}.dump() << "\n";
    } else if (dw_parse->parsed()) {
      const auto parsed = dwca::parse_archive(archive_path);
      stdfs::create_directories(out_dir);
      fs::atomic_write(stdfs::path(out_dir) / "occurrences.jsonl", dwca::occurrences_to_jsonl(parsed.occurrences));
      fs::atomic_write(stdfs::path(out_dir) / "media.jsonl", dwca::media_to_jsonl(parsed.media));
      for (const auto& w : parsed.report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << parsed.occurrences.size() << " occurrences, " << parsed.media.size() << " media, "
                << parsed.report.skipped_rows << " rows skipped, " << parsed.report.unmatched_extension_rows
                << " unmatched extension rows\n";
    } else if (dw_fetch->parsed()) {
      auto media = dwca::media_from_jsonl(fs::read_text(media_path));
      dwca::FetchOptions o;
      o.cache_dir = cache_dir;
      o.concurrency = concurrency;
      o.retries = retries;
      o.retry_failed = retry_failed;
      const auto stats = dwca::fetch_media(media, o);
      fs::atomic_write(media_path, dwca::media_to_jsonl(media));
      std::cout << stats.downloads << " downloads, " << stats.cache_hits << " cache hits, " << stats.failures
                << " failures\n";
    } else if (dw_clean->parsed()) {
      const auto occ = dwca::occurrences_from_jsonl(fs::read_text(occ_path));
      auto media = dwca::media_from_jsonl(fs::read_text(media_path));
      dwca::CleaningRules rules;
      rules.thumbnail_min_px = thumb;
      rules.dataset_blacklist = {blacklist.begin(), blacklist.end()};
      if (!adult_stages.empty()) rules.adult_stages = {adult_stages.begin(), adult_stages.end()};
      const auto summary = dwca::clean_media(occ, media, rules);
      fs::atomic_write(media_path, dwca::media_to_jsonl(media));
      for (const auto& [v, n] : summary.counts) std::cout << dwca::to_string(v) << "\t" << n << "\n";
      std::cout << "total\t" << summary.total << "\nneeds_review\t" << summary.needs_review << "\n";
    } else if (dw_export->parsed()) {
      const auto occ = dwca::occurrences_from_jsonl(fs::read_text(occ_path));
      const auto media = dwca::media_from_jsonl(fs::read_text(media_path));
      const auto checklist = taxonomy::parse_processed_checklist(fs::read_text(checklist_path));
      const auto result = dwca::export_training_set(occ, media, checklist, cache_dir, cap, seed);
      write_output(manifest_path, dwca::format_manifest(result.rows));
      if (!rejects_path.empty()) fs::atomic_write(rejects_path, dwca::format_rejects(result.rejects));
      if (!result.rejects.empty()) std::cerr << result.rejects.size() << " records rejected\n";
    } else if (dw_pack->parsed()) {
      const auto occ = dwca::occurrences_from_jsonl(fs::read_text(occ_path));
      const auto media = dwca::media_from_jsonl(fs::read_text(media_path));
      dwca::SerializeOptions o;
      o.delimiter = delimiter == "comma" ? ',' : '\t';
      if (o.delimiter == ',') o.quote = '"';
      o.header = !no_header;
      fs::atomic_write(archive_path, dwca::serialize_archive(occ, media, o));
    } else if (syn_gen->parsed()) {
      const auto backgrounds = load_pngs(bg_dir);
      const auto crops = synthgen::CropStore(crops_dir).load_approved();
      ds.scene.allow_overlap = !no_overlap;
      ds.scene.hflip = !no_flip;
      ds.scene.rotations = rotations;
      ds.out_dir = out_dir;
      const auto exec = serial ? kernels::Execution::serial : kernels::Execution::parallel;
      if (begin == 0 && !end) {
        const auto records = synthgen::generate_dataset(backgrounds, crops, ds, exec);
        std::size_t boxes = 0, dropped = 0;
        for (const auto& r : records) {
          boxes += r.annotation.boxes.size();
          dropped += r.dropped_crops;
        }
        std::cout << records.size() << " scenes, " << boxes << " boxes, " << dropped << " pastes dropped\n";
      } else {
        if (crops.empty()) throw ConfigurationError("at least one approved crop is required");
        const auto records = synthgen::render_scenes(backgrounds, crops, ds, begin, end.value_or(ds.n_scenes), exec);
        const std::string name = "annotations_" + std::to_string(begin) + "_" + std::to_string(end.value_or(ds.n_scenes)) + ".json";
        fs::atomic_write(stdfs::path(out_dir) / name, synthgen::coco_json(records));
        std::cout << records.size() << " scenes written to shard " << name << "\n";
      }
    } else if (syn_review->parsed()) {
      const auto info = synthgen::CropStore(crops_dir).set_review_state(crop_id, synthgen::parse_review_state(review_state));
      std::cout << info.id << " " << synthgen::to_string(info.review_state) << "\n";
    } else if (syn_merge->parsed()) {
      std::vector<synthgen::SceneRecord> all;
      for (const auto& in : merge_inputs) {
        auto part = synthgen::parse_coco_json(fs::read_text(in));
        all.insert(all.end(), part.begin(), part.end());
      }
      fs::atomic_write(out_path, synthgen::coco_json(std::move(all)));
    } else if (run->parsed()) {
      const auto dets = inference::run_stages(read_image(image_path), stage_specs());
      for (const auto& d : dets) std::cout << inference::to_json(d).dump() << "\n";
    } else if (recipe->parsed()) {
      write_output(out_path, inference::training_recipe_json());
    } else if (init->parsed()) {
      stdfs::create_directories(home());
      pipeline::Engine engine(home());
      auto cfg = engine.config();
      if (!data_root.empty()) cfg.data_root = stdfs::absolute(data_root);
      if (failure_threshold >= 0) cfg.failure_threshold = failure_threshold;
      if (frame_workers > 0) cfg.frame_workers = frame_workers;
      engine.set_config(cfg);
      std::cout << engine.config().to_json().dump(2) << "\n";
    } else if (discover->parsed()) {
      pipeline::Engine engine(home());
      const auto r = engine.discover(data_root.empty() ? std::nullopt : std::optional<stdfs::path>(data_root));
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& s : r.sessions) std::cout << s.session_id << "\t" << s.frames.size() << " frames\n";
      if (!r.unsorted.empty()) std::cout << "unsorted\t" << r.unsorted.size() << " images\n";
    } else if (enqueue->parsed()) {
      pipeline::Engine engine(home());
      pipeline::JobSpec spec;
      if (!spec_path.empty()) {
        spec = pipeline::job_spec_from_json(json::parse(fs::read_text(spec_path)));
      } else {
        if (binary_flag.empty()) throw ConfigurationError("--binary is required unless --spec is given");
        spec.stages = stage_specs();
        spec.tracker.gate = gate;
        if (weights.size() == 4) {
          spec.tracker.w_iou = weights[0];
          spec.tracker.w_size = weights[1];
          spec.tracker.w_dist = weights[2];
          spec.tracker.w_feat = weights[3];
        }
        spec = pipeline::job_spec_from_json(pipeline::to_json(spec));
      }
      const auto r = engine.enqueue(session_id, spec);
      std::cout << r.job.job_id << (r.existing ? " (existing)" : "") << "\n";
    } else if (work->parsed()) {
      pipeline::Engine engine(home());
      const auto before = engine.jobs();
      const auto n = engine.run_workers(n_workers);
      std::cout << n << " jobs processed\n";
      const auto after = engine.jobs();
      for (const auto& j : after) std::cout << job_line(j) << "\n";
      return run_status(before, after);
    } else if (resume->parsed()) {
      pipeline::Engine engine(home());
      const auto before = engine.jobs();
      std::cout << engine.resume() << " jobs resumed\n";
      return run_status(before, engine.jobs());
    } else if (status->parsed()) {
      pipeline::Engine engine(home());
      if (!job_id.empty()) {
        const auto j = engine.job(job_id);
        if (!j) throw NotFoundError("job " + job_id + " not found");
        std::cout << (as_json ? pipeline::to_json(*j).dump(2) : job_line(*j)) << "\n";
      } else {
        for (const auto& j : engine.jobs()) std::cout << (as_json ? pipeline::to_json(j).dump() : job_line(j)) << "\n";
      }
    } else if (cancel->parsed()) {
      pipeline::Engine engine(home());
      std::cout << job_line(engine.cancel(job_id)) << "\n";
    } else if (retry->parsed()) {
      pipeline::Engine engine(home());
      std::cout << job_line(engine.retry(job_id)) << "\n";
    } else if (exp->parsed()) {
      pipeline::Engine engine(home());
      write_output(out_path, engine.export_session(session_id, format));
    } else if (serve->parsed()) {
      pipeline::Engine engine(home());
      service::Service server(engine, svc);
      const int port = server.bind();
      std::cerr << "listening on http://" << svc.host << ":" << port << "\n";
      g_service = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_service = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error (parse): " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 2;
  }
  return 0;
}
