#include "tubeground/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "tubeground/errors.hpp"
#include "tubeground/stvf.hpp"

namespace tubeground {

using nlohmann::json;

namespace {

json query_to_json(const QueryEmbedding& q) {
  json tags = json::array();
  for (const PosTag t : q.pos_tags) tags.push_back(to_string(t));
  return json{{"text", q.raw_text}, {"tokens", q.tokens}, {"pos", tags}};
}

QueryEmbedding query_from_json(const json& j) {
  QueryEmbedding q;
  q.raw_text = j.at("text").get<std::string>();
  q.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& t : j.at("pos")) q.pos_tags.push_back(pos_tag_from_string(t));
  return q;
}

json boxes_to_json(const std::vector<std::pair<std::int64_t, BoundingBox>>& boxes) {
  json arr = json::array();
  for (const auto& [frame, b] : boxes) {
    arr.push_back(json::array({frame, b.x1, b.y1, b.x2, b.y2}));
  }
  return arr;
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest " + path.string() + " line " + std::to_string(lineno) +
                      ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      m.name = j.at("name").get<std::string>();
      m.split = j.at("split").get<std::string>();
      m.tubelet_dim = j.at("dims").at("tubelet").get<std::size_t>();
      m.clip_dim = j.at("dims").at("clip").get<std::size_t>();
      m.word_dim = j.at("dims").at("word").get<std::size_t>();
      if (j.contains("vocab")) m.vocab_path = j.at("vocab").get<std::string>();
      have_header = true;
    } else if (type == "record") {
      ManifestRecord r;
      r.video_id = j.at("video_id").get<std::string>();
      r.query_id = j.value("query_id", r.video_id);
      r.length = j.at("length").get<std::int64_t>();
      r.frame_rate = j.value("frame_rate", 30.0);
      r.width = j.value("width", std::int64_t{0});
      r.height = j.value("height", std::int64_t{0});
      r.clip_len = j.value("clip_len", std::int64_t{16});
      if (j.contains("tubelets")) r.tubelets_path = j.at("tubelets").get<std::string>();
      if (j.contains("detections")) r.detections_path = j.at("detections").get<std::string>();
      r.clips_path = j.at("clips").get<std::string>();
      r.words_path = j.at("words").get<std::string>();
      r.query = query_from_json(j.at("query"));
      if (j.contains("gt")) {
        const json& gj = j.at("gt");
        GroundTruth gt;
        gt.video_id = r.video_id;
        gt.t_start = gj.at("t_s").get<std::int64_t>();
        gt.t_end = gj.at("t_e").get<std::int64_t>();
        for (const auto& b : gj.at("boxes")) {
          const std::int64_t frame = b.at(0).get<std::int64_t>();
          gt.target_boxes[frame] = BoundingBox{b.at(1).get<double>(), b.at(2).get<double>(),
                                               b.at(3).get<double>(), b.at(4).get<double>()};
        }
        r.ground_truth = std::move(gt);
        r.target_tubelet_id = gj.value("tubelet_id", std::int64_t{-1});
      }
      m.records.push_back(std::move(r));
    } else {
      throw DataError("manifest line " + std::to_string(lineno) +
                      " has unknown type: " + type);
    }
  }
  if (!have_header) throw DataError("manifest missing header line: " + path.string());
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write manifest: " + path.string());
  json header{{"type", "header"},
              {"name", m.name},
              {"split", m.split},
              {"dims", {{"tubelet", m.tubelet_dim}, {"clip", m.clip_dim}, {"word", m.word_dim}}}};
  if (!m.vocab_path.empty()) header["vocab"] = m.vocab_path.generic_string();
  os << header.dump() << "\n";
  for (const ManifestRecord& r : m.records) {
    json j{{"type", "record"},
           {"video_id", r.video_id},
           {"query_id", r.query_id},
           {"length", r.length},
           {"frame_rate", r.frame_rate},
           {"width", r.width},
           {"height", r.height},
           {"clip_len", r.clip_len},
           {"clips", r.clips_path.generic_string()},
           {"words", r.words_path.generic_string()},
           {"query", query_to_json(r.query)}};
    if (!r.tubelets_path.empty()) j["tubelets"] = r.tubelets_path.generic_string();
    if (!r.detections_path.empty()) j["detections"] = r.detections_path.generic_string();
    if (r.ground_truth) {
      const GroundTruth& gt = *r.ground_truth;
      std::vector<std::pair<std::int64_t, BoundingBox>> boxes(gt.target_boxes.begin(),
                                                              gt.target_boxes.end());
      j["gt"] = json{{"t_s", gt.t_start},
                     {"t_e", gt.t_end},
                     {"tubelet_id", r.target_tubelet_id},
                     {"boxes", boxes_to_json(boxes)}};
    }
    os << j.dump() << "\n";
  }
}

void validate_manifest(const DatasetManifest& m) {
  const bool needs_gt = m.split == "val" || m.split == "test";
  for (const ManifestRecord& r : m.records) {
    const auto check_dims = [&](const std::filesystem::path& rel, std::size_t expect_cols,
                                const char* what) {
      if (rel.empty()) return;
      const auto path = m.resolve(rel);
      std::vector<std::size_t> dims;
      try {
        dims = stvf::read_dims(path);
      } catch (const DataError& e) {
        throw DataError("record " + r.video_id + ": " + e.what());
      }
      if (dims.size() != 2 || dims[1] != expect_cols) {
        throw DataError("record " + r.video_id + ": " + what + " dims mismatch in " +
                        path.string() + " (expected cols " + std::to_string(expect_cols) +
                        ")");
      }
    };
    check_dims(r.tubelets_path, 7 + m.tubelet_dim, "tubelet");
    check_dims(r.detections_path, 6 + m.tubelet_dim, "detection");
    check_dims(r.clips_path, m.clip_dim, "clip");
    check_dims(r.words_path, m.word_dim, "word");
    if (r.tubelets_path.empty() && r.detections_path.empty()) {
      throw DataError("record " + r.video_id + " has neither tubelets nor detections");
    }
    if (needs_gt && !r.ground_truth) {
      throw DataError("record " + r.video_id + " in split " + m.split +
                      " is missing ground truth");
    }
    if (r.ground_truth && !r.ground_truth->consistent()) {
      throw DataError("record " + r.video_id + " has inconsistent ground truth boxes");
    }
  }
}

std::string to_json_line(const GroundingRecord& r) {
  json j{{"video_id", r.video_id},
         {"tubelet_id", r.tubelet_id},
         {"t_s", r.t_start},
         {"t_e", r.t_end},
         {"boxes", boxes_to_json(r.boxes)}};
  return j.dump();
}

GroundingRecord grounding_record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad grounding record: ") + e.what());
  }
  GroundingRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.tubelet_id = j.at("tubelet_id").get<std::int64_t>();
  r.t_start = j.at("t_s").get<std::int64_t>();
  r.t_end = j.at("t_e").get<std::int64_t>();
  for (const auto& b : j.at("boxes")) {
    r.boxes.emplace_back(b.at(0).get<std::int64_t>(),
                         BoundingBox{b.at(1).get<double>(), b.at(2).get<double>(),
                                     b.at(3).get<double>(), b.at(4).get<double>()});
  }
  return r;
}

GroundingRecord to_record(const GroundTruth& gt, std::int64_t tubelet_id) {
  GroundingRecord r;
  r.video_id = gt.video_id;
  r.tubelet_id = tubelet_id;
  r.t_start = gt.t_start;
  r.t_end = gt.t_end;
  r.boxes.assign(gt.target_boxes.begin(), gt.target_boxes.end());
  return r;
}

GroundingRecord to_record(const GroundingPrediction& pred, const Tubelet& tubelet) {
  GroundingRecord r;
  r.video_id = pred.video_id;
  r.tubelet_id = pred.tubelet_id;
  r.t_start = pred.t_start;
  r.t_end = pred.t_end;
  for (std::int64_t f = pred.t_start; f < pred.t_end; ++f) {
    const auto it = tubelet.boxes.find(f);
    if (it != tubelet.boxes.end()) r.boxes.emplace_back(f, it->second);
  }
  return r;
}

}  // namespace tubeground
