#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tubeground/types.hpp"

namespace tubeground {

struct ManifestRecord {
  std::string video_id;
  std::string query_id;
  std::int64_t length = 0;
  double frame_rate = 30.0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t clip_len = 16;
  std::filesystem::path tubelets_path;    // may be empty when detections given
  std::filesystem::path detections_path;  // optional
  std::filesystem::path clips_path;
  std::filesystem::path words_path;
  QueryEmbedding query;  // text/tokens/tags; embeddings live in words_path
  std::optional<GroundTruth> ground_truth;
  std::int64_t target_tubelet_id = -1;  // annotation when known, else -1
};

struct DatasetManifest {
  std::string name;
  std::string split;  // train | val | test
  std::size_t tubelet_dim = 0;
  std::size_t clip_dim = 0;
  std::size_t word_dim = 0;
  std::filesystem::path root;        // directory the paths are relative to
  std::filesystem::path vocab_path;  // optional shared vocabulary
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return root / p; }
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Checks every referenced feature file exists and its dims agree with the
/// manifest header; val/test records must carry ground truth. Throws
/// DataError describing the first offending record.
void validate_manifest(const DatasetManifest& manifest);

/// Ground-truth / prediction wire record:
/// {video_id, tubelet_id, t_s, t_e, boxes:[[frame,x1,y1,x2,y2],...]}.
struct GroundingRecord {
  std::string video_id;
  std::int64_t tubelet_id = -1;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  std::vector<std::pair<std::int64_t, BoundingBox>> boxes;
};

std::string to_json_line(const GroundingRecord& record);
GroundingRecord grounding_record_from_json(const std::string& line);

GroundingRecord to_record(const GroundTruth& gt, std::int64_t tubelet_id = -1);
GroundingRecord to_record(const GroundingPrediction& pred, const Tubelet& tubelet);

}  // namespace tubeground
