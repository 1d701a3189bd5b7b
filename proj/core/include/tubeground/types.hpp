#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tubeground/geometry.hpp"

namespace tubeground {

/// One detector output on a single frame.
struct DetectionBox {
  std::int64_t frame_index = 0;
  BoundingBox box;
  double confidence = 0.0;
  std::vector<double> feature;
};

/// A tracked subject: per-frame boxes, confidences and appearance features
/// spanning the half-open frame interval [start_frame, end_frame).
struct Tubelet {
  std::int64_t tubelet_id = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::map<std::int64_t, BoundingBox> boxes;
  std::map<std::int64_t, double> confidences;
  std::map<std::int64_t, std::vector<double>> features;

  FrameInterval span() const { return {start_frame, end_frame}; }
  bool covers(std::int64_t frame) const { return span().contains(frame); }
  double mean_confidence() const;

  /// Checks the per-frame maps cover [start_frame, end_frame) exactly.
  bool consistent() const;
};

struct VideoRecord {
  std::string video_id;
  std::int64_t length = 0;
  double frame_rate = 30.0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<Tubelet> tubelets;
  /// Clip-level features, one row per clip (C x clip_dim, row-major).
  std::vector<std::vector<double>> clip_features;
  std::int64_t clip_len = 16;
};

enum class PosTag : std::uint8_t { Noun, Adj, Verb, Other };

std::string to_string(PosTag tag);
PosTag pos_tag_from_string(const std::string& s);

/// Tokenized query with per-word embeddings and part-of-speech tags.
struct QueryEmbedding {
  std::string raw_text;
  std::vector<std::string> tokens;
  /// N x word_dim, row-major, one row per token.
  std::vector<std::vector<double>> embeddings;
  std::vector<PosTag> pos_tags;

  std::size_t size() const { return tokens.size(); }
  bool consistent() const {
    return tokens.size() == embeddings.size() && tokens.size() == pos_tags.size();
  }
};

struct GroundTruth {
  std::string video_id;
  std::map<std::int64_t, BoundingBox> target_boxes;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  FrameInterval interval() const { return {t_start, t_end}; }
  bool consistent() const;
};

struct GroundingPrediction {
  std::string video_id;
  std::int64_t tubelet_id = -1;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  FrameInterval interval() const { return {t_start, t_end}; }
};

struct MetricsReport {
  double m_viou = 0.0;
  double m_tiou = 0.0;
  /// Fraction of samples whose vIoU is strictly greater than the threshold.
  std::map<double, double> viou_at;
  std::int64_t n_samples = 0;
};

}  // namespace tubeground
