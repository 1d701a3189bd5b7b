#pragma once

#include <cstdint>
#include <vector>

#include "tubeground/tensor.hpp"
#include "tubeground/types.hpp"

namespace tubeground {

struct LinkerConfig {
  double new_track_threshold = 0.21;
  double low_track_threshold = 0.1;
  double high_track_threshold = 0.34;
  double matching_iou_threshold = 0.21;
  /// Parsed for config compatibility; appearance re-identification is not
  /// performed (geometric matching only).
  double appearance_threshold = 0.48;
  std::int64_t buffer_frames = 60;
  std::int64_t detection_stride = 5;

  void validate() const;
};

/// Greedy IoU association of per-frame detections into tubelets.
///
/// Per frame, detections with confidence >= high_track_threshold are matched
/// to active tracks by descending IoU against each track's last box
/// (accepting IoU >= matching_iou_threshold); remaining tracks may then be
/// extended by detections in [low_track_threshold, high_track_threshold).
/// Unmatched high-confidence detections at or above new_track_threshold open
/// new tracks. Tracks unseen for more than buffer_frames close. Boxes and
/// features are linearly interpolated between matched frames; confidence is
/// carried forward. Ties break by lower detection index, then lower track id.
std::vector<Tubelet> link(const std::vector<DetectionBox>& detections,
                          const LinkerConfig& config);

/// count frame indices floor(start + i*(end-start)/count); repeats when the
/// span is shorter than count.
std::vector<std::int64_t> sample_frames(const FrameInterval& span, std::int64_t count);

struct TubeletFeatureTensor {
  /// frames x tubelets x feature dim; zero-filled where invalid.
  Tensor features;
  /// frames x tubelets; 1 where the tubelet covers the sampled frame.
  Tensor valid;
  std::vector<std::int64_t> sampled_frames;
};

/// Samples `count` frames over the whole video and stacks each tubelet's
/// features at those frames.
TubeletFeatureTensor tubelet_feature_tensor(const VideoRecord& video,
                                            std::int64_t count = 32);

}  // namespace tubeground
