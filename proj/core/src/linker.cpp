#include "tubeground/linker.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tubeground/errors.hpp"

namespace tubeground {
namespace {

struct Track {
  std::int64_t id = 0;
  std::int64_t last_frame = -1;
  BoundingBox last_box;
  // Matched detections only; interpolation happens at materialization.
  std::vector<const DetectionBox*> hits;
};

struct Candidate {
  double iou;
  std::size_t det_index;   // index into the frame's detection list
  std::size_t track_slot;  // index into the active track vector
  std::int64_t track_id;
};

void greedy_match(const std::vector<const DetectionBox*>& dets,
                  std::vector<Track*>& open_tracks, double matching_iou,
                  std::vector<bool>& det_matched, std::vector<bool>& track_matched) {
  std::vector<Candidate> candidates;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t t = 0; t < open_tracks.size(); ++t) {
      const double iou = box_iou(dets[d]->box, open_tracks[t]->last_box);
      if (iou >= matching_iou) {
        candidates.push_back({iou, d, t, open_tracks[t]->id});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.det_index != b.det_index) return a.det_index < b.det_index;
    return a.track_id < b.track_id;
  });
  for (const Candidate& c : candidates) {
    if (det_matched[c.det_index] || track_matched[c.track_slot]) continue;
    det_matched[c.det_index] = true;
    track_matched[c.track_slot] = true;
    Track* tr = open_tracks[c.track_slot];
    tr->hits.push_back(dets[c.det_index]);
    tr->last_box = dets[c.det_index]->box;
    tr->last_frame = dets[c.det_index]->frame_index;
  }
}

std::vector<double> lerp_vec(const std::vector<double>& a, const std::vector<double>& b,
                             double t) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + (b[i] - a[i]) * t;
  return out;
}

Tubelet materialize(const Track& track) {
  Tubelet tub;
  tub.tubelet_id = track.id;
  tub.start_frame = track.hits.front()->frame_index;
  tub.end_frame = track.hits.back()->frame_index + 1;
  for (std::size_t h = 0; h < track.hits.size(); ++h) {
    const DetectionBox* det = track.hits[h];
    tub.boxes[det->frame_index] = det->box;
    tub.confidences[det->frame_index] = det->confidence;
    tub.features[det->frame_index] = det->feature;
    if (h + 1 < track.hits.size()) {
      const DetectionBox* next = track.hits[h + 1];
      const std::int64_t gap = next->frame_index - det->frame_index;
      for (std::int64_t f = det->frame_index + 1; f < next->frame_index; ++f) {
        const double t =
            static_cast<double>(f - det->frame_index) / static_cast<double>(gap);
        tub.boxes[f] = lerp_box(det->box, next->box, t);
        tub.confidences[f] = det->confidence;  // carried forward
        tub.features[f] = lerp_vec(det->feature, next->feature, t);
      }
    }
  }
  return tub;
}

}  // namespace

void LinkerConfig::validate() const {
  if (!(low_track_threshold >= 0.0 && low_track_threshold <= high_track_threshold &&
        high_track_threshold <= 1.0)) {
    throw ConfigError("linker thresholds must satisfy 0 <= low <= high <= 1");
  }
  if (!(matching_iou_threshold > 0.0 && matching_iou_threshold <= 1.0)) {
    throw ConfigError("matching_iou_threshold must be in (0, 1]");
  }
  if (buffer_frames < 0) throw ConfigError("buffer_frames must be >= 0");
  if (detection_stride < 1) throw ConfigError("detection_stride must be >= 1");
}

std::vector<Tubelet> link(const std::vector<DetectionBox>& detections,
                          const LinkerConfig& config) {
  config.validate();
  if (detections.empty()) return {};

  const std::size_t feat_dim = detections.front().feature.size();
  std::map<std::int64_t, std::vector<const DetectionBox*>> by_frame;
  std::int64_t prev_frame = detections.front().frame_index;
  for (const DetectionBox& det : detections) {
    if (det.frame_index < prev_frame) {
      throw ContractViolation("detections must be sorted by frame");
    }
    prev_frame = det.frame_index;
    if (det.feature.size() != feat_dim) {
      throw DataError("inconsistent feature dimensions in detections (" +
                      std::to_string(det.feature.size()) + " vs " +
                      std::to_string(feat_dim) + ")");
    }
    by_frame[det.frame_index].push_back(&det);
  }

  std::vector<Track> tracks;    // every track ever opened, id = index
  std::vector<std::size_t> active;  // indices into tracks
  for (const auto& [frame, dets] : by_frame) {
    // Close tracks that have been unseen for too long.
    std::vector<std::size_t> still_active;
    for (const std::size_t ti : active) {
      if (frame - tracks[ti].last_frame <= config.buffer_frames) {
        still_active.push_back(ti);
      }
    }
    active.swap(still_active);

    std::vector<const DetectionBox*> high;
    std::vector<const DetectionBox*> low;
    for (const DetectionBox* det : dets) {
      if (det->confidence >= config.high_track_threshold) {
        high.push_back(det);
      } else if (det->confidence >= config.low_track_threshold) {
        low.push_back(det);
      }
    }

    std::vector<Track*> open;
    open.reserve(active.size());
    for (const std::size_t ti : active) open.push_back(&tracks[ti]);

    std::vector<bool> high_matched(high.size(), false);
    std::vector<bool> track_matched(open.size(), false);
    greedy_match(high, open, config.matching_iou_threshold, high_matched, track_matched);

    // Second pass: remaining tracks may be extended by low-confidence
    // detections, which never open tracks themselves.
    std::vector<Track*> remaining;
    for (std::size_t t = 0; t < open.size(); ++t) {
      if (!track_matched[t]) remaining.push_back(open[t]);
    }
    std::vector<bool> low_matched(low.size(), false);
    std::vector<bool> rem_matched(remaining.size(), false);
    greedy_match(low, remaining, config.matching_iou_threshold, low_matched, rem_matched);

    for (std::size_t d = 0; d < high.size(); ++d) {
      if (high_matched[d]) continue;
      if (high[d]->confidence < config.new_track_threshold) continue;
      Track tr;
      tr.id = static_cast<std::int64_t>(tracks.size());
      tr.last_frame = high[d]->frame_index;
      tr.last_box = high[d]->box;
      tr.hits.push_back(high[d]);
      tracks.push_back(std::move(tr));
      active.push_back(tracks.size() - 1);
    }
  }

  std::vector<Tubelet> out;
  out.reserve(tracks.size());
  for (const Track& tr : tracks) {
    if (!tr.hits.empty()) out.push_back(materialize(tr));
  }
  return out;
}

std::vector<std::int64_t> sample_frames(const FrameInterval& span, std::int64_t count) {
  if (count < 1) throw ContractViolation("sample_frames: count must be >= 1");
  if (span.empty()) throw ContractViolation("sample_frames: empty span");
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(count));
  const double len = static_cast<double>(span.length());
  for (std::int64_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::int64_t>(
        std::floor(static_cast<double>(span.start) +
                   static_cast<double>(i) * len / static_cast<double>(count)));
    out.push_back(std::min(idx, span.end - 1));
  }
  return out;
}

TubeletFeatureTensor tubelet_feature_tensor(const VideoRecord& video, std::int64_t count) {
  if (video.tubelets.empty()) {
    throw ContractViolation("tubelet_feature_tensor: video " + video.video_id +
                            " has no tubelets");
  }
  if (video.length < 1) {
    throw ContractViolation("tubelet_feature_tensor: empty video");
  }
  const std::size_t k = video.tubelets.size();
  std::size_t feat_dim = 0;
  for (const Tubelet& tub : video.tubelets) {
    if (!tub.features.empty()) {
      feat_dim = tub.features.begin()->second.size();
      break;
    }
  }
  TubeletFeatureTensor out;
  out.sampled_frames = sample_frames({0, video.length}, count);
  const auto t_count = static_cast<std::size_t>(count);
  out.features = Tensor({t_count, k, feat_dim});
  out.valid = Tensor({t_count, k});
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::int64_t frame = out.sampled_frames[t];
    for (std::size_t ki = 0; ki < k; ++ki) {
      const Tubelet& tub = video.tubelets[ki];
      const auto it = tub.features.find(frame);
      if (it == tub.features.end()) continue;
      out.valid.at(t, ki) = 1.0;
      for (std::size_t d = 0; d < feat_dim; ++d) {
        out.features.at(t, ki, d) = it->second[d];
      }
    }
  }
  return out;
}

}  // namespace tubeground
