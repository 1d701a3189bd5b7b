#pragma once

#include <cstdint>
#include <vector>

#include "tubeground/types.hpp"

namespace tubeground {

/// Temporal overlap between two half-open frame intervals.
struct TemporalIoU {
  double tiou = 0.0;
  std::vector<std::int64_t> intersection_frames;  // S_i, sorted
  std::vector<std::int64_t> union_frames;         // S_u, sorted
};

TemporalIoU temporal_iou(const FrameInterval& pred, const FrameInterval& gt);

/// Spatio-temporal overlap: mean per-frame box IoU over the intersection
/// frames, normalized by the size of the temporal union.
///
/// Throws ContractViolation if the tubelet or ground truth is missing a box
/// on an intersection frame.
double video_iou(const GroundingPrediction& pred, const Tubelet& tubelet,
                 const GroundTruth& gt);

struct EvalSample {
  GroundingPrediction prediction;
  Tubelet tubelet;
  GroundTruth ground_truth;
};

/// Aggregates vIoU/tIoU over an evaluation set. Thresholds default to
/// {0.3, 0.5}; vIoU@R counts samples with vIoU strictly greater than R.
MetricsReport aggregate_metrics(const std::vector<EvalSample>& samples,
                                const std::vector<double>& thresholds = {0.3, 0.5});

/// Pre-scored variant used when vIoU/tIoU are already known per sample.
MetricsReport aggregate_scores(const std::vector<double>& vious,
                               const std::vector<double>& tious,
                               const std::vector<double>& thresholds = {0.3, 0.5});

/// Best achievable selection: per video the ground-truth interval is clipped
/// to each tubelet's span, the tubelet maximizing vIoU is kept, and the
/// resulting oracle predictions are aggregated.
struct UpperBoundResult {
  MetricsReport report;
  std::vector<GroundingPrediction> predictions;
};

UpperBoundResult upper_bound_analysis(
    const std::vector<std::pair<VideoRecord, GroundTruth>>& videos,
    const std::vector<double>& thresholds = {0.3, 0.5});

}  // namespace tubeground
