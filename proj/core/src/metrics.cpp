#include "tubeground/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tubeground/errors.hpp"

namespace tubeground {

TemporalIoU temporal_iou(const FrameInterval& pred, const FrameInterval& gt) {
  if (pred.empty() || gt.empty()) {
    throw ContractViolation("temporal_iou requires nonempty intervals");
  }
  TemporalIoU out;
  const FrameInterval inter = interval_intersection(pred, gt);
  for (std::int64_t f = inter.start; f < inter.end; ++f) {
    out.intersection_frames.push_back(f);
  }
  const std::int64_t lo = std::min(pred.start, gt.start);
  const std::int64_t hi = std::max(pred.end, gt.end);
  for (std::int64_t f = lo; f < hi; ++f) {
    if (pred.contains(f) || gt.contains(f)) out.union_frames.push_back(f);
  }
  out.tiou = static_cast<double>(out.intersection_frames.size()) /
             static_cast<double>(out.union_frames.size());
  return out;
}

double video_iou(const GroundingPrediction& pred, const Tubelet& tubelet,
                 const GroundTruth& gt) {
  const TemporalIoU t = temporal_iou(pred.interval(), gt.interval());
  double sum = 0.0;
  for (const std::int64_t f : t.intersection_frames) {
    const auto pit = tubelet.boxes.find(f);
    if (pit == tubelet.boxes.end()) {
      throw ContractViolation("tubelet " + std::to_string(tubelet.tubelet_id) +
                              " has no box on intersection frame " + std::to_string(f));
    }
    const auto git = gt.target_boxes.find(f);
    if (git == gt.target_boxes.end()) {
      throw ContractViolation("ground truth has no box on intersection frame " +
                              std::to_string(f));
    }
    sum += box_iou(pit->second, git->second);
  }
  return sum / static_cast<double>(t.union_frames.size());
}

MetricsReport aggregate_scores(const std::vector<double>& vious,
                               const std::vector<double>& tious,
                               const std::vector<double>& thresholds) {
  if (vious.empty() || vious.size() != tious.size()) {
    throw ContractViolation("aggregate_scores requires nonempty, equally sized score lists");
  }
  MetricsReport report;
  report.n_samples = static_cast<std::int64_t>(vious.size());
  double vsum = 0.0;
  double tsum = 0.0;
  for (std::size_t i = 0; i < vious.size(); ++i) {
    vsum += vious[i];
    tsum += tious[i];
  }
  report.m_viou = vsum / static_cast<double>(vious.size());
  report.m_tiou = tsum / static_cast<double>(tious.size());
  for (const double r : thresholds) {
    std::int64_t hits = 0;
    for (const double v : vious) {
      if (v > r) ++hits;
    }
    report.viou_at[r] = static_cast<double>(hits) / static_cast<double>(vious.size());
  }
  return report;
}

MetricsReport aggregate_metrics(const std::vector<EvalSample>& samples,
                                const std::vector<double>& thresholds) {
  if (samples.empty()) {
    throw ContractViolation("aggregate_metrics requires a nonempty sample list");
  }
  std::vector<double> vious;
  std::vector<double> tious;
  vious.reserve(samples.size());
  tious.reserve(samples.size());
  for (const EvalSample& s : samples) {
    vious.push_back(video_iou(s.prediction, s.tubelet, s.ground_truth));
    tious.push_back(temporal_iou(s.prediction.interval(), s.ground_truth.interval()).tiou);
  }
  return aggregate_scores(vious, tious, thresholds);
}

UpperBoundResult upper_bound_analysis(
    const std::vector<std::pair<VideoRecord, GroundTruth>>& videos,
    const std::vector<double>& thresholds) {
  if (videos.empty()) {
    throw ContractViolation("upper_bound_analysis requires a nonempty video list");
  }
  UpperBoundResult result;
  std::vector<double> vious;
  std::vector<double> tious;
  for (const auto& [video, gt] : videos) {
    if (video.tubelets.empty()) {
      throw ContractViolation("upper_bound_analysis: video " + video.video_id +
                              " has no tubelets");
    }
    double best_viou = -1.0;
    double best_tiou = 0.0;
    GroundingPrediction best;
    for (const Tubelet& tub : video.tubelets) {
      GroundingPrediction pred;
      pred.video_id = video.video_id;
      pred.tubelet_id = tub.tubelet_id;
      const FrameInterval clipped = interval_intersection(gt.interval(), tub.span());
      if (clipped.empty()) {
        // No temporal overlap is achievable with this tubelet; any valid
        // prediction scores 0, so use its full span.
        pred.t_start = tub.start_frame;
        pred.t_end = tub.end_frame;
      } else {
        pred.t_start = clipped.start;
        pred.t_end = clipped.end;
      }
      const double v = video_iou(pred, tub, gt);
      if (v > best_viou) {
        best_viou = v;
        best_tiou = temporal_iou(pred.interval(), gt.interval()).tiou;
        best = pred;
      }
    }
    vious.push_back(best_viou);
    tious.push_back(best_tiou);
    result.predictions.push_back(best);
  }
  result.report = aggregate_scores(vious, tious, thresholds);
  return result;
}

}  // namespace tubeground
