#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tubeground/linker.hpp"
#include "tubeground/manifest.hpp"
#include "tubeground/metrics.hpp"
#include "tubeground/referral.hpp"
#include "tubeground/spatial.hpp"
#include "tubeground/synthetic.hpp"
#include "tubeground/temporal.hpp"

namespace tubeground {

std::int64_t difficulty(const VideoRecord& video);

struct CurriculumStage {
  std::int64_t stage_index = 1;  // 1-based
  std::optional<std::int64_t> tubelet_bound;  // nullopt = unbounded
  std::vector<std::string> video_ids;
};

/// Nested stages: stage i holds every video whose tubelet count is at most
/// bounds[i]; the final stage must be unbounded. Throws ConfigError when a
/// stage would be empty.
std::vector<CurriculumStage> build_stages(
    const std::vector<std::pair<std::string, std::int64_t>>& difficulties,
    const std::vector<std::optional<std::int64_t>>& bounds = {4, 7, std::nullopt});

struct TrainPlan {
  std::vector<std::optional<std::int64_t>> stage_bounds = {4, 7, std::nullopt};
  std::int64_t total_epochs = 10;  // step budget = epochs * ceil(n / batch)
  std::optional<std::int64_t> total_steps;  // explicit override
  std::int64_t batch_size = 32;
  std::uint64_t seed = 7;
  bool use_crg = true;
  bool sps_enabled = true;
  double spatial_lr = 1e-4;
  double temporal_lr = 4e-4;
  std::int64_t max_tubelets = 10;  // keep the highest-mean-confidence tubelets
  std::int64_t frame_samples = 32;
};

/// A fully featurized training/eval record.
struct LoadedRecord {
  std::string video_id;
  VideoRecord video;
  TubeletFeatureTensor features;
  QueryEmbedding query;
  Tensor words;      // N x word_dim
  Tensor crg_words;  // referral word matrix (falls back to words)
  Tensor clips;      // C x clip_dim
  std::optional<GroundTruth> ground_truth;
  std::int64_t target_tubelet_id = -1;
  referral::DecomposedQuery decomposition;
  MaskedQuery masked;      // over the original token sequence
  MaskedQuery crg_masked;  // over the referral token sequence
};

struct LoadOptions {
  std::int64_t frame_samples = 32;
  std::int64_t max_tubelets = 10;
  LinkerConfig linker;  // used when a record only carries detections
};

std::vector<LoadedRecord> load_records(const DatasetManifest& manifest,
                                       const Vocabulary& vocab,
                                       const referral::TagLexicon& lexicon,
                                       const LoadOptions& options = {});

/// Builds a LoadedRecord from in-memory synthetic data (no file IO).
LoadedRecord load_record(const SyntheticRecord& synthetic, const Vocabulary& vocab,
                         const referral::TagLexicon& lexicon,
                         const LoadOptions& options = {});

struct EpochLog {
  std::int64_t stage = 0;
  std::int64_t pass = 0;
  std::int64_t steps_done = 0;
  double spatial_loss = 0.0;
  double temporal_loss = 0.0;
};

struct StageEval {
  std::int64_t stage = 0;
  MetricsReport report;
  double selection_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<StageEval> stage_evals;
  std::int64_t total_steps = 0;
  std::vector<CurriculumStage> stages;
};

/// Callbacks scoring a record at inference: per-tubelet selection scores and
/// per-clip salience. Models and oracles both fit behind this surface.
struct InferenceBackend {
  std::function<std::vector<double>(const LoadedRecord&)> tubelet_scores;
  std::function<Tensor(const LoadedRecord&)> clip_salience;
};

InferenceBackend model_backend(SpatialModel& spatial, TemporalModel& temporal,
                               bool use_crg);
/// Scores from the ground truth itself: indicator on the best tubelet and on
/// the activity clips. Selection quality then matches the upper bound.
InferenceBackend oracle_backend();

struct PerVideoEval {
  std::string video_id;
  GroundingPrediction prediction;
  double viou = 0.0;
  double tiou = 0.0;
  bool selected_target = false;
};

struct EvalResult {
  MetricsReport report;
  double selection_accuracy = 0.0;
  std::vector<PerVideoEval> rows;
};

/// Selection + boundary prediction + metrics over a split. Records must
/// carry ground truth. Videos without tubelets count as zero.
EvalResult evaluate(const std::vector<LoadedRecord>& records,
                    const InferenceBackend& backend, double tau = 0.5);

class Trainer {
 public:
  Trainer(TrainPlan plan, SpatialModel& spatial, TemporalModel& temporal);

  /// Runs the staged curriculum (or a single stage when sps is disabled).
  /// eval_records, when given, are scored after every stage.
  TrainResult train(const std::vector<LoadedRecord>& train_records,
                    const std::vector<LoadedRecord>* eval_records = nullptr);

  const TrainPlan& plan() const { return plan_; }

 private:
  TrainPlan plan_;
  SpatialModel& spatial_;
  TemporalModel& temporal_;
};

/// Mean-confidence baseline: picks the tubelet with the highest time-averaged
/// confidence; temporal bounds are that tubelet's full span.
EvalResult confidence_baseline(const std::vector<LoadedRecord>& records);

}  // namespace tubeground
