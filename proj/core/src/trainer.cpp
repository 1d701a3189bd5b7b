#include "tubeground/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "tubeground/adam.hpp"
#include "tubeground/errors.hpp"
#include "tubeground/log.hpp"
#include "tubeground/stvf.hpp"

namespace tubeground {

std::int64_t difficulty(const VideoRecord& video) {
  return static_cast<std::int64_t>(video.tubelets.size());
}

std::vector<CurriculumStage> build_stages(
    const std::vector<std::pair<std::string, std::int64_t>>& difficulties,
    const std::vector<std::optional<std::int64_t>>& bounds) {
  if (bounds.empty()) throw ConfigError("build_stages: at least one stage required");
  if (bounds.back().has_value()) {
    throw ConfigError("build_stages: the final stage must be unbounded");
  }
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    if (!bounds[i].has_value()) {
      throw ConfigError("build_stages: only the final stage may be unbounded");
    }
    if (i > 0 && *bounds[i] < *bounds[i - 1]) {
      throw ConfigError("build_stages: bounds must be non-decreasing");
    }
  }
  std::vector<CurriculumStage> stages;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    CurriculumStage stage;
    stage.stage_index = static_cast<std::int64_t>(i) + 1;
    stage.tubelet_bound = bounds[i];
    for (const auto& [id, k] : difficulties) {
      if (!bounds[i] || k <= *bounds[i]) stage.video_ids.push_back(id);
    }
    if (stage.video_ids.empty()) {
      throw ConfigError("curriculum stage " + std::to_string(stage.stage_index) +
                        " is empty; adjust the tubelet bounds");
    }
    stages.push_back(std::move(stage));
  }
  return stages;
}

namespace {

void keep_top_tubelets(VideoRecord& video, std::int64_t max_tubelets) {
  if (max_tubelets <= 0 ||
      static_cast<std::int64_t>(video.tubelets.size()) <= max_tubelets) {
    return;
  }
  std::vector<std::size_t> order(video.tubelets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return video.tubelets[a].mean_confidence() > video.tubelets[b].mean_confidence();
  });
  order.resize(static_cast<std::size_t>(max_tubelets));
  std::sort(order.begin(), order.end());  // keep original relative order
  std::vector<Tubelet> kept;
  kept.reserve(order.size());
  for (const std::size_t i : order) kept.push_back(std::move(video.tubelets[i]));
  video.tubelets = std::move(kept);
}

LoadedRecord featurize(VideoRecord video, QueryEmbedding query,
                       std::optional<GroundTruth> gt, std::int64_t target_id,
                       const Vocabulary& vocab, const referral::TagLexicon& lexicon,
                       const LoadOptions& options) {
  LoadedRecord rec;
  rec.video_id = video.video_id;
  keep_top_tubelets(video, options.max_tubelets);
  rec.clips = video.clip_features.empty() ? Tensor({0, 0})
                                          : Tensor::from_rows(video.clip_features);
  if (!video.tubelets.empty()) {
    rec.features = tubelet_feature_tensor(video, options.frame_samples);
  }
  rec.query = std::move(query);
  rec.words = Tensor::from_rows(rec.query.embeddings);
  rec.ground_truth = std::move(gt);
  rec.target_tubelet_id = target_id;
  rec.decomposition = referral::decompose(rec.query, lexicon);
  rec.crg_words = referral_word_matrix(rec.query, rec.decomposition);
  rec.masked = mask_query(rec.query, vocab);

  // Mask the referral token sequence the same way.
  std::vector<std::string> crg_tokens;
  std::vector<PosTag> crg_tags;
  for (const std::size_t i : rec.decomposition.global_positions) {
    crg_tokens.push_back(rec.query.tokens[i]);
    crg_tags.push_back(rec.query.pos_tags[i]);
  }
  for (const auto& lq : rec.decomposition.local_queries) {
    for (const std::size_t i : lq.source_indices) {
      crg_tokens.push_back(rec.query.tokens[i]);
      crg_tags.push_back(rec.query.pos_tags[i]);
    }
  }
  if (crg_tokens.empty()) {
    rec.crg_masked = rec.masked;
  } else {
    rec.crg_masked = mask_query(crg_tokens, crg_tags, vocab);
  }
  rec.video = std::move(video);
  return rec;
}

}  // namespace

LoadedRecord load_record(const SyntheticRecord& synthetic, const Vocabulary& vocab,
                         const referral::TagLexicon& lexicon, const LoadOptions& options) {
  return featurize(synthetic.video, synthetic.query, synthetic.ground_truth,
                   synthetic.target_tubelet_id, vocab, lexicon, options);
}

std::vector<LoadedRecord> load_records(const DatasetManifest& manifest,
                                       const Vocabulary& vocab,
                                       const referral::TagLexicon& lexicon,
                                       const LoadOptions& options) {
  std::vector<LoadedRecord> out;
  out.reserve(manifest.records.size());
  for (const ManifestRecord& r : manifest.records) {
    VideoRecord video;
    video.video_id = r.video_id;
    video.length = r.length;
    video.frame_rate = r.frame_rate;
    video.width = r.width;
    video.height = r.height;
    video.clip_len = r.clip_len;

    if (!r.tubelets_path.empty()) {
      video.tubelets = decode_tubelets(stvf::read_tensor(manifest.resolve(r.tubelets_path)),
                                       manifest.tubelet_dim);
    } else if (!r.detections_path.empty()) {
      const auto dets = decode_detections(
          stvf::read_tensor(manifest.resolve(r.detections_path)), manifest.tubelet_dim);
      video.tubelets = link(dets, options.linker);
    } else {
      throw DataError("record " + r.video_id + " has neither tubelets nor detections");
    }

    const Tensor clips = stvf::read_tensor(manifest.resolve(r.clips_path));
    if (clips.rank() != 2 || clips.dim(1) != manifest.clip_dim) {
      throw DataError("record " + r.video_id + ": clip feature dim mismatch");
    }
    video.clip_features.resize(clips.dim(0));
    for (std::size_t c = 0; c < clips.dim(0); ++c) {
      video.clip_features[c].resize(manifest.clip_dim);
      for (std::size_t d = 0; d < manifest.clip_dim; ++d) {
        video.clip_features[c][d] = clips.at(c, d);
      }
    }

    QueryEmbedding query = r.query;
    const Tensor words = stvf::read_tensor(manifest.resolve(r.words_path));
    if (words.rank() != 2 || words.dim(0) != query.tokens.size() ||
        words.dim(1) != manifest.word_dim) {
      throw DataError("record " + r.video_id + ": word embedding shape mismatch");
    }
    query.embeddings.resize(words.dim(0));
    for (std::size_t i = 0; i < words.dim(0); ++i) {
      query.embeddings[i].resize(manifest.word_dim);
      for (std::size_t d = 0; d < manifest.word_dim; ++d) {
        query.embeddings[i][d] = words.at(i, d);
      }
    }

    out.push_back(featurize(std::move(video), std::move(query), r.ground_truth,
                            r.target_tubelet_id, vocab, lexicon, options));
  }
  return out;
}

InferenceBackend model_backend(SpatialModel& spatial, TemporalModel& temporal,
                               bool use_crg) {
  InferenceBackend backend;
  backend.tubelet_scores = [&spatial, use_crg](const LoadedRecord& rec) {
    const Tensor& words =
        use_crg && rec.crg_words.size() > 0 ? rec.crg_words : rec.words;
    const AttentionMap map = spatial.attention_map(rec.features, words);
    const std::size_t k = map.weights.dim(0);
    const std::size_t n = map.weights.dim(1);
    std::vector<double> scores(k, 0.0);
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t m = 0; m < n; ++m) scores[ki] += map.weights.at(ki, m);
      scores[ki] /= static_cast<double>(n);
    }
    return scores;
  };
  backend.clip_salience = [&temporal, use_crg](const LoadedRecord& rec) {
    const Tensor& words =
        use_crg && rec.crg_words.size() > 0 ? rec.crg_words : rec.words;
    return temporal.clip_salience(rec.clips, words);
  };
  return backend;
}

InferenceBackend oracle_backend() {
  InferenceBackend backend;
  backend.tubelet_scores = [](const LoadedRecord& rec) {
    std::vector<double> scores(rec.video.tubelets.size(), 0.0);
    if (!rec.ground_truth) return scores;
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < rec.video.tubelets.size(); ++i) {
      const Tubelet& tub = rec.video.tubelets[i];
      GroundingPrediction pred;
      pred.video_id = rec.video_id;
      pred.tubelet_id = tub.tubelet_id;
      const FrameInterval clipped =
          interval_intersection(rec.ground_truth->interval(), tub.span());
      if (clipped.empty()) {
        pred.t_start = tub.start_frame;
        pred.t_end = tub.end_frame;
      } else {
        pred.t_start = clipped.start;
        pred.t_end = clipped.end;
      }
      const double v = video_iou(pred, tub, *rec.ground_truth);
      if (v > best) {
        best = v;
        best_i = i;
      }
    }
    scores[best_i] = 1.0;
    return scores;
  };
  backend.clip_salience = [](const LoadedRecord& rec) {
    const std::size_t c = rec.clips.dim(0);
    Tensor sal({c});
    if (!rec.ground_truth || c == 0) return sal;
    const std::int64_t clip_len = rec.video.clip_len;
    double total = 0.0;
    for (std::size_t ci = 0; ci < c; ++ci) {
      const FrameInterval clip_frames{static_cast<std::int64_t>(ci) * clip_len,
                                      std::min((static_cast<std::int64_t>(ci) + 1) * clip_len,
                                               rec.video.length)};
      const FrameInterval overlap =
          interval_intersection(clip_frames, rec.ground_truth->interval());
      sal[ci] = overlap.empty() ? 0.0 : 1.0;
      total += sal[ci];
    }
    if (total > 0.0) {
      for (std::size_t ci = 0; ci < c; ++ci) sal[ci] /= total;
    }
    return sal;
  };
  return backend;
}

EvalResult evaluate(const std::vector<LoadedRecord>& records,
                    const InferenceBackend& backend, double tau) {
  if (records.empty()) throw ContractViolation("evaluate: empty split");
  EvalResult result;
  std::vector<double> vious;
  std::vector<double> tious;
  std::int64_t hits = 0;
  for (const LoadedRecord& rec : records) {
    if (!rec.ground_truth) {
      throw ContractViolation("evaluate: record " + rec.video_id + " lacks ground truth");
    }
    PerVideoEval row;
    row.video_id = rec.video_id;
    if (rec.video.tubelets.empty()) {
      logging::warn("video " + rec.video_id + " has no tubelets; scored as zero");
      row.prediction.video_id = rec.video_id;
      vious.push_back(0.0);
      tious.push_back(0.0);
      result.rows.push_back(std::move(row));
      continue;
    }

    const std::vector<double> scores = backend.tubelet_scores(rec);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[best]) best = i;
    }
    const Tubelet& selected = rec.video.tubelets[best];

    const Tensor salience = backend.clip_salience(rec);
    FrameInterval bounds = predict_bounds(salience, rec.video.length, rec.video.clip_len, tau);
    FrameInterval clipped = interval_intersection(bounds, selected.span());
    if (clipped.empty()) clipped = selected.span();

    row.prediction.video_id = rec.video_id;
    row.prediction.tubelet_id = selected.tubelet_id;
    row.prediction.t_start = clipped.start;
    row.prediction.t_end = clipped.end;
    row.viou = video_iou(row.prediction, selected, *rec.ground_truth);
    row.tiou = temporal_iou(row.prediction.interval(), rec.ground_truth->interval()).tiou;
    if (rec.target_tubelet_id >= 0) {
      row.selected_target = selected.tubelet_id == rec.target_tubelet_id;
    } else {
      // Without an annotated target, credit matching the best-vIoU tubelet.
      const auto oracle = oracle_backend().tubelet_scores(rec);
      const std::size_t oracle_best =
          static_cast<std::size_t>(std::max_element(oracle.begin(), oracle.end()) -
                                   oracle.begin());
      row.selected_target = best == oracle_best;
    }
    hits += row.selected_target ? 1 : 0;
    vious.push_back(row.viou);
    tious.push_back(row.tiou);
    result.rows.push_back(std::move(row));
  }
  result.report = aggregate_scores(vious, tious);
  result.selection_accuracy = static_cast<double>(hits) / static_cast<double>(records.size());
  return result;
}

EvalResult confidence_baseline(const std::vector<LoadedRecord>& records) {
  InferenceBackend backend;
  backend.tubelet_scores = [](const LoadedRecord& rec) {
    std::vector<double> scores;
    scores.reserve(rec.video.tubelets.size());
    for (const Tubelet& t : rec.video.tubelets) scores.push_back(t.mean_confidence());
    return scores;
  };
  // The baseline has no temporal model: bounds are the selected tubelet's
  // whole span. A uniform salience yields exactly that after clipping.
  backend.clip_salience = [](const LoadedRecord& rec) {
    const std::size_t c = std::max<std::size_t>(rec.clips.dim(0), 1);
    Tensor sal({c});
    sal.fill(1.0 / static_cast<double>(c));
    return sal;
  };
  return evaluate(records, backend);
}

Trainer::Trainer(TrainPlan plan, SpatialModel& spatial, TemporalModel& temporal)
    : plan_(std::move(plan)), spatial_(spatial), temporal_(temporal) {}

TrainResult Trainer::train(const std::vector<LoadedRecord>& train_records,
                           const std::vector<LoadedRecord>* eval_records) {
  if (train_records.empty()) throw ContractViolation("train: empty training set");
  if (plan_.batch_size < 2) throw ConfigError("train: batch_size must be >= 2");

  std::vector<std::pair<std::string, std::int64_t>> difficulties;
  std::unordered_map<std::string, const LoadedRecord*> by_id;
  for (const LoadedRecord& r : train_records) {
    difficulties.emplace_back(r.video_id, difficulty(r.video));
    by_id[r.video_id] = &r;
  }

  TrainResult result;
  if (plan_.sps_enabled) {
    result.stages = build_stages(difficulties, plan_.stage_bounds);
  } else {
    result.stages = build_stages(difficulties, {std::nullopt});
  }
  const std::size_t n_stages = result.stages.size();

  const std::int64_t steps_per_epoch = static_cast<std::int64_t>(
      (train_records.size() + plan_.batch_size - 1) / plan_.batch_size);
  const std::int64_t total_steps =
      plan_.total_steps.value_or(plan_.total_epochs * steps_per_epoch);
  if (total_steps < 1) throw ConfigError("train: step budget must be positive");

  nn::AdamOptimizer spatial_opt(spatial_.parameters(), {.learning_rate = plan_.spatial_lr});
  nn::AdamOptimizer temporal_opt(temporal_.parameters(), {.learning_rate = plan_.temporal_lr});
  spatial_.zero_grad();
  temporal_.zero_grad();

  std::mt19937_64 rng(plan_.seed);
  std::int64_t steps_done = 0;
  for (std::size_t si = 0; si < n_stages; ++si) {
    const CurriculumStage& stage = result.stages[si];
    std::int64_t stage_budget = total_steps / static_cast<std::int64_t>(n_stages);
    if (si + 1 == n_stages) {
      stage_budget = total_steps - steps_done;  // remainder goes to the last stage
    }

    std::vector<const LoadedRecord*> pool;
    for (const std::string& id : stage.video_ids) pool.push_back(by_id.at(id));

    std::int64_t stage_steps = 0;
    std::int64_t pass = 0;
    while (stage_steps < stage_budget) {
      ++pass;
      std::shuffle(pool.begin(), pool.end(), rng);
      double pass_spatial = 0.0;
      double pass_temporal = 0.0;
      std::int64_t pass_batches = 0;
      for (std::size_t b = 0; b < pool.size() && stage_steps < stage_budget;
           b += static_cast<std::size_t>(plan_.batch_size)) {
        const std::size_t e =
            std::min(pool.size(), b + static_cast<std::size_t>(plan_.batch_size));
        if (e - b < 2) continue;  // contrastive loss needs at least two items

        std::vector<SpatialModel::BatchItem> spatial_batch;
        std::vector<TemporalModel::BatchItem> temporal_batch;
        for (std::size_t i = b; i < e; ++i) {
          const LoadedRecord* rec = pool[i];
          const bool crg = plan_.use_crg && rec->crg_words.size() > 0;
          spatial_batch.push_back(
              {&rec->features, crg ? rec->crg_words : rec->words});
          const MaskedQuery& mq = crg ? rec->crg_masked : rec->masked;
          if (mq.trainable() && rec->clips.dim(0) > 0) {
            temporal_batch.push_back({rec->clips, crg ? rec->crg_words : rec->words, mq});
          }
        }

        double sl = 0.0;
        double tl = 0.0;
        try {
          sl = spatial_.spatial_loss_backward(spatial_batch);
          spatial_opt.step();
          if (!temporal_batch.empty()) {
            tl = temporal_.reconstruction_loss_backward(temporal_batch);
            temporal_opt.step();
          }
        } catch (const NumericError& e) {
          throw NumericError("stage " + std::to_string(stage.stage_index) + " pass " +
                             std::to_string(pass) + " batch " +
                             std::to_string(pass_batches) + ": " + e.what());
        }
        if (!std::isfinite(sl) || !std::isfinite(tl)) {
          throw NumericError("non-finite loss at stage " + std::to_string(stage.stage_index) +
                             " pass " + std::to_string(pass) + " batch " +
                             std::to_string(pass_batches));
        }
        pass_spatial += sl;
        pass_temporal += tl;
        ++pass_batches;
        ++stage_steps;
        ++steps_done;
      }
      if (pass_batches == 0) {
        throw ConfigError("stage " + std::to_string(stage.stage_index) +
                          " yields no trainable batch");
      }
      EpochLog log;
      log.stage = stage.stage_index;
      log.pass = pass;
      log.steps_done = steps_done;
      log.spatial_loss = pass_spatial / static_cast<double>(pass_batches);
      log.temporal_loss = pass_temporal / static_cast<double>(pass_batches);
      result.epochs.push_back(log);
    }

    if (eval_records && !eval_records->empty()) {
      const EvalResult ev =
          evaluate(*eval_records, model_backend(spatial_, temporal_, plan_.use_crg));
      StageEval se;
      se.stage = stage.stage_index;
      se.report = ev.report;
      se.selection_accuracy = ev.selection_accuracy;
      result.stage_evals.push_back(se);
    }
  }
  result.total_steps = steps_done;
  return result;
}

}  // namespace tubeground
