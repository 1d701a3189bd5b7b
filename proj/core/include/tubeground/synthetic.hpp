#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tubeground/manifest.hpp"
#include "tubeground/tensor.hpp"
#include "tubeground/types.hpp"

namespace tubeground {

/// Tubelet and detection tensors for the binary feature container.
/// Tubelet rows: [tubelet_id, frame, x1, y1, x2, y2, confidence, feature...].
/// Detection rows: [frame, x1, y1, x2, y2, confidence, feature...].
Tensor encode_tubelets(const std::vector<Tubelet>& tubelets, std::size_t feat_dim);
std::vector<Tubelet> decode_tubelets(const Tensor& tensor, std::size_t feat_dim);
Tensor encode_detections(const std::vector<DetectionBox>& detections, std::size_t feat_dim);
std::vector<DetectionBox> decode_detections(const Tensor& tensor, std::size_t feat_dim);

struct SyntheticVocab {
  std::vector<std::string> nouns;
  std::vector<std::string> adjectives;
  std::vector<std::string> verbs;

  static SyntheticVocab defaults();
};

struct SyntheticSpec {
  std::string name = "synthetic";
  std::string split = "train";
  std::int64_t n_videos = 50;
  std::int64_t k_min = 2;
  std::int64_t k_max = 6;
  std::int64_t frames_per_video = 96;
  double noise_sigma = 0.1;
  double referral_signal_strength = 1.0;
  SyntheticVocab vocab = SyntheticVocab::defaults();
  std::uint64_t seed = 1;

  std::size_t tubelet_dim = 64;
  std::size_t clip_dim = 128;
  std::size_t word_dim = 64;
  std::int64_t width = 640;
  std::int64_t height = 360;
  std::int64_t clip_len = 16;
  double interrogative_fraction = 0.0;
  std::int64_t detection_stride = 5;
  /// Blend of per-token identity and whole-sentence content in the emitted
  /// query embeddings, mimicking contextual language-model features. 0 is
  /// purely static word vectors.
  double context_mix = 0.5;

  void validate() const;
};

struct SyntheticRecord {
  VideoRecord video;
  GroundTruth ground_truth;
  QueryEmbedding query;
  std::int64_t target_tubelet_id = 0;
  std::vector<std::string> referral_words;  // adjective + noun of the target
  std::vector<DetectionBox> detections;     // strided samples for the linker
};

struct SyntheticDataset {
  SyntheticSpec spec;
  std::vector<SyntheticRecord> records;
  std::vector<std::string> vocab_tokens;  // <mask>, <unk>, glue, then content words
  /// Shared word embedding table and the fixed projection planting word
  /// identity into tubelet features; exposed for oracle recovery checks.
  std::map<std::string, std::vector<double>> embedding_table;
  Tensor word_to_tubelet;  // word_dim x tubelet_dim

  const std::vector<double>& embedding(const std::string& word) const;
  /// Unit-scale tubelet-space vector planted for the given words' mean
  /// embedding.
  std::vector<double> planted_tubelet_signal(const std::vector<std::string>& words) const;
};

/// Plants a recoverable correlation: the target tubelet's features project
/// the referral words, clip features carry an additive activity signature
/// inside the ground-truth interval, and everything else is noise.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes feature files, vocabulary and manifest under out_dir/<split>/ and
/// returns the manifest.
DatasetManifest materialize(const SyntheticDataset& dataset,
                            const std::filesystem::path& out_dir);

}  // namespace tubeground
