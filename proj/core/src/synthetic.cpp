#include "tubeground/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "tubeground/errors.hpp"
#include "tubeground/stvf.hpp"

namespace tubeground {
namespace {

double snap32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> unit(std::vector<double> v) {
  double norm = 0.0;
  for (const double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

std::vector<double> mean_rows(const std::vector<const std::vector<double>*>& rows) {
  std::vector<double> out(rows.front()->size(), 0.0);
  for (const auto* r : rows) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*r)[i];
  }
  for (double& x : out) x /= static_cast<double>(rows.size());
  return out;
}

}  // namespace

Tensor encode_tubelets(const std::vector<Tubelet>& tubelets, std::size_t feat_dim) {
  std::size_t rows = 0;
  for (const Tubelet& t : tubelets) rows += t.boxes.size();
  Tensor out({rows, 7 + feat_dim});
  std::size_t r = 0;
  for (const Tubelet& t : tubelets) {
    for (const auto& [frame, box] : t.boxes) {
      out.at(r, 0) = static_cast<double>(t.tubelet_id);
      out.at(r, 1) = static_cast<double>(frame);
      out.at(r, 2) = box.x1;
      out.at(r, 3) = box.y1;
      out.at(r, 4) = box.x2;
      out.at(r, 5) = box.y2;
      out.at(r, 6) = t.confidences.at(frame);
      const std::vector<double>& f = t.features.at(frame);
      for (std::size_t d = 0; d < feat_dim; ++d) out.at(r, 7 + d) = f[d];
      ++r;
    }
  }
  return out;
}

std::vector<Tubelet> decode_tubelets(const Tensor& tensor, std::size_t feat_dim) {
  if (tensor.rank() != 2 || tensor.dim(1) != 7 + feat_dim) {
    throw DataError("tubelet tensor has wrong column count");
  }
  std::map<std::int64_t, Tubelet> by_id;
  for (std::size_t r = 0; r < tensor.dim(0); ++r) {
    const auto id = static_cast<std::int64_t>(tensor.at(r, 0));
    const auto frame = static_cast<std::int64_t>(tensor.at(r, 1));
    Tubelet& t = by_id[id];
    t.tubelet_id = id;
    t.boxes[frame] = BoundingBox{tensor.at(r, 2), tensor.at(r, 3), tensor.at(r, 4),
                                 tensor.at(r, 5)};
    t.confidences[frame] = tensor.at(r, 6);
    std::vector<double> f(feat_dim);
    for (std::size_t d = 0; d < feat_dim; ++d) f[d] = tensor.at(r, 7 + d);
    t.features[frame] = std::move(f);
  }
  std::vector<Tubelet> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    t.start_frame = t.boxes.begin()->first;
    t.end_frame = t.boxes.rbegin()->first + 1;
    if (!t.consistent()) {
      throw DataError("tubelet " + std::to_string(id) + " has gaps after decoding");
    }
    out.push_back(std::move(t));
  }
  return out;
}

Tensor encode_detections(const std::vector<DetectionBox>& detections, std::size_t feat_dim) {
  Tensor out({detections.size(), 6 + feat_dim});
  for (std::size_t r = 0; r < detections.size(); ++r) {
    const DetectionBox& d = detections[r];
    out.at(r, 0) = static_cast<double>(d.frame_index);
    out.at(r, 1) = d.box.x1;
    out.at(r, 2) = d.box.y1;
    out.at(r, 3) = d.box.x2;
    out.at(r, 4) = d.box.y2;
    out.at(r, 5) = d.confidence;
    for (std::size_t j = 0; j < feat_dim; ++j) out.at(r, 6 + j) = d.feature[j];
  }
  return out;
}

std::vector<DetectionBox> decode_detections(const Tensor& tensor, std::size_t feat_dim) {
  if (tensor.rank() != 2 || tensor.dim(1) != 6 + feat_dim) {
    throw DataError("detection tensor has wrong column count");
  }
  std::vector<DetectionBox> out(tensor.dim(0));
  for (std::size_t r = 0; r < tensor.dim(0); ++r) {
    DetectionBox& d = out[r];
    d.frame_index = static_cast<std::int64_t>(tensor.at(r, 0));
    d.box = BoundingBox{tensor.at(r, 1), tensor.at(r, 2), tensor.at(r, 3), tensor.at(r, 4)};
    d.confidence = tensor.at(r, 5);
    d.feature.resize(feat_dim);
    for (std::size_t j = 0; j < feat_dim; ++j) d.feature[j] = tensor.at(r, 6 + j);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DetectionBox& a, const DetectionBox& b) {
                     return a.frame_index < b.frame_index;
                   });
  return out;
}

SyntheticVocab SyntheticVocab::defaults() {
  return SyntheticVocab{
      {"man", "woman", "boy", "girl", "person", "kid", "lady", "guy"},
      {"red", "blue", "green", "yellow", "black", "white", "tall", "short"},
      {"walks", "runs", "jumps", "turns", "waves", "sits", "stands", "points"},
  };
}

void SyntheticSpec::validate() const {
  if (n_videos < 1) throw ConfigError("synthetic spec: n_videos must be >= 1");
  if (k_min < 1 || k_max < k_min) throw ConfigError("synthetic spec: need 1 <= k_min <= k_max");
  if (noise_sigma < 0.0) throw ConfigError("synthetic spec: noise_sigma must be >= 0");
  if (referral_signal_strength <= 0.0 || referral_signal_strength > 1.0) {
    throw ConfigError("synthetic spec: referral_signal_strength must be in (0, 1]");
  }
  if (frames_per_video < 4 * clip_len) {
    throw ConfigError("synthetic spec: frames_per_video must cover at least 4 clips");
  }
  if (vocab.nouns.size() < 2 || vocab.adjectives.size() < 2 || vocab.verbs.empty()) {
    throw ConfigError("synthetic spec: need >= 2 nouns, >= 2 adjectives and >= 1 verb "
                      "so distractor identities can avoid the referral");
  }
  if (split != "train" && split != "val" && split != "test") {
    throw ConfigError("synthetic spec: split must be train, val or test");
  }
}

const std::vector<double>& SyntheticDataset::embedding(const std::string& word) const {
  const auto it = embedding_table.find(word);
  if (it == embedding_table.end()) throw DataError("no embedding for word: " + word);
  return it->second;
}

std::vector<double> SyntheticDataset::planted_tubelet_signal(
    const std::vector<std::string>& words) const {
  std::vector<const std::vector<double>*> rows;
  for (const std::string& w : words) rows.push_back(&embedding(w));
  const std::vector<double> m = mean_rows(rows);
  const std::size_t d_out = word_to_tubelet.dim(1);
  std::vector<double> out(d_out, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < d_out; ++j) out[j] += m[i] * word_to_tubelet.at(i, j);
  }
  return out;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset ds;
  ds.spec = spec;
  // Dataset-level tables depend only on the seed so different splits of the
  // same dataset share one planted structure; per-video draws mix in the
  // split name.
  std::mt19937_64 table_rng(spec.seed);
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL +
                      std::hash<std::string>{}(spec.split));
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Dataset-level tables: embeddings for every token plus the fixed
  // projections carrying those embeddings into feature space. Direction
  // words close the query template and are never used as tubelet
  // identities.
  const std::vector<std::string> glue = {"the", "a", "to", "who", "what"};
  const std::vector<std::string> directions = {"left", "right", "front",
                                               "back", "side", "corner"};
  ds.vocab_tokens = {"<mask>", "<unk>"};
  for (const std::string& w : glue) ds.vocab_tokens.push_back(w);
  for (const std::string& w : directions) ds.vocab_tokens.push_back(w);
  for (const std::string& w : spec.vocab.nouns) ds.vocab_tokens.push_back(w);
  for (const std::string& w : spec.vocab.adjectives) ds.vocab_tokens.push_back(w);
  for (const std::string& w : spec.vocab.verbs) ds.vocab_tokens.push_back(w);

  {
    std::normal_distribution<double> table_gauss(0.0, 1.0);
    for (const std::string& w : ds.vocab_tokens) {
      if (w == "<mask>" || w == "<unk>") continue;
      std::vector<double> e(spec.word_dim);
      for (double& x : e) x = table_gauss(table_rng);
      ds.embedding_table[w] = unit(std::move(e));
    }
  }

  ds.word_to_tubelet = Tensor({spec.word_dim, spec.tubelet_dim});
  const double wscale = 1.0 / std::sqrt(static_cast<double>(spec.word_dim));
  {
    std::normal_distribution<double> table_gauss(0.0, 1.0);
    for (std::size_t i = 0; i < ds.word_to_tubelet.size(); ++i) {
      ds.word_to_tubelet[i] = table_gauss(table_rng) * wscale;
    }
  }

  // Activity signature: a fixed 16-dim subspace of clip space driven by the
  // query's informative words.
  constexpr std::size_t kActivityDims = 16;
  Tensor clip_subspace({spec.clip_dim, kActivityDims});
  Tensor word_to_activity({spec.word_dim, kActivityDims});
  {
    std::normal_distribution<double> table_gauss(0.0, 1.0);
    for (std::size_t i = 0; i < clip_subspace.size(); ++i) {
      clip_subspace[i] = table_gauss(table_rng);
    }
    const double ascale = 1.0 / std::sqrt(static_cast<double>(spec.word_dim));
    for (std::size_t i = 0; i < word_to_activity.size(); ++i) {
      word_to_activity[i] = table_gauss(table_rng) * ascale;
    }
  }

  std::uniform_int_distribution<std::int64_t> k_dist(spec.k_min, spec.k_max);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::int64_t n_clips = (spec.frames_per_video + spec.clip_len - 1) / spec.clip_len;

  const auto pick = [&](const std::vector<std::string>& list) -> const std::string& {
    std::uniform_int_distribution<std::size_t> d(0, list.size() - 1);
    return list[d(rng)];
  };

  for (std::int64_t vi = 0; vi < spec.n_videos; ++vi) {
    SyntheticRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05lld", spec.split.c_str(),
                  static_cast<long long>(vi));
    rec.video.video_id = buf;
    rec.video.length = spec.frames_per_video;
    rec.video.width = spec.width;
    rec.video.height = spec.height;
    rec.video.clip_len = spec.clip_len;

    const std::int64_t k = k_dist(rng);
    std::uniform_int_distribution<std::int64_t> target_dist(0, k - 1);
    rec.target_tubelet_id = target_dist(rng);

    // Query identity words.
    const std::string adj = pick(spec.vocab.adjectives);
    const std::string noun = pick(spec.vocab.nouns);
    const std::string verb = pick(spec.vocab.verbs);
    const std::string direction = pick(directions);
    rec.referral_words = {adj, noun};

    const bool interrogative = unif(rng) < spec.interrogative_fraction;
    if (interrogative) {
      rec.query.tokens = {"who", verb, "to", "the", direction};
      rec.query.pos_tags = {PosTag::Noun, PosTag::Verb, PosTag::Other, PosTag::Other,
                            PosTag::Other};
    } else {
      rec.query.tokens = {"the", adj, noun, verb, "to", "the", direction};
      rec.query.pos_tags = {PosTag::Other, PosTag::Adj,   PosTag::Noun, PosTag::Verb,
                            PosTag::Other, PosTag::Other, PosTag::Other};
    }
    rec.query.raw_text = [&] {
      std::string s;
      for (const std::string& t : rec.query.tokens) {
        if (!s.empty()) s += ' ';
        s += t;
      }
      return s;
    }();
    // Contextual token embeddings: every token blends its word vector with
    // the sentence's informative content (adjective + noun + verb).
    std::vector<double> sentence(spec.word_dim, 0.0);
    {
      const auto& ea = ds.embedding_table.at(adj);
      const auto& en = ds.embedding_table.at(noun);
      const auto& ev = ds.embedding_table.at(verb);
      for (std::size_t d = 0; d < spec.word_dim; ++d) {
        sentence[d] = (ea[d] + en[d] + ev[d]) / 3.0;
      }
      sentence = unit(std::move(sentence));
    }
    for (const std::string& t : rec.query.tokens) {
      const auto& word_vec = ds.embedding_table.at(t);
      std::vector<double> e(spec.word_dim);
      for (std::size_t d = 0; d < spec.word_dim; ++d) {
        e[d] = (1.0 - spec.context_mix) * word_vec[d] + spec.context_mix * sentence[d];
      }
      rec.query.embeddings.push_back(unit(std::move(e)));
    }

    // Activity interval aligned to clip boundaries inside the target span.
    std::uniform_int_distribution<std::int64_t> cs_dist(0, n_clips - 3);
    const std::int64_t c_start = cs_dist(rng);
    std::uniform_int_distribution<std::int64_t> ce_dist(c_start + 2, n_clips);
    const std::int64_t c_end = ce_dist(rng);
    rec.ground_truth.video_id = rec.video.video_id;
    rec.ground_truth.t_start = c_start * spec.clip_len;
    rec.ground_truth.t_end = std::min(c_end * spec.clip_len, spec.frames_per_video);

    // Informative-word signature planted into activity clips.
    std::vector<const std::vector<double>*> info_rows = {
        &ds.embedding_table.at(adj), &ds.embedding_table.at(noun),
        &ds.embedding_table.at(verb)};
    const std::vector<double> info_mean = mean_rows(info_rows);
    std::vector<double> act(kActivityDims, 0.0);
    for (std::size_t i = 0; i < info_mean.size(); ++i) {
      for (std::size_t j = 0; j < kActivityDims; ++j) {
        act[j] += info_mean[i] * word_to_activity.at(i, j);
      }
    }
    std::vector<double> signature(spec.clip_dim, 0.0);
    for (std::size_t i = 0; i < spec.clip_dim; ++i) {
      for (std::size_t j = 0; j < kActivityDims; ++j) {
        signature[i] += clip_subspace.at(i, j) * act[j];
      }
    }
    signature = unit(std::move(signature));

    const double clip_noise = spec.noise_sigma / std::sqrt(static_cast<double>(spec.clip_dim));
    rec.video.clip_features.assign(static_cast<std::size_t>(n_clips),
                                   std::vector<double>(spec.clip_dim, 0.0));
    for (std::int64_t c = 0; c < n_clips; ++c) {
      auto& clip = rec.video.clip_features[static_cast<std::size_t>(c)];
      for (double& x : clip) x = gauss(rng) * clip_noise;
      const FrameInterval clip_frames{c * spec.clip_len,
                                      std::min((c + 1) * spec.clip_len, spec.frames_per_video)};
      const FrameInterval overlap =
          interval_intersection(clip_frames, rec.ground_truth.interval());
      if (!overlap.empty()) {
        const double frac = static_cast<double>(overlap.length()) /
                            static_cast<double>(clip_frames.length());
        for (std::size_t i = 0; i < clip.size(); ++i) {
          clip[i] += spec.referral_signal_strength * frac * signature[i];
        }
      }
    }

    // Tubelets with smooth trajectories; the target covers the activity.
    for (std::int64_t ki = 0; ki < k; ++ki) {
      Tubelet tub;
      tub.tubelet_id = ki;
      if (ki == rec.target_tubelet_id) {
        std::uniform_int_distribution<std::int64_t> s_dist(0, rec.ground_truth.t_start);
        tub.start_frame = s_dist(rng);
        std::uniform_int_distribution<std::int64_t> e_dist(rec.ground_truth.t_end,
                                                           spec.frames_per_video);
        tub.end_frame = e_dist(rng);
        if (tub.end_frame <= tub.start_frame) tub.end_frame = tub.start_frame + 1;
      } else {
        const std::int64_t min_len = spec.frames_per_video / 3;
        std::uniform_int_distribution<std::int64_t> s_dist(0, spec.frames_per_video - min_len);
        tub.start_frame = s_dist(rng);
        std::uniform_int_distribution<std::int64_t> e_dist(tub.start_frame + min_len,
                                                           spec.frames_per_video);
        tub.end_frame = e_dist(rng);
      }

      const double w = 40.0 + 80.0 * unif(rng);
      const double h = 40.0 + 80.0 * unif(rng);
      double cx = w / 2 + unif(rng) * (spec.width - w);
      double cy = h / 2 + unif(rng) * (spec.height - h);
      const double vx = (unif(rng) - 0.5) * 4.0;
      const double vy = (unif(rng) - 0.5) * 4.0;
      const double wob = unif(rng) * 6.0;
      const double phase = unif(rng) * 6.283185307179586;

      // Identity planted into the features: the target carries the referral
      // words, distractors carry vocabulary disjoint from the referral.
      std::vector<std::string> identity;
      if (ki == rec.target_tubelet_id) {
        identity = rec.referral_words;
      } else {
        std::string dadj = pick(spec.vocab.adjectives);
        std::string dnoun = pick(spec.vocab.nouns);
        while (dadj == adj) dadj = pick(spec.vocab.adjectives);
        while (dnoun == noun) dnoun = pick(spec.vocab.nouns);
        identity = {dadj, dnoun};
      }
      std::vector<const std::vector<double>*> id_rows;
      for (const std::string& wd : identity) id_rows.push_back(&ds.embedding_table.at(wd));
      const std::vector<double> id_mean = mean_rows(id_rows);
      std::vector<double> planted(spec.tubelet_dim, 0.0);
      for (std::size_t i = 0; i < id_mean.size(); ++i) {
        for (std::size_t j = 0; j < spec.tubelet_dim; ++j) {
          planted[j] += id_mean[i] * ds.word_to_tubelet.at(i, j);
        }
      }

      for (std::int64_t f = tub.start_frame; f < tub.end_frame; ++f) {
        const double t = static_cast<double>(f - tub.start_frame);
        double x = cx + vx * t + wob * std::sin(0.07 * t + phase);
        double y = cy + vy * t + wob * std::cos(0.07 * t + phase);
        x = std::clamp(x, w / 2, static_cast<double>(spec.width) - w / 2);
        y = std::clamp(y, h / 2, static_cast<double>(spec.height) - h / 2);
        BoundingBox box{snap32(x - w / 2), snap32(y - h / 2), snap32(x + w / 2),
                        snap32(y + h / 2)};
        tub.boxes[f] = box;
        tub.confidences[f] = 0.4 + 0.55 * unif(rng);
        std::vector<double> feat(spec.tubelet_dim);
        for (std::size_t j = 0; j < spec.tubelet_dim; ++j) {
          feat[j] = spec.referral_signal_strength * planted[j] + gauss(rng) * spec.noise_sigma;
        }
        tub.features[f] = std::move(feat);
      }
      rec.video.tubelets.push_back(std::move(tub));
    }

    // Ground-truth boxes are the target tubelet's boxes on the activity.
    const Tubelet& target = rec.video.tubelets[static_cast<std::size_t>(rec.target_tubelet_id)];
    for (std::int64_t f = rec.ground_truth.t_start; f < rec.ground_truth.t_end; ++f) {
      rec.ground_truth.target_boxes[f] = target.boxes.at(f);
    }

    // Strided detections per tubelet (last covered frame included).
    for (const Tubelet& tub : rec.video.tubelets) {
      for (std::int64_t f = tub.start_frame; f < tub.end_frame; f += spec.detection_stride) {
        DetectionBox det;
        det.frame_index = f;
        det.box = tub.boxes.at(f);
        det.confidence = tub.confidences.at(f);
        det.feature = tub.features.at(f);
        rec.detections.push_back(std::move(det));
      }
      const std::int64_t last = tub.end_frame - 1;
      if ((last - tub.start_frame) % spec.detection_stride != 0) {
        DetectionBox det;
        det.frame_index = last;
        det.box = tub.boxes.at(last);
        det.confidence = tub.confidences.at(last);
        det.feature = tub.features.at(last);
        rec.detections.push_back(std::move(det));
      }
    }
    std::stable_sort(rec.detections.begin(), rec.detections.end(),
                     [](const DetectionBox& a, const DetectionBox& b) {
                       return a.frame_index < b.frame_index;
                     });

    ds.records.push_back(std::move(rec));
  }
  return ds;
}

DatasetManifest materialize(const SyntheticDataset& ds, const std::filesystem::path& out_dir) {
  const SyntheticSpec& spec = ds.spec;
  const std::filesystem::path split_dir = out_dir / spec.split;
  std::filesystem::create_directories(split_dir);

  DatasetManifest m;
  m.name = spec.name;
  m.split = spec.split;
  m.tubelet_dim = spec.tubelet_dim;
  m.clip_dim = spec.clip_dim;
  m.word_dim = spec.word_dim;
  m.root = split_dir;
  m.vocab_path = "../vocab.txt";

  {
    std::ofstream os(out_dir / "vocab.txt", std::ios::trunc);
    if (!os) throw DataError("cannot write vocabulary: " + (out_dir / "vocab.txt").string());
    for (const std::string& t : ds.vocab_tokens) os << t << "\n";
  }

  for (const SyntheticRecord& rec : ds.records) {
    ManifestRecord r;
    r.video_id = rec.video.video_id;
    r.query_id = rec.video.video_id + "_q0";
    r.length = rec.video.length;
    r.frame_rate = rec.video.frame_rate;
    r.width = rec.video.width;
    r.height = rec.video.height;
    r.clip_len = rec.video.clip_len;
    r.tubelets_path = rec.video.video_id + ".tubelets.stvf";
    r.detections_path = rec.video.video_id + ".detections.stvf";
    r.clips_path = rec.video.video_id + ".clips.stvf";
    r.words_path = rec.video.video_id + ".words.stvf";
    r.query = rec.query;
    r.query.embeddings.clear();  // embeddings travel in the feature file
    r.ground_truth = rec.ground_truth;
    r.target_tubelet_id = rec.target_tubelet_id;

    stvf::write_tensor(encode_tubelets(rec.video.tubelets, spec.tubelet_dim),
                       m.resolve(r.tubelets_path));
    stvf::write_tensor(encode_detections(rec.detections, spec.tubelet_dim),
                       m.resolve(r.detections_path));
    stvf::write_tensor(Tensor::from_rows(rec.video.clip_features), m.resolve(r.clips_path));
    stvf::write_tensor(Tensor::from_rows(rec.query.embeddings), m.resolve(r.words_path));
    m.records.push_back(std::move(r));
  }
  write_manifest(m, split_dir / "manifest.jsonl");
  return m;
}

}  // namespace tubeground
