#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "testutil.hpp"
#include "tubeground/errors.hpp"
#include "tubeground/linker.hpp"

using namespace tubeground;

namespace {

DetectionBox det(std::int64_t frame, double x, double y, double size, double conf) {
  DetectionBox d;
  d.frame_index = frame;
  d.box = BoundingBox{x, y, x + size, y + size};
  d.confidence = conf;
  d.feature = {x, y};
  return d;
}

/// Reference linker that replaces the greedy per-frame matching with an
/// exhaustive assignment maximizing summed IoU, under the same thresholds
/// and track bookkeeping. Feasible for <= 4 detections per frame.
std::vector<Tubelet> exhaustive_link(const std::vector<DetectionBox>& detections,
                                     const LinkerConfig& cfg) {
  struct Track {
    std::int64_t id;
    std::int64_t last_frame;
    BoundingBox last_box;
    std::vector<const DetectionBox*> hits;
  };
  std::map<std::int64_t, std::vector<const DetectionBox*>> by_frame;
  for (const DetectionBox& d : detections) by_frame[d.frame_index].push_back(&d);

  std::vector<Track> tracks;
  std::vector<std::size_t> active;
  for (const auto& [frame, dets] : by_frame) {
    std::vector<std::size_t> alive;
    for (const std::size_t t : active) {
      if (frame - tracks[t].last_frame <= cfg.buffer_frames) alive.push_back(t);
    }
    active = alive;

    std::vector<const DetectionBox*> high;
    std::vector<const DetectionBox*> low;
    for (const DetectionBox* d : dets) {
      if (d->confidence >= cfg.high_track_threshold) high.push_back(d);
      else if (d->confidence >= cfg.low_track_threshold) low.push_back(d);
    }

    const auto assign_stage = [&](const std::vector<const DetectionBox*>& stage_dets,
                                  std::vector<std::size_t>& open) {
      // Enumerate all injective det->track assignments, maximize summed IoU.
      const std::size_t nd = stage_dets.size();
      std::vector<int> best_assign(nd, -1);
      double best_total = -1.0;
      std::vector<int> cur(nd, -1);
      const std::function<void(std::size_t, double)> rec = [&](std::size_t di, double total) {
        if (di == nd) {
          if (total > best_total) {
            best_total = total;
            best_assign = cur;
          }
          return;
        }
        rec(di + 1, total);  // leave unmatched
        for (std::size_t ti = 0; ti < open.size(); ++ti) {
          bool used = false;
          for (std::size_t pj = 0; pj < di; ++pj) used |= cur[pj] == static_cast<int>(ti);
          if (used) continue;
          const double iou = box_iou(stage_dets[di]->box, tracks[open[ti]].last_box);
          if (iou < cfg.matching_iou_threshold) continue;
          cur[di] = static_cast<int>(ti);
          rec(di + 1, total + iou);
          cur[di] = -1;
        }
      };
      rec(0, 0.0);

      std::vector<bool> det_matched(nd, false);
      std::vector<std::size_t> still_open;
      std::vector<bool> track_used(open.size(), false);
      for (std::size_t di = 0; di < nd; ++di) {
        if (best_assign[di] < 0) continue;
        const std::size_t ti = static_cast<std::size_t>(best_assign[di]);
        Track& tr = tracks[open[ti]];
        tr.hits.push_back(stage_dets[di]);
        tr.last_box = stage_dets[di]->box;
        tr.last_frame = stage_dets[di]->frame_index;
        det_matched[di] = true;
        track_used[ti] = true;
      }
      for (std::size_t ti = 0; ti < open.size(); ++ti) {
        if (!track_used[ti]) still_open.push_back(open[ti]);
      }
      open = still_open;
      return det_matched;
    };

    std::vector<std::size_t> open = active;
    const std::vector<bool> high_matched = assign_stage(high, open);
    assign_stage(low, open);

    for (std::size_t di = 0; di < high.size(); ++di) {
      if (high_matched[di] || high[di]->confidence < cfg.new_track_threshold) continue;
      Track tr;
      tr.id = static_cast<std::int64_t>(tracks.size());
      tr.last_frame = high[di]->frame_index;
      tr.last_box = high[di]->box;
      tr.hits.push_back(high[di]);
      tracks.push_back(std::move(tr));
      active.push_back(tracks.size() - 1);
    }
  }

  // Materialize without interpolation; comparisons use detector frames only.
  std::vector<Tubelet> out;
  for (const Track& tr : tracks) {
    if (tr.hits.empty()) continue;
    Tubelet t;
    t.tubelet_id = tr.id;
    t.start_frame = tr.hits.front()->frame_index;
    t.end_frame = tr.hits.back()->frame_index + 1;
    for (const DetectionBox* d : tr.hits) {
      t.boxes[d->frame_index] = d->box;
      t.confidences[d->frame_index] = d->confidence;
      t.features[d->frame_index] = d->feature;
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TEST_CASE("link chains a single moving box into one tubelet") {
  LinkerConfig cfg;
  std::vector<DetectionBox> dets;
  for (int i = 0; i < 3; ++i) {
    dets.push_back(det(i * 5, 10.0 + i * 2.0, 10.0, 20.0, 0.9));  // IoU ~0.8 step to step
  }
  const auto tubs = link(dets, cfg);
  REQUIRE(tubs.size() == 1);
  CHECK(tubs[0].start_frame == 0);
  CHECK(tubs[0].end_frame == 11);
  CHECK(tubs[0].consistent());
}

TEST_CASE("link keeps spatially disjoint boxes apart") {
  LinkerConfig cfg;
  std::vector<DetectionBox> dets;
  for (int i = 0; i < 4; ++i) {
    dets.push_back(det(i * 5, 10.0, 10.0, 15.0, 0.8));
    dets.push_back(det(i * 5, 200.0, 200.0, 15.0, 0.8));
  }
  const auto tubs = link(dets, cfg);
  REQUIRE(tubs.size() == 2);
  for (const Tubelet& t : tubs) {
    CHECK(t.start_frame == 0);
    CHECK(t.end_frame == 16);
    CHECK(t.consistent());
  }
}

TEST_CASE("link interpolates boxes and features between detector frames") {
  LinkerConfig cfg;
  std::vector<DetectionBox> dets;
  dets.push_back(det(0, 0.0, 0.0, 20.0, 0.9));
  dets.push_back(det(5, 10.0, 0.0, 20.0, 0.6));
  const auto tubs = link(dets, cfg);
  REQUIRE(tubs.size() == 1);
  const Tubelet& t = tubs[0];
  CHECK(t.boxes.at(2).x1 == doctest::Approx(4.0));
  CHECK(t.boxes.at(3).x1 == doctest::Approx(6.0));
  CHECK(t.features.at(2)[0] == doctest::Approx(4.0));
  CHECK(t.confidences.at(2) == 0.9);  // carried forward
  CHECK(t.confidences.at(5) == 0.6);
}

TEST_CASE("low-confidence detections extend but never open tracks") {
  LinkerConfig cfg;  // low 0.1, high 0.34, new 0.21
  std::vector<DetectionBox> dets;
  dets.push_back(det(0, 10.0, 10.0, 20.0, 0.9));
  dets.push_back(det(5, 11.0, 10.0, 20.0, 0.2));    // extends track 0
  dets.push_back(det(5, 300.0, 300.0, 20.0, 0.25)); // cannot open a track
  const auto tubs = link(dets, cfg);
  REQUIRE(tubs.size() == 1);
  CHECK(tubs[0].end_frame == 6);
  CHECK(tubs[0].boxes.at(5).x1 == doctest::Approx(11.0));
}

TEST_CASE("detections below the low threshold are discarded") {
  LinkerConfig cfg;
  std::vector<DetectionBox> dets;
  dets.push_back(det(0, 10.0, 10.0, 20.0, 0.05));
  const auto tubs = link(dets, cfg);
  CHECK(tubs.empty());
}

TEST_CASE("tracks close after the buffer and do not rematch") {
  LinkerConfig cfg;
  cfg.buffer_frames = 10;
  std::vector<DetectionBox> dets;
  dets.push_back(det(0, 10.0, 10.0, 20.0, 0.9));
  dets.push_back(det(20, 10.0, 10.0, 20.0, 0.9));  // same place, 20 frames later
  const auto tubs = link(dets, cfg);
  REQUIRE(tubs.size() == 2);
}

TEST_CASE("empty input and inconsistent features") {
  LinkerConfig cfg;
  CHECK(link({}, cfg).empty());
  std::vector<DetectionBox> dets;
  dets.push_back(det(0, 10, 10, 20, 0.9));
  dets.push_back(det(5, 10, 10, 20, 0.9));
  dets.back().feature = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(link(dets, cfg), DataError);
}

TEST_CASE("link is deterministic") {
  LinkerConfig cfg;
  std::mt19937_64 rng(3);
  std::vector<DetectionBox> dets;
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int f = 0; f < 10; ++f) {
    for (int k = 0; k < 3; ++k) {
      dets.push_back(det(f * 5, u(rng), u(rng), 25.0, 0.4 + 0.5 * (k + 1) / 4.0));
    }
  }
  const auto a = link(dets, cfg);
  const auto b = link(dets, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tubelet_id == b[i].tubelet_id);
    CHECK(a[i].start_frame == b[i].start_frame);
    CHECK(a[i].end_frame == b[i].end_frame);
    CHECK(a[i].boxes == b[i].boxes);
  }
}

TEST_CASE("no detection is assigned to two tubelets") {
  LinkerConfig cfg;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 150.0);
  std::uniform_real_distribution<double> c(0.15, 0.95);
  std::vector<DetectionBox> dets;
  for (int f = 0; f < 12; ++f) {
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) dets.push_back(det(f * 5, u(rng), u(rng), 30.0, c(rng)));
  }
  const auto tubs = link(dets, cfg);
  // Every input detection is claimed by at most one tubelet (identified by
  // an exact frame + box match against continuous random coordinates).
  for (const DetectionBox& d : dets) {
    int claims = 0;
    for (const Tubelet& t : tubs) {
      CHECK(t.consistent());
      if (t.covers(d.frame_index) && t.boxes.at(d.frame_index) == d.box &&
          t.confidences.at(d.frame_index) == d.confidence) {
        ++claims;
      }
    }
    CHECK(claims <= 1);
  }
}

TEST_CASE("chain/disjoint inputs equal the connected-components oracle") {
  LinkerConfig cfg;
  // Three clusters, within-cluster IoU high, across-cluster IoU zero.
  std::vector<DetectionBox> dets;
  const double centers[3][2] = {{10, 10}, {200, 10}, {10, 200}};
  for (int f = 0; f < 6; ++f) {
    for (int k = 0; k < 3; ++k) {
      dets.push_back(det(f * 5, centers[k][0] + f, centers[k][1], 30.0, 0.8));
    }
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const DetectionBox& a, const DetectionBox& b) {
                     return a.frame_index < b.frame_index;
                   });
  const auto tubs = link(dets, cfg);
  CHECK(tubs.size() == 3);  // one component per cluster
  for (const Tubelet& t : tubs) {
    CHECK(t.start_frame == 0);
    CHECK(t.end_frame == 26);
  }
}

TEST_CASE("crossing trajectories match the exhaustive assignment oracle") {
  LinkerConfig cfg;
  // Three boxes whose paths cross at different times with distinct offsets,
  // so per-frame optimal assignments stay unambiguous.
  std::vector<DetectionBox> dets;
  for (int f = 0; f <= 60; f += 5) {
    const double t = static_cast<double>(f);
    dets.push_back(det(f, 10.0 + 3.0 * t, 10.0, 28.0, 0.8));          // left to right
    dets.push_back(det(f, 190.0 - 3.0 * t, 18.0, 28.0, 0.8));         // right to left
    dets.push_back(det(f, 100.0, 6.0 + 1.5 * t, 28.0, 0.8));          // top to bottom
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const DetectionBox& a, const DetectionBox& b) {
                     return a.frame_index < b.frame_index;
                   });
  const auto greedy = link(dets, cfg);
  const auto oracle = exhaustive_link(dets, cfg);
  REQUIRE(greedy.size() == oracle.size());
  for (std::size_t i = 0; i < greedy.size(); ++i) {
    CHECK(greedy[i].tubelet_id == oracle[i].tubelet_id);
    CHECK(greedy[i].start_frame == oracle[i].start_frame);
    CHECK(greedy[i].end_frame == oracle[i].end_frame);
    for (const auto& [frame, box] : oracle[i].boxes) {
      REQUIRE(greedy[i].boxes.count(frame) == 1);
      CHECK(greedy[i].boxes.at(frame) == box);
    }
  }
}

TEST_CASE("sample_frames") {
  SUBCASE("stride two over a doubled span") {
    const auto idx = sample_frames({0, 64}, 32);
    REQUIRE(idx.size() == 32);
    for (std::size_t i = 0; i < 32; ++i) CHECK(idx[i] == static_cast<std::int64_t>(2 * i));
  }
  SUBCASE("identity when span equals count") {
    const auto idx = sample_frames({0, 32}, 32);
    for (std::size_t i = 0; i < 32; ++i) CHECK(idx[i] == static_cast<std::int64_t>(i));
  }
  SUBCASE("short spans repeat indices") {
    const auto idx = sample_frames({0, 3}, 4);
    CHECK(idx == std::vector<std::int64_t>{0, 0, 1, 2});
  }
  SUBCASE("matches direct enumeration of the formula") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 100; ++rep) {
      const std::int64_t s = static_cast<std::int64_t>(rng() % 50);
      const std::int64_t len = 1 + static_cast<std::int64_t>(rng() % 100);
      const std::int64_t count = 1 + static_cast<std::int64_t>(rng() % 40);
      const auto idx = sample_frames({s, s + len}, count);
      REQUIRE(static_cast<std::int64_t>(idx.size()) == count);
      for (std::int64_t i = 0; i < count; ++i) {
        const auto expect = static_cast<std::int64_t>(
            std::floor(s + static_cast<double>(i) * static_cast<double>(len) /
                               static_cast<double>(count)));
        CHECK(idx[static_cast<std::size_t>(i)] == std::min(expect, s + len - 1));
        CHECK(idx[static_cast<std::size_t>(i)] >= s);
        CHECK(idx[static_cast<std::size_t>(i)] < s + len);
      }
    }
  }
}

TEST_CASE("tubelet_feature_tensor") {
  VideoRecord video;
  video.video_id = "v";
  video.length = 64;

  const auto full_tubelet = [&](std::int64_t id, std::int64_t s, std::int64_t e) {
    Tubelet t;
    t.tubelet_id = id;
    t.start_frame = s;
    t.end_frame = e;
    for (std::int64_t f = s; f < e; ++f) {
      t.boxes[f] = BoundingBox{0, 0, 1, 1};
      t.confidences[f] = 0.5;
      t.features[f] = {static_cast<double>(f), 1.0};
    }
    return t;
  };

  SUBCASE("full-coverage tubelet has an all-valid mask") {
    video.tubelets = {full_tubelet(0, 0, 64)};
    const auto out = tubelet_feature_tensor(video, 32);
    CHECK(out.features.shape() == std::vector<std::size_t>{32, 1, 2});
    for (std::size_t t = 0; t < 32; ++t) {
      CHECK(out.valid.at(t, 0) == 1.0);
      CHECK(out.features.at(t, 0, 0) == static_cast<double>(out.sampled_frames[t]));
    }
  }

  SUBCASE("mask matches interval membership for partial coverage") {
    video.tubelets = {full_tubelet(0, 0, 64), full_tubelet(1, 16, 48)};
    const auto out = tubelet_feature_tensor(video, 32);
    for (std::size_t t = 0; t < 32; ++t) {
      const std::int64_t frame = out.sampled_frames[t];
      const bool covered = frame >= 16 && frame < 48;
      CHECK((out.valid.at(t, 1) != 0.0) == covered);
      if (!covered) {
        CHECK(out.features.at(t, 1, 0) == 0.0);
        CHECK(out.features.at(t, 1, 1) == 0.0);
      }
    }
  }

  SUBCASE("no tubelets is a contract violation") {
    video.tubelets.clear();
    CHECK_THROWS_AS(tubelet_feature_tensor(video, 32), ContractViolation);
  }
}
