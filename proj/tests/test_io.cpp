#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "testutil.hpp"
#include "tubeground/checkpoint.hpp"
#include "tubeground/config.hpp"
#include "tubeground/errors.hpp"
#include "tubeground/log.hpp"
#include "tubeground/manifest.hpp"
#include "tubeground/stvf.hpp"
#include "tubeground/synthetic.hpp"

using namespace tubeground;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tubeground_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Tensor random_f32_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  Tensor t = testutil::random_tensor(std::move(shape), rng);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<double>(static_cast<float>(t[i]));
  }
  return t;
}

}  // namespace

TEST_CASE("stvf round trip is bit exact") {
  TempDir tmp;
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t r = 1 + rng() % 6;
    const std::size_t c = 1 + rng() % 9;
    const Tensor t = random_f32_tensor({r, c}, rng);
    const fs::path p = tmp.path / ("t" + std::to_string(rep) + ".stvf");
    stvf::write_tensor(t, p);
    const Tensor back = stvf::read_tensor(p);
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
  }
}

TEST_CASE("stvf zero-row tensor is a valid empty file") {
  TempDir tmp;
  const Tensor empty({0, 5});
  const fs::path p = tmp.path / "empty.stvf";
  stvf::write_tensor(empty, p);
  const Tensor back = stvf::read_tensor(p);
  CHECK(back.shape() == std::vector<std::size_t>{0, 5});
  CHECK(back.size() == 0);
}

TEST_CASE("stvf error codes are distinct") {
  TempDir tmp;

  SUBCASE("bad magic") {
    const fs::path p = tmp.path / "bad_magic.stvf";
    std::ofstream(p, std::ios::binary) << "NOPE1234567890";
    try {
      stvf::read_tensor(p);
      FAIL("expected StvfError");
    } catch (const stvf::StvfError& e) {
      CHECK(e.code() == stvf::ErrorCode::BadMagic);
      CHECK(std::string(e.what()).find("not a feature file") != std::string::npos);
    }
  }

  SUBCASE("version mismatch") {
    const fs::path p = tmp.path / "bad_version.stvf";
    std::ofstream os(p, std::ios::binary);
    os << "STVF";
    const std::uint32_t version = 99;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint32_t rank = 1;
    os.write(reinterpret_cast<const char*>(&rank), 4);
    os.close();
    try {
      stvf::read_tensor(p);
      FAIL("expected StvfError");
    } catch (const stvf::StvfError& e) {
      CHECK(e.code() == stvf::ErrorCode::VersionMismatch);
    }
  }

  SUBCASE("truncated payload") {
    std::mt19937_64 rng(2);
    const fs::path p = tmp.path / "trunc.stvf";
    stvf::write_tensor(random_f32_tensor({4, 4}, rng), p);
    const auto size = fs::file_size(p);
    fs::resize_file(p, size - 4);  // drop one float
    try {
      stvf::read_tensor(p);
      FAIL("expected StvfError");
    } catch (const stvf::StvfError& e) {
      CHECK(e.code() == stvf::ErrorCode::Truncated);
    }
  }

  SUBCASE("missing file") {
    try {
      stvf::read_tensor(tmp.path / "does_not_exist.stvf");
      FAIL("expected StvfError");
    } catch (const stvf::StvfError& e) {
      CHECK(e.code() == stvf::ErrorCode::Io);
    }
  }
}

TEST_CASE("tubelet and detection tensor codecs round trip") {
  std::mt19937_64 rng(3);
  SyntheticSpec spec;
  spec.n_videos = 2;
  spec.seed = 11;
  const SyntheticDataset ds = generate_synthetic(spec);
  const auto& rec = ds.records[0];

  const Tensor enc = encode_tubelets(rec.video.tubelets, spec.tubelet_dim);
  const auto back = decode_tubelets(enc, spec.tubelet_dim);
  REQUIRE(back.size() == rec.video.tubelets.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].tubelet_id == rec.video.tubelets[i].tubelet_id);
    CHECK(back[i].start_frame == rec.video.tubelets[i].start_frame);
    CHECK(back[i].end_frame == rec.video.tubelets[i].end_frame);
    CHECK(back[i].boxes == rec.video.tubelets[i].boxes);  // coords are f32-snapped
  }

  const Tensor denc = encode_detections(rec.detections, spec.tubelet_dim);
  const auto dback = decode_detections(denc, spec.tubelet_dim);
  REQUIRE(dback.size() == rec.detections.size());
  for (std::size_t i = 0; i < dback.size(); ++i) {
    CHECK(dback[i].frame_index == rec.detections[i].frame_index);
    CHECK(dback[i].box == rec.detections[i].box);
  }
}

TEST_CASE("grounding records serialize as the fixed ND-JSON schema") {
  GroundTruth gt;
  gt.video_id = "clip42";
  gt.t_start = 8;
  gt.t_end = 11;
  gt.target_boxes[8] = {1, 2, 3, 4};
  gt.target_boxes[9] = {2, 3, 4, 5};
  gt.target_boxes[10] = {3, 4, 5, 6};

  const std::string line = to_json_line(to_record(gt, 7));
  CHECK(line.find("\"video_id\":\"clip42\"") != std::string::npos);
  CHECK(line.find("\"tubelet_id\":7") != std::string::npos);
  CHECK(line.find("\"t_s\":8") != std::string::npos);
  CHECK(line.find("\"t_e\":11") != std::string::npos);

  const GroundingRecord back = grounding_record_from_json(line);
  CHECK(back.video_id == "clip42");
  CHECK(back.tubelet_id == 7);
  CHECK(back.boxes.size() == 3);
  CHECK(back.boxes[0].second == BoundingBox{1, 2, 3, 4});
}

TEST_CASE("manifest round trip and validation") {
  TempDir tmp;
  SyntheticSpec spec;
  spec.n_videos = 3;
  spec.split = "val";
  spec.seed = 5;
  const SyntheticDataset ds = generate_synthetic(spec);
  const DatasetManifest m = materialize(ds, tmp.path);

  const DatasetManifest loaded = read_manifest(tmp.path / "val" / "manifest.jsonl");
  CHECK(loaded.name == spec.name);
  CHECK(loaded.split == "val");
  CHECK(loaded.tubelet_dim == spec.tubelet_dim);
  CHECK(loaded.records.size() == 3);
  CHECK(loaded.records[0].ground_truth.has_value());
  CHECK(loaded.records[0].query.tokens == ds.records[0].query.tokens);
  validate_manifest(loaded);

  SUBCASE("dim mismatch is rejected") {
    DatasetManifest broken = loaded;
    broken.word_dim += 1;
    CHECK_THROWS_AS(validate_manifest(broken), DataError);
  }

  SUBCASE("missing ground truth in val split is rejected") {
    DatasetManifest broken = loaded;
    broken.records[1].ground_truth.reset();
    CHECK_THROWS_AS(validate_manifest(broken), DataError);
  }
}

TEST_CASE("ini config parsing and echo") {
  const std::string text = R"(
# run settings
[plan]
total_epochs = 4
batch_size = 8
seed = 99
use_crg = off

[sps]
enabled = true
bounds = 3, 6, inf

[spatial]
lr = 0.001
proj_dim = 32

[temporal]
tau = 0.4

[linker]
new_track_threshold = 0.3
)";
  const RunConfig cfg = RunConfig::from_ini(IniDoc::parse(text));
  CHECK(cfg.plan.total_epochs == 4);
  CHECK(cfg.plan.batch_size == 8);
  CHECK(cfg.plan.seed == 99);
  CHECK_FALSE(cfg.plan.use_crg);
  CHECK(cfg.plan.sps_enabled);
  REQUIRE(cfg.plan.stage_bounds.size() == 3);
  CHECK(*cfg.plan.stage_bounds[0] == 3);
  CHECK(*cfg.plan.stage_bounds[1] == 6);
  CHECK_FALSE(cfg.plan.stage_bounds[2].has_value());
  CHECK(cfg.plan.spatial_lr == 0.001);
  CHECK(cfg.spatial.proj_dim == 32);
  CHECK(cfg.temporal.tau == 0.4);
  CHECK(cfg.linker.new_track_threshold == 0.3);

  // The echo reproduces every effective value.
  const RunConfig again = RunConfig::from_ini(IniDoc::parse(cfg.echo()));
  CHECK(again.echo() == cfg.echo());
  CHECK(again.plan.batch_size == 8);
  CHECK(again.temporal.tau == 0.4);

  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(RunConfig::from_ini(IniDoc::parse("[plan]\nbatch_sze = 8\n")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_ini(IniDoc::parse("[nope]\nx = 1\n")), ConfigError);
  }
  SUBCASE("bad values are rejected") {
    CHECK_THROWS_AS(RunConfig::from_ini(IniDoc::parse("[plan]\nbatch_size = soon\n")),
                    ConfigError);
  }
}

TEST_CASE("appearance threshold warns and is ignored") {
  std::string captured;
  logging::set_warn_handler([&](const std::string& m) { captured += m; });
  const RunConfig cfg =
      RunConfig::from_ini(IniDoc::parse("[linker]\nappearance_threshold = 0.5\n"));
  logging::reset_warn_handler();
  CHECK(cfg.linker.appearance_threshold == 0.5);
  CHECK(captured.find("appearance_threshold") != std::string::npos);
}

TEST_CASE("checkpoint save/load round trips parameters and optimizer state") {
  TempDir tmp;
  std::mt19937_64 rng(4);
  Parameter a("model.a", testutil::random_tensor({3, 2}, rng));
  Parameter b("model.b", testutil::random_tensor({4}, rng));
  nn::AdamOptimizer opt({&a, &b}, {.learning_rate = 0.01});
  a.gradient.fill(0.3);
  b.gradient.fill(-0.2);
  opt.step();

  save_checkpoint(tmp.path / "ckpt", {&a, &b}, &opt);

  Parameter a2("model.a", Tensor({3, 2}));
  Parameter b2("model.b", Tensor({4}));
  nn::AdamOptimizer opt2({&a2, &b2}, {.learning_rate = 0.01});
  load_checkpoint(tmp.path / "ckpt", {&a2, &b2}, &opt2);

  for (std::size_t i = 0; i < a.value.size(); ++i) {
    CHECK(a2.value[i] == doctest::Approx(a.value[i]).epsilon(1e-7));
  }
  CHECK(opt2.step_count() == 1);

  // Continuing training from the restored state matches the original.
  a.gradient.fill(0.1);
  b.gradient.fill(0.1);
  a2.gradient.fill(0.1);
  b2.gradient.fill(0.1);
  opt.step();
  opt2.step();
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    CHECK(a2.value[i] == doctest::Approx(a.value[i]).epsilon(1e-6));
  }

  SUBCASE("shape mismatch is rejected") {
    Parameter bad("model.a", Tensor({2, 2}));
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "ckpt", {&bad}), DataError);
  }
}
