#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dem/data.hpp"
#include "dem/model.hpp"
#include "dem/ridge.hpp"
#include "dem/cli.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace dem;

namespace {

const std::string kFixture = std::string(DEM_FIXTURE_DIR) + "/minidata";

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("dem_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void copy_fixture(const fs::path& dest) {
  fs::create_directories(dest);
  for (const auto& entry : fs::directory_iterator(kFixture)) {
    fs::copy_file(entry.path(), dest / entry.path().filename(),
                  fs::copy_options::overwrite_existing);
  }
}

}  // namespace

TEST_CASE("the shipped 2-class fixture loads with declared dimensions") {
  Dataset ds = load_dataset(kFixture);
  CHECK(ds.visual_dim() == 3);
  CHECK(ds.num_samples() == 4);
  CHECK(ds.table("attribute").rows() == 2);
  CHECK(ds.seen == std::set<int>{1});
  CHECK(ds.unseen == std::set<int>{2});
  CHECK(ds.has_descriptions());
  CHECK(ds.descriptions[0].size() == 1);
  CHECK(ds.features(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("split overlap is rejected with a diagnostic") {
  const fs::path dir = temp_dir("overlap");
  copy_fixture(dir);
  std::ofstream(dir / "split_unseen.txt") << "1\n2\n";
  CHECK_THROWS_WITH_AS(load_dataset(dir.string()),
                       doctest::Contains("split overlap"), IoError);
}

TEST_CASE("feature/label count mismatch is rejected") {
  const fs::path dir = temp_dir("mismatch");
  copy_fixture(dir);
  std::ofstream(dir / "labels.csv") << "sample_index,class_id\n0,1\n1,1\n2,2\n";
  CHECK_THROWS_WITH_AS(load_dataset(dir.string()),
                       doctest::Contains("sample count mismatch"), IoError);
}

TEST_CASE("missing class vector is rejected") {
  const fs::path dir = temp_dir("missingclass");
  copy_fixture(dir);
  std::ofstream(dir / "semantic_attribute.csv") << "class_id,v0,v1\n1,0.9,0.1\n";
  CHECK_THROWS_AS(load_dataset(dir.string()), IoError);
}

TEST_CASE("binary feature round trip is bit exact") {
  SynthSpec spec;
  spec.visual_dim = 7;
  spec.semantic_dim = 3;
  spec.num_seen = 3;
  spec.num_unseen = 2;
  spec.samples_per_class = 4;
  spec.linear_rank = 2;
  spec.seed = 5;
  Dataset ds = synth_generate(spec).dataset;
  // float32 on disk: quantize once so the round trip compares exactly
  for (Index i = 0; i < ds.features.rows(); ++i) {
    for (Index j = 0; j < ds.features.cols(); ++j) {
      ds.features(i, j) = static_cast<float>(ds.features(i, j));
    }
  }
  const fs::path dir = temp_dir("roundtrip");
  save_dataset(ds, dir.string(), true);
  Dataset back = load_dataset(dir.string());
  CHECK((back.features - ds.features).norm() == 0.0);
  CHECK(back.labels == ds.labels);
  CHECK(back.seen == ds.seen);
  CHECK(back.unseen == ds.unseen);

  // ...and the csv feature variant is accepted as an alternative
  const fs::path dir2 = temp_dir("roundtrip_csv");
  save_dataset(ds, dir2.string(), false);
  Dataset back2 = load_dataset(dir2.string());
  CHECK((back2.features - ds.features).norm() == 0.0);
}

TEST_CASE("make_validation_split is class-level and deterministic") {
  SynthSpec spec;
  spec.visual_dim = 4;
  spec.semantic_dim = 3;
  spec.num_seen = 10;
  spec.num_unseen = 2;
  spec.samples_per_class = 3;
  spec.linear_rank = 2;
  Dataset ds = synth_generate(spec).dataset;

  ValidationSplit split = make_validation_split(ds, 0.2, 7);
  CHECK(split.train_part.seen.size() == 8);
  CHECK(split.train_part.unseen.size() == 2);
  CHECK(split.val_part.unseen.size() == 2);
  // every val sample belongs to a val class
  for (int label : split.val_part.labels) {
    CHECK(split.val_part.unseen.count(label) == 1);
  }
  // disjointness
  for (int cls : split.train_part.seen) {
    CHECK(split.train_part.unseen.count(cls) == 0);
  }

  ValidationSplit again = make_validation_split(ds, 0.2, 7);
  CHECK(again.train_part.seen == split.train_part.seen);

  // 4 classes at fraction 0.5 -> 2/2
  SynthSpec small = spec;
  small.num_seen = 4;
  Dataset ds4 = synth_generate(small).dataset;
  ValidationSplit half = make_validation_split(ds4, 0.5, 3);
  CHECK(half.train_part.seen.size() == 2);
  CHECK(half.train_part.unseen.size() == 2);
}

TEST_CASE("synth: zero noise collapses samples onto class means") {
  SynthSpec spec;
  spec.visual_dim = 6;
  spec.semantic_dim = 3;
  spec.num_seen = 2;
  spec.num_unseen = 1;
  spec.samples_per_class = 5;
  spec.linear_rank = 2;
  spec.noise_sigma = 0.0;
  Dataset ds = synth_generate(spec).dataset;
  for (Index i = 1; i < 5; ++i) {
    CHECK((ds.features.col(i) - ds.features.col(0)).norm() == 0.0);
  }
}

TEST_CASE("synth: identical seeds give bit-identical datasets") {
  SynthSpec spec;
  spec.seed = 42;
  spec.num_seen = 4;
  spec.num_unseen = 2;
  spec.samples_per_class = 3;
  spec.visual_dim = 8;
  spec.semantic_dim = 4;
  spec.linear_rank = 2;
  Dataset a = synth_generate(spec).dataset;
  Dataset b = synth_generate(spec).dataset;
  CHECK((a.features - b.features).norm() == 0.0);
  CHECK((a.table("attribute") - b.table("attribute")).norm() == 0.0);
}

TEST_CASE("synth: class means are distinct") {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.num_seen = 6;
  spec.num_unseen = 3;
  spec.samples_per_class = 1;
  Dataset ds = synth_generate(spec).dataset;
  for (Index a = 0; a < ds.num_samples(); ++a) {
    for (Index b = a + 1; b < ds.num_samples(); ++b) {
      CHECK((ds.features.col(a) - ds.features.col(b)).norm() > 0.0);
    }
  }
}

TEST_CASE("synth default fixture: ridge S->V beats 2x chance") {
  SynthSpec spec;
  spec.seed = 1;
  Dataset ds = synth_generate(spec).dataset;
  RunConfig config;
  config.seed = 1;
  BaselineOutcome out = baseline_pipeline(ds, config);
  CHECK(out.acc_s2v > 0.2);  // 10 unseen classes -> chance 0.1
}
