#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dem/model.hpp"
#include "dem/ridge.hpp"
#include "dem/rng.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace dem;

namespace {

Dataset tiny_synth(std::uint64_t seed, int seen = 5, int unseen = 3, int per = 8,
                   Real noise = 0.1) {
  SynthSpec spec;
  spec.visual_dim = 10;
  spec.semantic_dim = 4;
  spec.num_seen = seen;
  spec.num_unseen = unseen;
  spec.samples_per_class = per;
  spec.noise_sigma = noise;
  spec.linear_rank = 3;
  spec.seed = seed;
  return synth_generate(spec).dataset;
}

ModelSpec tiny_spec(const Dataset& ds, std::uint64_t seed) {
  ModelSpec spec;
  spec.variant = Variant::kSingle;
  spec.modalities = {{"attribute", static_cast<int>(ds.table("attribute").rows())}};
  spec.hidden = 12;
  spec.visual_dim = static_cast<int>(ds.visual_dim());
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("embed: zero weights give zero embeddings") {
  Dataset ds = tiny_synth(1);
  DemModel model = build_model(tiny_spec(ds, 2));
  model.net.branches[0].weight.setZero();
  model.net.output->weight.setZero();
  Matrix out = embed(model, ds.table("attribute"));
  CHECK(out.isZero());
  CHECK(out.rows() == ds.visual_dim());
}

TEST_CASE("embed: fused variant with one zero branch reduces to the single path") {
  Rng rng(5);
  ModelSpec spec;
  spec.variant = Variant::kFused;
  spec.modalities = {{"attribute", 4}, {"wordvec", 6}};
  spec.hidden = 8;
  spec.visual_dim = 10;
  spec.seed = 7;
  DemModel fused = build_model(spec);
  fused.net.branches[1].weight.setZero();

  Matrix y1 = rng.normal_matrix(4, 5);
  Matrix y2 = rng.normal_matrix(6, 5);
  Matrix both = embed(fused, std::vector<Matrix>{y1, y2});

  // single-path reduction: f1(W2 f2(W1^(1) y1))
  Matrix pre = fused.net.branches[0].weight * y1;
  Matrix unit = scaled_tanh(pre);
  Matrix expected = relu(fused.net.output->weight * unit);
  CHECK((both - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("embed: 1-D toy network computes f1(3 * f1(2 * 1)) = 6") {
  ModelSpec spec;
  spec.variant = Variant::kSingle;
  spec.modalities = {{"attribute", 1}};
  spec.hidden = 1;
  spec.visual_dim = 1;
  DemModel model = build_model(spec);
  model.net.branches[0].weight(0, 0) = 2.0;
  model.net.output->weight(0, 0) = 3.0;
  Matrix y(1, 1);
  y << 1.0;
  CHECK(embed(model, y)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("embed is permutation-equivariant over columns") {
  Dataset ds = tiny_synth(3);
  DemModel model = build_model(tiny_spec(ds, 4));
  Rng rng(9);
  Matrix y = rng.normal_matrix(4, 6);
  Matrix base = embed(model, y);
  auto perm = rng.permutation(6);
  Matrix yp(4, 6);
  for (int i = 0; i < 6; ++i) yp.col(i) = y.col(perm[i]);
  Matrix out = embed(model, yp);
  for (int i = 0; i < 6; ++i) {
    CHECK((out.col(i) - base.col(perm[i])).norm() == 0.0);
  }
}

TEST_CASE("train: zero epochs leaves the model unchanged with empty history") {
  Dataset ds = tiny_synth(11);
  DemModel model = build_model(tiny_spec(ds, 12));
  Matrix w1 = model.net.branches[0].weight;
  TrainConfig config;
  config.epochs = 0;
  auto history = train(model, ds, config);
  CHECK(history.empty());
  CHECK((model.net.branches[0].weight - w1).norm() == 0.0);
}

TEST_CASE("train: loss decreases on a separable synthetic task") {
  Dataset ds = tiny_synth(13, 5, 3, 10, 0.05);
  DemModel model = build_model(tiny_spec(ds, 14));
  TrainConfig config;
  config.epochs = 200;
  config.learning_rate = 1e-3;
  config.lambda = 1e-4;
  config.seed = 15;
  auto history = train(model, ds, config);
  REQUIRE(history.size() == 200);
  CHECK(history.back() < history.front());
}

TEST_CASE("train: smoothed loss decreases monotonically over the first 50 epochs") {
  Dataset ds = tiny_synth(17, 6, 2, 12, 0.05);
  DemModel model = build_model(tiny_spec(ds, 18));
  TrainConfig config;
  config.epochs = 55;
  config.learning_rate = 2e-3;
  config.lambda = 1e-4;
  config.seed = 19;
  auto history = train(model, ds, config);
  // window-5 moving average
  std::vector<Real> smooth;
  for (std::size_t i = 4; i < 50; ++i) {
    Real acc = 0.0;
    for (std::size_t j = i - 4; j <= i; ++j) acc += history[j];
    smooth.push_back(acc / 5.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    CHECK(smooth[i] <= smooth[i - 1] + 1e-12);
  }
}

TEST_CASE("train: identical seeds give bit-identical trajectories") {
  Dataset ds = tiny_synth(21);
  TrainConfig config;
  config.epochs = 20;
  config.learning_rate = 1e-3;
  config.seed = 22;
  DemModel a = build_model(tiny_spec(ds, 23));
  DemModel b = build_model(tiny_spec(ds, 23));
  auto ha = train(a, ds, config);
  auto hb = train(b, ds, config);
  CHECK(ha == hb);
  CHECK((a.net.branches[0].weight - b.net.branches[0].weight).norm() == 0.0);
  CHECK((a.net.output->weight - b.net.output->weight).norm() == 0.0);
}

TEST_CASE("train: bias-free linear model converges to the ridge closed form") {
  // identity activations, no hidden layer: the objective is exactly ridge
  // regression with lambda_ridge = N * lambda_train
  SynthSpec sspec;
  sspec.visual_dim = 8;
  sspec.semantic_dim = 4;
  sspec.num_seen = 6;
  sspec.num_unseen = 2;
  sspec.samples_per_class = 10;
  sspec.linear_rank = 3;
  sspec.seed = 31;
  Dataset ds = synth_generate(sspec).dataset;

  ModelSpec mspec;
  mspec.variant = Variant::kSingle;
  mspec.modalities = {{"attribute", 4}};
  mspec.one_layer = true;
  mspec.output_relu = false;  // identity output
  mspec.hidden = 8;           // ignored by the one-layer variant
  mspec.visual_dim = 8;
  mspec.seed = 32;
  DemModel model = build_model(mspec);

  const auto train_idx = seen_sample_indices(ds);
  const Real n = static_cast<Real>(train_idx.size());
  const Real lambda_train = 1e-3;

  TrainConfig config;
  config.epochs = 3000;
  config.batch_size = 1 << 20;  // full batch
  config.learning_rate = 5e-3;
  config.lambda = lambda_train;
  config.seed = 33;
  train(model, ds, config);

  const Matrix a = semantic_for_samples(ds, "attribute", train_idx);
  const Matrix b = features_of(ds, train_idx);
  const RidgeModel oracle = fit_ridge(a, b, n * lambda_train);
  const Real rel = (model.net.branches[0].weight - oracle.weight).norm() / oracle.weight.norm();
  CHECK(rel < 1e-4);
}

TEST_CASE("classify: exact prototype match and tie-breaking") {
  Dataset ds = tiny_synth(41);
  DemModel model = build_model(tiny_spec(ds, 42));
  const auto classes = std::vector<int>(ds.unseen.begin(), ds.unseen.end());
  PrototypeSet protos = make_prototypes(model, ds, classes);

  // feature equal to an embedded prototype classifies as that class
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const int got = classify(model, protos.embedded.col(static_cast<Index>(c)), protos,
                             Distance::kSqEuclidean);
    CHECK(got == classes[c]);
  }

  // two equidistant prototypes: the lower id wins
  PrototypeSet ties;
  ties.class_ids = {7, 3};
  ties.embedded = Matrix(2, 2);
  ties.embedded << 1, -1, 0, 0;
  Vector origin = Vector::Zero(2);
  CHECK(classify_columns(origin, ties.embedded, ties.class_ids, Distance::kSqEuclidean) == 3);
}

TEST_CASE("classify matches a brute-force distance table") {
  Rng rng(47);
  Matrix protos = rng.normal_matrix(6, 5);
  std::vector<int> ids = {2, 4, 6, 8, 10};
  for (int trial = 0; trial < 25; ++trial) {
    Vector q = rng.normal_matrix(6, 1).col(0);
    Real best = 1e300;
    int best_id = -1;
    for (int c = 0; c < 5; ++c) {
      const Real d = (q - protos.col(c)).squaredNorm();
      if (d < best) {
        best = d;
        best_id = ids[static_cast<std::size_t>(c)];
      }
    }
    CHECK(classify_columns(q, protos, ids, Distance::kSqEuclidean) == best_id);
  }
}

TEST_CASE("classify: argmin is invariant under monotone transforms of distance") {
  Rng rng(53);
  Matrix protos = rng.normal_matrix(4, 6);
  std::vector<int> ids = {0, 1, 2, 3, 4, 5};
  for (int trial = 0; trial < 25; ++trial) {
    Vector q = rng.normal_matrix(4, 1).col(0);
    // d (euclidean) and d^2 (squared euclidean) share their argmin
    int best_sq = -1, best_lin = -1;
    Real bsq = 1e300, blin = 1e300;
    for (int c = 0; c < 6; ++c) {
      const Real d2 = (q - protos.col(c)).squaredNorm();
      const Real d1 = std::sqrt(d2);
      if (d2 < bsq) { bsq = d2; best_sq = c; }
      if (d1 < blin) { blin = d1; best_lin = c; }
    }
    CHECK(best_sq == best_lin);
    CHECK(classify_columns(q, protos, ids, Distance::kSqEuclidean) == best_sq);
  }
}

TEST_CASE("hit_at_k: boundary values and monotonicity") {
  Rng rng(59);
  Matrix protos = rng.normal_matrix(5, 4);
  std::vector<int> ids = {1, 2, 3, 4};
  Matrix points = rng.normal_matrix(5, 12);
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) labels.push_back(ids[rng.below(4)]);

  CHECK(hit_at_k(points, labels, protos, ids, 4, Distance::kSqEuclidean) == doctest::Approx(1.0));
  Real prev = 0.0;
  for (int k = 1; k <= 4; ++k) {
    const Real h = hit_at_k(points, labels, protos, ids, k, Distance::kSqEuclidean);
    CHECK(h >= prev);
    prev = h;
  }
  CHECK_THROWS_AS(hit_at_k(points, labels, protos, ids, 5, Distance::kSqEuclidean),
                  DimensionError);
  CHECK_THROWS_AS(hit_at_k(points, labels, protos, ids, 0, Distance::kSqEuclidean),
                  DimensionError);
}

TEST_CASE("hit_at_k: correct on 3 of 4 gives 0.75") {
  Matrix protos(1, 2);
  protos << 0.0, 10.0;
  std::vector<int> ids = {0, 1};
  Matrix points(1, 4);
  points << 0.1, -0.1, 9.9, 4.0;  // last one is closest to prototype 0
  std::vector<int> labels = {0, 0, 1, 1};
  CHECK(hit_at_k(points, labels, protos, ids, 1, Distance::kSqEuclidean) == doctest::Approx(0.75));
}

TEST_CASE("train_reverse_direction: zero epochs and output dimension") {
  Dataset ds = tiny_synth(61);
  TrainConfig config;
  config.epochs = 0;
  DemModel model = train_reverse_direction(ds, config, "attribute", 12, false, true);
  CHECK(model.visual_dim() == ds.table("attribute").rows());   // outputs semantic dim
  CHECK(model.net.branches[0].in_dim() == ds.visual_dim());
  std::vector<Real> history;
  DemModel m2 = train_reverse_direction(ds, config, "attribute", 12, false, true, &history);
  CHECK(history.empty());
  CHECK((m2.net.branches[0].weight - model.net.branches[0].weight).norm() == 0.0);
}

TEST_CASE("checkpoint save/load round trip is bit exact") {
  Dataset ds = tiny_synth(67);
  DemModel model = build_model(tiny_spec(ds, 68));
  TrainConfig config;
  config.epochs = 5;
  config.learning_rate = 1e-3;
  train(model, ds, config);

  const fs::path path = fs::temp_directory_path() / "dem_test_ckpt.demm";
  save_checkpoint(model, path.string());
  DemModel back = load_checkpoint(path.string());
  CHECK(back.variant == model.variant);
  CHECK(back.modalities == model.modalities);
  CHECK((back.net.branches[0].weight - model.net.branches[0].weight).norm() == 0.0);
  CHECK((back.net.output->weight - model.net.output->weight).norm() == 0.0);
  CHECK(back.net.output->activation == model.net.output->activation);

  // save again from the loaded model: byte-identical files
  const fs::path path2 = fs::temp_directory_path() / "dem_test_ckpt2.demm";
  save_checkpoint(back, path2.string());
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("corrupted checkpoint checksum is rejected with a diagnostic") {
  Dataset ds = tiny_synth(71);
  DemModel model = build_model(tiny_spec(ds, 72));
  const fs::path path = fs::temp_directory_path() / "dem_test_corrupt.demm";
  save_checkpoint(model, path.string());

  std::fstream file(path, std::ios::in | std::ios::out | std::ios::binary);
  file.seekp(40);
  char byte = 0;
  file.read(&byte, 1);
  file.seekp(40);
  byte = static_cast<char>(byte ^ 0x5a);
  file.write(&byte, 1);
  file.close();
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                       doctest::Contains("checksum mismatch"), IoError);
}
