#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "segan/checkpoint.hpp"
#include "segan/losses.hpp"
#include "segan/metrics.hpp"

using namespace segan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("segan_metrics_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Tensor<float> random_binary(Rng& rng, const Shape& shape, double p_one = 0.3) {
  std::vector<float> v(size_t(numel(shape)));
  for (auto& x : v) x = rng.uniform() < p_one ? 1.0f : 0.0f;
  return Tensor<float>::from(shape, std::move(v));
}

Tensor<float> random_probs(Rng& rng, const Shape& shape) {
  std::vector<float> v(size_t(numel(shape)));
  for (auto& x : v) x = float(rng.uniform());
  return Tensor<float>::from(shape, std::move(v));
}

}  // namespace

TEST_CASE("confusion counts match the brute-force oracle on random volumes") {
  Rng rng(100);
  for (int rep = 0; rep < 50; ++rep) {
    Shape shape = {2 + rng.below(4), 3 + rng.below(5), 3 + rng.below(5)};
    auto pred = random_probs(rng, shape);
    auto label = random_binary(rng, shape);
    auto c = volume_confusion(pred, label);
    std::vector<float> pv(pred.value().begin(), pred.value().end());
    std::vector<float> lv(label.value().begin(), label.value().end());
    auto o = oracle::confusion(pv, lv, 0.5f);
    CHECK(c.tp == o.tp);
    CHECK(c.fp == o.fp);
    CHECK(c.tn == o.tn);
    CHECK(c.fn == o.fn);
    CHECK(c.total() == pv.size());
  }
}

TEST_CASE("threshold ties count as positive") {
  const float below_half = std::nextafter(0.5f, 0.0f);
  const float below_07 = std::nextafter(0.7f, 0.0f);
  auto pred = Tensor<float>::from({4}, {0.5f, below_half, 0.7f, below_07});
  auto label = Tensor<float>::from({4}, {1.0f, 1.0f, 0.0f, 0.0f});
  auto c = volume_confusion(pred, label);  // default threshold 0.5
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 2);
  auto c7 = volume_confusion(pred, label, 0.7f);
  CHECK(c7.fp == 1);  // exactly 0.7 is positive, just below is not
  CHECK(c7.tn == 1);
}

TEST_CASE("confusion rejects bad inputs") {
  auto pred = Tensor<float>::from({2}, {0.1f, 0.9f});
  auto fuzzy = Tensor<float>::from({2}, {0.0f, 0.5f});
  CHECK_THROWS_AS(volume_confusion(pred, fuzzy), DataError);
  auto label3 = Tensor<float>::from({3}, {0.0f, 1.0f, 1.0f});
  CHECK_THROWS_AS(volume_confusion(pred, label3), ShapeError);
}

TEST_CASE("ordering of voxels does not change the counts") {
  Rng rng(101);
  Shape shape = {60};
  auto pred = random_probs(rng, shape);
  auto label = random_binary(rng, shape);
  std::vector<float> pv(pred.value().begin(), pred.value().end());
  std::vector<float> lv(label.value().begin(), label.value().end());
  std::reverse(pv.begin(), pv.end());
  std::reverse(lv.begin(), lv.end());
  auto a = volume_confusion(pred, label);
  auto b = volume_confusion(Tensor<float>::from(shape, std::move(pv)),
                            Tensor<float>::from(shape, std::move(lv)));
  CHECK(a.tp == b.tp);
  CHECK(a.fp == b.fp);
  CHECK(a.tn == b.tn);
  CHECK(a.fn == b.fn);
}

TEST_CASE("score formulas and zero-denominator conventions") {
  auto s = scores({5, 0, 7, 0});
  CHECK(s.dice == 1.0);
  CHECK(s.precision == 1.0);
  CHECK(s.sensitivity == 1.0);

  auto h = scores({1, 1, 0, 1});
  CHECK(h.dice == 0.5);
  CHECK(h.precision == 0.5);
  CHECK(h.sensitivity == 0.5);

  // nothing predicted, nothing true: perfect agreement
  auto e = scores({0, 0, 9, 0});
  CHECK(e.dice == 1.0);
  CHECK(e.precision == 1.0);
  CHECK(e.sensitivity == 1.0);

  // empty truth, nonempty prediction: the one asymmetric case
  auto a = scores({0, 3, 6, 0});
  CHECK(a.dice == 0.0);
  CHECK(a.precision == 0.0);
  CHECK(a.sensitivity == 1.0);

  // nonempty truth, empty prediction
  auto m = scores({0, 0, 6, 3});
  CHECK(m.dice == 0.0);
  CHECK(m.precision == 1.0);
  CHECK(m.sensitivity == 0.0);
}

TEST_CASE("metric dice and loss dice are two views of the same number") {
  // On binary inputs with nonzero truth: scores(...).dice = 1 - dice_loss(g, p),
  // bitwise, when both run in double precision. Both sides reduce to the same
  // quotient of exact integer counts, so the subtraction below reproduces the
  // loss's own final operation.
  Rng rng(102);
  for (int rep = 0; rep < 30; ++rep) {
    Shape shape = {4 + rng.below(5), 4 + rng.below(5)};
    size_t n = size_t(numel(shape));
    std::vector<double> pd(n), gd(n);
    std::vector<float> pf(n), gf(n);
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      pd[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
      gd[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
      any = any || gd[i] != 0.0;
      pf[i] = float(pd[i]);
      gf[i] = float(gd[i]);
    }
    if (!any) {
      gd[0] = 1.0;
      gf[0] = 1.0f;
    }
    auto p32 = Tensor<float>::from(shape, std::move(pf));
    auto g32 = Tensor<float>::from(shape, std::move(gf));
    auto c = volume_confusion(p32, g32);
    double metric_dice = scores(c).dice;

    auto p64 = Tensor<double>::from(shape, std::move(pd));
    auto g64 = Tensor<double>::from(shape, std::move(gd));
    double loss = dice_loss(g64, p64).item();
    CHECK(loss == 1.0 - metric_dice);

    // the float-precision loss agrees to within float rounding
    double loss32 = double(dice_loss(g32, p32).item());
    CHECK(loss32 == doctest::Approx(1.0 - metric_dice).epsilon(1e-6));
  }
}

TEST_CASE("subject evaluation equals the slice-by-slice oracle and ignores chunking") {
  TempDir td("eval");
  auto m = generate_phantom_dataset(2, {32, 32, 8}, 110, td.path);
  stratified_split(m, 1.0, 1);
  auto prep = prepare_dataset(m, {Modality::T1}, std::nullopt);
  REQUIRE(prep.train.size() == 2);

  ArchConfig arch;
  arch.input_size = 16;
  arch.in_channels = 1;
  arch.depth = 3;
  arch.base_filters = 2;
  Rng rng(3, 1);
  auto pair = ModelPair<float>::build(arch, rng);

  auto rep = evaluate_subjects(pair, prep.train, 16, 0.5f, /*chunk=*/2);
  REQUIRE(rep.per_volume.size() == 2);

  double dsum = 0;
  for (size_t i = 0; i < prep.train.size(); ++i) {
    NoGradGuard ng;
    auto ev = eval_slices(prep.train[i], 16);
    auto pred = pair.seg.forward(ev.images, Mode::Infer);  // all slices in one pass
    auto c = volume_confusion(pred, ev.labels);
    CHECK(rep.per_volume[i].subject_id == prep.train[i].subject_id);
    CHECK(rep.per_volume[i].counts.tp == c.tp);
    CHECK(rep.per_volume[i].counts.fp == c.fp);
    CHECK(rep.per_volume[i].counts.tn == c.tn);
    CHECK(rep.per_volume[i].counts.fn == c.fn);
    CHECK(rep.per_volume[i].s.dice == scores(c).dice);
    dsum += scores(c).dice;
  }
  CHECK(rep.aggregate.dice == doctest::Approx(dsum / 2.0).epsilon(1e-12));
  CHECK(rep.threshold == 0.5);
}

TEST_CASE("evaluation leaves gradients and stats untouched") {
  TempDir td("pure");
  auto m = generate_phantom_dataset(1, {32, 32, 8}, 111, td.path);
  stratified_split(m, 1.0, 1);
  auto prep = prepare_dataset(m, {Modality::T1}, std::nullopt);

  ArchConfig arch;
  arch.input_size = 16;
  arch.in_channels = 1;
  arch.depth = 3;
  arch.base_filters = 2;
  Rng rng(4, 1);
  auto pair = ModelPair<float>::build(arch, rng);
  std::vector<std::vector<float>> before;
  for (auto* p : pair.parameters())
    before.emplace_back(p->tensor.value().begin(), p->tensor.value().end());

  auto r1 = evaluate_subjects(pair, prep.train, 16);
  auto r2 = evaluate_subjects(pair, prep.train, 16);

  size_t k = 0;
  for (auto* p : pair.parameters()) {
    const auto v = p->tensor.value();
    CHECK(std::equal(v.begin(), v.end(), before[k].begin(), before[k].end()));
    ++k;
  }
  // bitwise repeatable
  CHECK(r1.per_volume[0].counts.tp == r2.per_volume[0].counts.tp);
  CHECK(r1.aggregate.dice == r2.aggregate.dice);
}

TEST_CASE("report files carry every row") {
  TempDir td("report");
  MetricsReport r;
  r.checkpoint_id = "ckpt-xyz";
  r.dataset_id = "val";
  r.modalities = {Modality::FLAIR};
  r.threshold = 0.5;
  for (int i = 0; i < 3; ++i) {
    SubjectRow row;
    row.subject_id = "s" + std::to_string(i);
    row.counts = {uint64_t(10 + i), 2, 100, 3};
    row.s = scores(row.counts);
    r.per_volume.push_back(row);
    r.aggregate.dice += row.s.dice / 3;
    r.aggregate.precision += row.s.precision / 3;
    r.aggregate.sensitivity += row.s.sensitivity / 3;
  }

  write_metrics_json(r, td.path / "m.json");
  write_metrics_csv(r, td.path / "m.csv");

  std::ifstream jin(td.path / "m.json");
  nlohmann::json j;
  jin >> j;
  CHECK(j.at("checkpoint") == "ckpt-xyz");
  CHECK(j.at("modalities").at(0) == "FLAIR");
  REQUIRE(j.at("volumes").size() == 3);
  CHECK(j.at("volumes").at(1).at("tp") == 11);
  CHECK(j.at("volumes").at(1).at("dice").get<double>() ==
        doctest::Approx(r.per_volume[1].s.dice).epsilon(1e-12));
  CHECK(j.at("aggregate").at("dice").get<double>() ==
        doctest::Approx(r.aggregate.dice).epsilon(1e-12));

  std::ifstream cin(td.path / "m.csv");
  std::vector<std::string> lines;
  for (std::string line; std::getline(cin, line);) lines.push_back(line);
  REQUIRE(lines.size() == 5);  // header + 3 subjects + mean
  CHECK(lines[0] == "subject_id,tp,fp,tn,fn,dice,precision,sensitivity");
  CHECK(lines[1].rfind("s0,10,2,100,3,", 0) == 0);
  CHECK(lines[4].rfind("mean,,,,,", 0) == 0);
}

TEST_CASE("cross-modality grid diagonal reproduces single-model evaluation") {
  TempDir td("grid");
  auto m = generate_phantom_dataset(2, {32, 32, 8}, 120, td.path);
  stratified_split(m, 1.0, 1);
  auto d_t1 = prepare_dataset(m, {Modality::T1}, std::nullopt).train;
  auto d_t2 = prepare_dataset(m, {Modality::T2}, std::nullopt).train;

  ArchConfig arch;
  arch.input_size = 16;
  arch.in_channels = 1;
  arch.depth = 3;
  arch.base_filters = 2;
  Rng r1(7, 1), r2(8, 1);
  auto pair1 = ModelPair<float>::build(arch, r1);
  auto pair2 = ModelPair<float>::build(arch, r2);
  save_checkpoint(td.path / "t1.ckpt", pair1);
  save_checkpoint(td.path / "t2.ckpt", pair2);

  std::map<Modality, fs::path> models = {{Modality::T1, td.path / "t1.ckpt"},
                                         {Modality::T2, td.path / "t2.ckpt"}};
  std::map<Modality, std::vector<PreparedSubject>> datasets = {{Modality::T1, d_t1},
                                                               {Modality::T2, d_t2}};
  auto grid = cross_modality_matrix(models, datasets, 16);
  CHECK(grid.model_labels == std::vector<std::string>{"T1", "T2"});
  CHECK(grid.dataset_labels == std::vector<std::string>{"T1", "T2"});
  REQUIRE(grid.dice.size() == 2);
  REQUIRE(grid.dice[0].size() == 2);

  // reload each model fresh and evaluate it on its own modality
  auto fresh1 = build_from_checkpoint(read_checkpoint(td.path / "t1.ckpt"));
  auto fresh2 = build_from_checkpoint(read_checkpoint(td.path / "t2.ckpt"));
  CHECK(grid.dice[0][0] == evaluate_subjects(fresh1, d_t1, 16).aggregate.dice);
  CHECK(grid.dice[1][1] == evaluate_subjects(fresh2, d_t2, 16).aggregate.dice);

  write_grid_csv(grid, td.path / "grid.csv");
  write_grid_plot_json(grid, td.path / "grid.json");
  std::ifstream gin(td.path / "grid.csv");
  std::string header;
  std::getline(gin, header);
  CHECK(header == "model,T1,T2");
  std::ifstream pin(td.path / "grid.json");
  nlohmann::json pj;
  pin >> pj;
  CHECK(pj.at("rows") == std::vector<std::string>{"T1", "T2"});
  CHECK(pj.at("values").at(0).size() == 2);
}

TEST_CASE("cross-modality grid rejects mixed architectures") {
  TempDir td("mixed");
  auto m = generate_phantom_dataset(1, {32, 32, 8}, 121, td.path);
  stratified_split(m, 1.0, 1);
  auto data = prepare_dataset(m, {Modality::T1}, std::nullopt).train;

  ArchConfig a;
  a.input_size = 16;
  a.in_channels = 1;
  a.depth = 3;
  a.base_filters = 2;
  ArchConfig b = a;
  b.base_filters = 4;
  Rng r1(9, 1), r2(10, 1);
  auto p1 = ModelPair<float>::build(a, r1);
  auto p2 = ModelPair<float>::build(b, r2);
  save_checkpoint(td.path / "a.ckpt", p1);
  save_checkpoint(td.path / "b.ckpt", p2);

  std::map<Modality, fs::path> models = {{Modality::T1, td.path / "a.ckpt"},
                                         {Modality::T2, td.path / "b.ckpt"}};
  std::map<Modality, std::vector<PreparedSubject>> datasets = {{Modality::T1, data}};
  CHECK_THROWS_AS(cross_modality_matrix(models, datasets, 16), ConfigError);
}
