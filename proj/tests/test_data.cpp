#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "pucl/data.hpp"
#include "pucl/errors.hpp"

using namespace pucl;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::size_t parse_error_line(const std::filesystem::path& p) {
  try {
    load_csv_dataset(p);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

double sign_accuracy(const BinaryDataset& ds) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += ((ds.features(i, 0) >= 0 ? 1 : -1) == ds.labels[i]);
  return static_cast<double>(ok) / ds.size();
}

BinaryDataset counts_dataset(std::size_t p, std::size_t n) {
  BinaryDataset ds;
  ds.features = Matrix(p + n, 1);
  for (std::size_t i = 0; i < p + n; ++i) {
    ds.features(i, 0) = static_cast<double>(i);
    ds.labels.push_back(i < p ? 1 : -1);
  }
  return ds;
}

}  // namespace

TEST_CASE("exact_pi examples") {
  CHECK(exact_pi(30000, 30000, 3000).pi() == doctest::Approx(27000.0 / 57000.0).epsilon(1e-15));
  CHECK(exact_pi(30000, 30000, 3000).pi() == doctest::Approx(0.473684).epsilon(1e-6));
  CHECK(exact_pi(70, 30, 0).pi() == doctest::Approx(0.7));
  CHECK(exact_pi(70, 30, 70).pi() == 0.0);
  CHECK_THROWS_AS(exact_pi(10, 10, 11), ArgumentError);
  CHECK_THROWS_AS(exact_pi(5, 0, 5), ArgumentError);
}

TEST_CASE("exact_pi stays in [0, 1] and is nonincreasing in n_P") {
  for (std::size_t p = 1; p <= 30; p += 7)
    for (std::size_t n = 0; n <= 30; n += 5) {
      double prev = 2.0;
      for (std::size_t k = 0; k <= p; ++k) {
        if (p + n - k == 0) continue;
        const double pi = exact_pi(p, n, k).pi();
        CHECK(pi >= 0.0);
        CHECK(pi <= 1.0);
        CHECK(pi <= prev);
        prev = pi;
      }
    }
}

TEST_CASE("ClassPrior validates its range") {
  CHECK_THROWS_AS(ClassPrior(-0.1), ArgumentError);
  CHECK_THROWS_AS(ClassPrior(1.1), ArgumentError);
  CHECK_THROWS_AS(ClassPrior(std::nan("")), ArgumentError);
  CHECK(ClassPrior(0.0).pi() == 0.0);
  CHECK(ClassPrior(1.0).pi() == 1.0);
}

TEST_CASE("synth_gaussians shape, counts and determinism") {
  const auto a = synth_gaussians(101, 4, 3.0, 0.3, 9);
  CHECK(a.size() == 101);
  CHECK(a.features.cols() == 4);
  CHECK(a.count_positive() == 30);
  a.validate();
  const auto b = synth_gaussians(101, 4, 3.0, 0.3, 9);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const auto c = synth_gaussians(101, 4, 3.0, 0.3, 10);
  CHECK_FALSE(a.features == c.features);
  const auto t = synth_gaussians(101, 4, 3.0, 0.3, 9, streams::kSynthTest);
  CHECK_FALSE(a.features == t.features);

  CHECK_THROWS_AS(synth_gaussians(1, 4, 1.0, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(synth_gaussians(10, 0, 1.0, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS(synth_gaussians(10, 2, 1.0, 0.0, 1), ArgumentError);
  CHECK_THROWS_AS(synth_gaussians(10, 2, 1.0, 1.0, 1), ArgumentError);
  CHECK_THROWS_AS(synth_gaussians(10, 2, -1.0, 0.5, 1), ArgumentError);
}

TEST_CASE("synth_gaussians class geometry") {
  // Bayes classifier sign(x_0): accuracy Phi(sep / 2).
  const auto easy = synth_gaussians(20000, 10, 8.0, 0.5, 3);
  CHECK(sign_accuracy(easy) >= 0.999);
  CHECK(0.5 * std::erfc(-4.0 / std::sqrt(2.0)) == doctest::Approx(0.99997).epsilon(1e-5));
  const auto none = synth_gaussians(20000, 10, 0.0, 0.5, 3);
  CHECK(std::abs(sign_accuracy(none) - 0.5) < 0.02);
  // Other coordinates carry no class signal.
  double pos_mean = 0.0, neg_mean = 0.0;
  for (std::size_t i = 0; i < easy.size(); ++i)
    (easy.labels[i] == 1 ? pos_mean : neg_mean) += easy.features(i, 1);
  CHECK(std::abs(pos_mean / 10000 - neg_mean / 10000) < 0.06);
}

TEST_CASE("make_pu examples") {
  const auto ds = synth_gaussians(200, 3, 2.0, 0.5, 4);
  const std::size_t p = ds.count_positive();

  const auto none = make_pu(ds, 0, 1);
  CHECK(none.labeled_count() == 0);
  CHECK(none.prior().pi() == doctest::Approx(static_cast<double>(p) / ds.size()));

  const auto all = make_pu(ds, p, 1);
  CHECK(all.labeled_count() == p);
  CHECK(all.prior().pi() == 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (all.indicator()[i] == 0) CHECK(all.hidden_labels()[i] == -1);

  CHECK_THROWS_AS(make_pu(ds, p + 1, 1), ArgumentError);
}

TEST_CASE("make_pu at 30000 + 30000 with 3000 labeled") {
  const auto ds = counts_dataset(30000, 30000);
  REQUIRE(ds.count_positive() == 30000);
  const auto pu = make_pu(ds, 3000, 5);
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < pu.size(); ++i) {
    if (pu.indicator()[i] == 1) {
      ++labeled;
      CHECK(pu.hidden_labels()[i] == 1);
    }
  }
  CHECK(labeled == 3000);
  CHECK(pu.prior().pi() == doctest::Approx(0.473684).epsilon(1e-6));
}

TEST_CASE("make_pu: labeled implies positive, replayable, seed dependent") {
  const auto ds = synth_gaussians(300, 2, 1.0, 0.4, 8);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto pu = make_pu(ds, 40, seed);
    for (std::size_t i = 0; i < pu.size(); ++i)
      if (pu.indicator()[i] == 1) REQUIRE(pu.hidden_labels()[i] == 1);
    const auto again = make_pu(ds, 40, seed);
    CHECK(std::equal(pu.indicator().begin(), pu.indicator().end(), again.indicator().begin()));
    const auto other = make_pu(ds, 40, seed + 100);
    CHECK_FALSE(std::equal(pu.indicator().begin(), pu.indicator().end(), other.indicator().begin()));
  }
}

TEST_CASE("PUDataset rejects labeled negatives") {
  CHECK_THROWS_AS(PUDataset(Matrix(2, 1), {1, 0}, {-1, 1}, ClassPrior(0.5)), ArgumentError);
  CHECK_THROWS_AS(PUDataset(Matrix(2, 1), {2, 0}, {1, 1}, ClassPrior(0.5)), ArgumentError);
  CHECK_THROWS_AS(PUDataset(Matrix(3, 1), {1, 0}, {1, 1}, ClassPrior(0.5)), ArgumentError);
}

TEST_CASE("make_pnu examples") {
  const auto ds = synth_gaussians(100, 2, 2.0, 0.5, 2);
  const auto full = make_pnu(ds, 100, 1);
  CHECK(full.fully_labeled());
  for (std::size_t i = 0; i < 100; ++i) CHECK(full.observed_labels()[i] == ds.labels[i]);
  const auto none = make_pnu(ds, 0, 1);
  CHECK(none.labeled_count() == 0);
  const auto half = make_pnu(ds, 50, 3);
  CHECK(half.labeled_count() == 50);
  const auto again = make_pnu(ds, 50, 3);
  CHECK(std::equal(half.observed_labels().begin(), half.observed_labels().end(),
                   again.observed_labels().begin()));
  bool saw_pos = false, saw_neg = false;
  for (int y : half.observed_labels()) {
    saw_pos |= y == 1;
    saw_neg |= y == -1;
  }
  CHECK(saw_pos);
  CHECK(saw_neg);
  CHECK_THROWS_AS(make_pnu(ds, 101, 1), ArgumentError);
}

TEST_CASE("training views hide ground truth") {
  const auto ds = synth_gaussians(50, 2, 2.0, 0.5, 2);
  const auto pu = make_pu(ds, 10, 1);
  const auto v = training_view(pu);
  CHECK(v.kind == Supervision::kPU);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.observed[i] == (pu.indicator()[i] ? 1 : 0));
  const auto pnu = make_pnu(ds, 20, 1);
  const auto w = training_view(pnu);
  CHECK(w.kind == Supervision::kPNU);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w.observed[i] == pnu.observed_labels()[i]);
    CHECK(w.indicator[i] == (pnu.observed_labels()[i] != 0 ? 1 : 0));
  }
}

TEST_CASE("make_multiview_batch") {
  const auto ds = synth_gaussians(40, 3, 2.0, 0.5, 2);
  const auto pu = make_pu(ds, 10, 1);
  const auto view = training_view(pu);
  std::vector<std::size_t> sources(20);
  for (std::size_t i = 0; i < 20; ++i) sources[i] = 2 * i;

  RngStream rng(1, streams::kAugment);
  const auto same = make_multiview_batch(view, sources, AugmentConfig::identity(), rng);
  REQUIRE(same.views() == 40);
  for (std::size_t v = 0; v < 40; ++v) {
    const auto row = same.inputs.row(v);
    const auto src = pu.features().row(sources[v / 2]);
    CHECK(std::equal(row.begin(), row.end(), src.begin()));
  }

  RngStream rng2(1, streams::kAugment);
  const auto b = make_multiview_batch(view, sources, AugmentConfig{}, rng2);
  std::size_t labeled = 0;
  for (std::size_t v = 0; v < b.views(); ++v) {
    const std::size_t a = b.pair_index[v];
    CHECK(b.pair_index[a] == v);
    CHECK(a != v);
    CHECK(b.source_index[v] == sources[v / 2]);
    CHECK(b.source_index[a] == b.source_index[v]);
    CHECK(b.indicator[v] == view.indicator[b.source_index[v]]);
    CHECK(b.indicator[a] == b.indicator[v]);
    CHECK(b.labels[a] == b.labels[v]);
    labeled += b.indicator[v];
  }
  CHECK(labeled % 2 == 0);
  CHECK_FALSE(b.inputs.row(0)[1] == b.inputs.row(1)[1]);

  RngStream rng3(1, streams::kAugment);
  const auto replay = make_multiview_batch(view, sources, AugmentConfig{}, rng3);
  CHECK(replay.inputs == b.inputs);

  CHECK_THROWS_AS(make_multiview_batch(view, std::vector<std::size_t>{}, AugmentConfig{}, rng),
                  ArgumentError);
  CHECK_THROWS_AS(make_multiview_batch(view, std::vector<std::size_t>{40}, AugmentConfig{}, rng),
                  ArgumentError);
}

TEST_CASE("augment_row applies jitter, scale and mask") {
  std::vector<double> row{1, 2, 3, 4};
  RngStream rng(3, 0);
  augment_row(row, AugmentConfig{0.0, 2.0, 2.0, 0.0}, rng);
  CHECK(row == std::vector<double>{2, 4, 6, 8});
  std::vector<double> masked(1000, 1.0);
  augment_row(masked, AugmentConfig{0.0, 1.0, 1.0, 0.5}, rng);
  const auto zeros = std::count(masked.begin(), masked.end(), 0.0);
  CHECK(zeros > 400);
  CHECK(zeros < 600);
  CHECK(std::count(masked.begin(), masked.end(), 1.0) + zeros == 1000);
  CHECK_THROWS_AS((AugmentConfig{-1.0, 1.0, 1.0, 0.0}.validate()), ArgumentError);
  CHECK_THROWS_AS((AugmentConfig{0.0, 1.2, 1.0, 0.0}.validate()), ArgumentError);
  CHECK_THROWS_AS((AugmentConfig{0.0, 1.0, 1.0, 1.0}.validate()), ArgumentError);
}

TEST_CASE("CSV round trips and parse errors") {
  const auto dir = testing::temp_dir("csv");
  write_text(dir / "two.csv", "feature_0,feature_1,y\n0.5,1.5,1\n-2,3,-1\n");
  const auto two = load_csv_dataset(dir / "two.csv");
  CHECK(two.size() == 2);
  CHECK(two.labels == std::vector<int>{1, -1});
  CHECK(two.features == Matrix{{0.5, 1.5}, {-2, 3}});
  two.validate();

  write_text(dir / "zero.csv", "feature_0,y\n1,1\n2,0\n");
  CHECK(parse_error_line(dir / "zero.csv") == 3);
  write_text(dir / "width.csv", "feature_0,y\n1,1\n2,1\n3\n");
  CHECK(parse_error_line(dir / "width.csv") == 4);
  write_text(dir / "bad.csv", "feature_0,y\n1,1\nabc,-1\n");
  CHECK(parse_error_line(dir / "bad.csv") == 3);
  write_text(dir / "header.csv", "x,y\n1,1\n");
  CHECK(parse_error_line(dir / "header.csv") == 1);

  const auto ds = synth_gaussians(30, 3, 2.0, 0.5, 1);
  write_csv(ds, dir / "ds.csv");
  const auto back = load_csv_dataset(dir / "ds.csv");
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);

  const auto pu = make_pu(ds, 5, 1);
  write_csv(pu, dir / "pu.csv");
  const auto pu_back = load_pu_csv(dir / "pu.csv");
  CHECK(pu_back.features() == pu.features());
  CHECK(std::equal(pu.indicator().begin(), pu.indicator().end(), pu_back.indicator().begin()));
  CHECK(pu_back.prior().pi() == pu.prior().pi());
  CHECK_THROWS_AS(load_pu_csv(dir / "ds.csv"), ParseError);

  const auto pnu = make_pnu(ds, 12, 1);
  write_csv(pnu, dir / "pnu.csv");
  const auto pnu_back = load_pnu_csv(dir / "pnu.csv");
  CHECK(std::equal(pnu.observed_labels().begin(), pnu.observed_labels().end(),
                   pnu_back.observed_labels().begin()));
  CHECK(pnu_back.prior().pi() == pnu.prior().pi());

  write_text(dir / "pu_bad.csv", "feature_0,y,s\n1,1,1\n2,-1,1\n");
  try {
    load_pu_csv(dir / "pu_bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}
