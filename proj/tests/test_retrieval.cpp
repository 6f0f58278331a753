#include <doctest.h>

#include <algorithm>
#include <random>

#include "fetomosaic/retrieval.hpp"
#include "support.hpp"

using namespace fetomosaic;

namespace {

Signature sig(std::initializer_list<int> c) {
  Signature s;
  s.counts.resize(static_cast<Eigen::Index>(c.size()));
  Eigen::Index k = 0;
  for (int v : c) s.counts(k++) = v;
  return s;
}

Eigen::MatrixXd two_blobs(std::mt19937_64& rng, int per_blob) {
  std::normal_distribution<double> n(0.0, 0.3);
  Eigen::MatrixXd data(2 * per_blob, 2);
  for (int k = 0; k < per_blob; ++k) {
    data.row(k) << n(rng), n(rng);
    data.row(per_blob + k) << 10 + n(rng), 5 + n(rng);
  }
  return data;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("constant frame has no descriptors") {
  CHECK(extract_descriptors(Image::Constant(64, 64, 0.4), full_mask(64, 64), 16).empty());
}

TEST_CASE("lattice and normalization") {
  const Image img = testsupport::smooth_image(64, 64, 1);
  const auto d = extract_descriptors(img, full_mask(64, 64), 16);
  CHECK(!d.empty());
  CHECK(d.size() <= 9);
  for (const auto& x : d) {
    CHECK(x.vector.norm() == doctest::Approx(1.0));
    CHECK(x.vector.minCoeff() >= 0.0);
  }
  const auto again = extract_descriptors(img, full_mask(64, 64), 16);
  REQUIRE(again.size() == d.size());
  for (std::size_t k = 0; k < d.size(); ++k) CHECK(again[k].vector == d[k].vector);
}

TEST_CASE("masked patches are skipped") {
  const Image img = testsupport::smooth_image(96, 96, 2);
  Mask m = full_mask(96, 96);
  m.leftCols(48).setConstant(false);
  for (const auto& d : extract_descriptors(img, m, 8)) CHECK(d.keypoint.x() - kDescriptorPatch / 2 >= 48);
}

TEST_CASE("a single word is the mean") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd data = two_blobs(rng, 20);
  const Vocabulary v = build_vocabulary(data, 1, 7);
  REQUIRE(v.size() == 1);
  CHECK((v.centroids.row(0) - data.colwise().mean()).norm() < 1e-12);
}

TEST_CASE("two blobs are separated") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd data = two_blobs(rng, 200);
  const Vocabulary v = build_vocabulary(data, 2, 11);
  const Eigen::RowVector2d a = data.topRows(200).colwise().mean();
  const Eigen::RowVector2d b = data.bottomRows(200).colwise().mean();
  const double da = std::min((v.centroids.row(0) - a).norm(), (v.centroids.row(1) - a).norm());
  const double db = std::min((v.centroids.row(0) - b).norm(), (v.centroids.row(1) - b).norm());
  CHECK(da < 0.1);
  CHECK(db < 0.1);
}

TEST_CASE("inertia never increases and the seed fixes the result") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(300, 4);
  std::uniform_real_distribution<double> u(0, 1);
  for (Eigen::Index k = 0; k < data.size(); ++k) data(k) = u(rng);
  const Vocabulary v = build_vocabulary(data, 12, 21);
  REQUIRE(v.inertia_history.size() >= 2);
  for (std::size_t k = 1; k < v.inertia_history.size(); ++k) {
    CHECK(v.inertia_history[k] <= v.inertia_history[k - 1]);
  }
  CHECK(build_vocabulary(data, 12, 21).centroids == v.centroids);
  CHECK_THROWS_AS(build_vocabulary(data.topRows(5), 12, 21), Error);
}

TEST_CASE("signatures count words") {
  Vocabulary v;
  v.centroids = Eigen::MatrixXd::Identity(5, kDescriptorSize);
  CHECK(compute_signature({}, v).counts == Eigen::VectorXi::Zero(5));
  std::vector<Descriptor> ds(7);
  for (auto& d : ds) d.vector = v.centroids.row(3).transpose();
  CHECK(compute_signature(ds, v).counts == (Eigen::VectorXi(5) << 0, 0, 0, 7, 0).finished());

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& d : ds) d.vector = Eigen::Matrix<double, kDescriptorSize, 1>::NullaryExpr([&] { return u(rng); });
  CHECK(compute_signature(ds, v).total() == 7);
}

TEST_CASE("nearest word ties go to the lowest index") {
  Vocabulary v;
  v.centroids = Eigen::MatrixXd::Zero(3, 2);
  v.centroids.row(1) << 1, 0;
  v.centroids.row(2) << -1, 0;
  CHECK(nearest_word(v, Eigen::Vector2d(0.5, 0)) == 0);
  CHECK(nearest_word(v, Eigen::Vector2d(-0.9, 0)) == 2);
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(sig({3, 1, 2}), sig({3, 1, 2})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(sig({1, 0}), sig({0, 1})) == 0.0);
  CHECK(cosine_similarity(sig({1, 1, 0}), sig({1, 0, 1})) == doctest::Approx(0.5));
  CHECK(cosine_similarity(sig({0, 0}), sig({1, 1})) == 0.0);
}

TEST_CASE("similarity matrix") {
  const std::vector<Signature> same(4, sig({2, 0, 5}));
  CHECK((build_similarity_matrix(same).array() - 1.0).abs().maxCoeff() < 1e-15);

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> u(0, 9);
  std::vector<Signature> ss;
  for (int k = 0; k < 12; ++k) ss.push_back(sig({u(rng), u(rng), u(rng), u(rng), 1}));
  const Eigen::MatrixXd s = build_similarity_matrix(ss);
  CHECK(s == s.transpose());
  for (int k = 0; k < 12; ++k) CHECK(s(k, k) == doctest::Approx(1.0));
}

TEST_CASE("pair selection") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(300, 300);
  s(10, 200) = s(200, 10) = 0.9;
  using Pairs = std::vector<std::pair<int, int>>;
  CHECK(select_pairs(s, 0.5, 10, 10) == Pairs{{10, 200}});
  CHECK(select_pairs(s, 1.01, 10, 10).empty());
  CHECK(select_pairs(s, 0.5, 0, 10).empty());

  s(20, 25) = s(25, 20) = 0.95;
  s(30, 290) = s(290, 30) = 0.99;
  s(40, 60) = s(60, 40) = 0.7;
  CHECK(select_pairs(s, 0.5, 10, 10) == Pairs{{30, 290}, {10, 200}, {40, 60}});
  CHECK(select_pairs(s, 0.5, 2, 10) == Pairs{{30, 290}, {10, 200}});
  CHECK(select_pairs(s, 0.5, 10, 3) == Pairs{{30, 290}, {20, 25}, {10, 200}, {40, 60}});
}

}  // TEST_SUITE
