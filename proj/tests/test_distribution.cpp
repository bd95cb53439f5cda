#include <doctest.h>

#include <sstream>

#include "nsamc/distribution.hpp"
#include "support.hpp"

using namespace nsamc;

namespace {

ClassProbabilities random_probs(std::size_t n, std::size_t m, std::uint64_t seed) {
  auto rng = testing::test_stream(seed);
  ClassProbabilities p;
  p.probs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = testing::random_simplex(rng, m);
    for (std::size_t c = 0; c < m; ++c) p.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
  }
  return p;
}

BackboneConfig toy_config(double rate = 0.5) {
  BackboneConfig c;
  c.encoder = {8, 12};
  c.decoder = {16, 16, 3};
  c.dropout_rate = rate;
  return c;
}

}  // namespace

TEST_CASE("NSA with T=1 keeps each point's own prediction") {
  const auto cloud = testing::random_cloud(30, 1);
  const auto probs = random_probs(30, 4, 2);
  const auto dist = establish_nsa(probs, knn(build_index(cloud), cloud, 1));
  CHECK(dist.provenance() == Provenance::NSA);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(dist.at(i, 0, c) == probs.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
  }
}

TEST_CASE("two coincident points share their sample set") {
  PointCloud cloud;
  cloud.coords = Matrix::Zero(2, 3);
  cloud.features.resize(2, 0);
  const auto probs = random_probs(2, 3, 3);
  const auto dist = establish_nsa(probs, knn(build_index(cloud), cloud, 2));
  CHECK(dist.at(0, 0, 0) == probs.probs(0, 0));
  CHECK(dist.at(0, 1, 0) == probs.probs(1, 0));
  CHECK(dist.at(1, 0, 0) == probs.probs(1, 0));
  CHECK(dist.at(1, 1, 0) == probs.probs(0, 0));
}

TEST_CASE("NSA equals a direct gather") {
  const auto cloud = testing::random_cloud(200, 4);
  const auto probs = random_probs(200, 5, 5);
  const auto nb = knn(build_index(cloud), cloud, 7);
  const auto dist = establish_nsa(probs, nb);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t t = 0; t < 7; ++t) {
      for (std::size_t c = 0; c < 5; ++c) {
        REQUIRE(dist.at(i, t, c) == probs.probs(nb.at(i, t), static_cast<Eigen::Index>(c)));
      }
    }
  }
  CHECK_NOTHROW(dist.validate());
}

TEST_CASE("NSA rejects a neighbor table of another size") {
  const auto cloud = testing::random_cloud(10, 4);
  const auto nb = knn(build_index(cloud), cloud, 3);
  try {
    establish_nsa(random_probs(9, 2, 1), nb);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("MC examples") {
  const auto cloud = testing::random_cloud(25, 6, 1.0, 1);
  const auto c = toy_config();
  const auto p = init_backbone(c, 4, 6);

  const auto one = establish_mc(p, c, cloud, 1, 3);
  const auto single = forward_stochastic(p, c, cloud, 3, 1);
  CHECK(one.provenance() == Provenance::MC);
  for (std::size_t i = 0; i < 25; ++i) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(one.at(i, 0, k) == single.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
  }

  const auto c0 = toy_config(0.0);
  const auto flat = establish_mc(p, c0, cloud, 6, 3);
  for (std::size_t i = 0; i < 25; ++i) {
    for (std::size_t t = 1; t < 6; ++t) {
      for (std::size_t k = 0; k < 3; ++k) CHECK(flat.at(i, t, k) == flat.at(i, 0, k));
    }
  }

  CHECK(establish_mc(p, c, cloud, 5, 11).data() == establish_mc(p, c, cloud, 5, 11).data());

  BackboneConfig none = c;
  none.decoder = {3};
  const auto q = init_backbone(none, 4, 1);
  CHECK_THROWS_AS(establish_mc(q, none, cloud, 3, 1), Error);
}

TEST_CASE("establish_mc runs exactly T passes, NSA pipeline exactly one") {
  const auto cloud = testing::random_cloud(40, 7, 1.0, 1);
  const auto c = toy_config();
  const auto p = init_backbone(c, 4, 7);
  const auto nb = knn(build_index(cloud), cloud, 6);
  for (std::size_t t : {1u, 4u, 9u}) {
    reset_forward_pass_count();
    establish_mc(p, c, cloud, t, 1);
    CHECK(forward_pass_count() == t);
  }
  reset_forward_pass_count();
  establish_nsa(forward_stochastic(p, c, cloud, 1, 1), nb);
  CHECK(forward_pass_count() == 1);
}

TEST_CASE("predictive mean examples") {
  const auto same = testing::single_point({{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}});
  const auto m = predictive_mean(same);
  CHECK(m.probs(0, 0) == doctest::Approx(0.2));
  CHECK(m.probs(0, 1) == doctest::Approx(0.8));

  const auto split = predictive_mean(testing::single_point({{1, 0}, {0, 1}}));
  CHECK(split.probs(0, 0) == 0.5);
  CHECK(split.probs(0, 1) == 0.5);

  auto rng = testing::test_stream(8);
  const auto dist = testing::random_distribution(30, 6, 4, rng);
  const auto mean = predictive_mean(dist);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0;
      for (std::size_t t = 0; t < 6; ++t) s += dist.at(i, t, c);
      CHECK(mean.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) == doctest::Approx(s / 6).epsilon(1e-14));
    }
    CHECK(mean.probs.row(static_cast<Eigen::Index>(i)).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("predicted labels ignore the order of samples") {
  auto rng = testing::test_stream(9);
  const auto dist = testing::random_distribution(50, 8, 5, rng);
  EmpiricalDistribution reversed(50, 8, 5, Provenance::NSA);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t t = 0; t < 8; ++t) {
      for (std::size_t c = 0; c < 5; ++c) reversed.at(i, 7 - t, c) = dist.at(i, t, c);
    }
  }
  CHECK(predictive_mean(dist).argmax() == predictive_mean(reversed).argmax());
}

TEST_CASE("validate flags samples off the simplex") {
  auto d = testing::single_point({{0.5, 0.5}});
  CHECK_NOTHROW(d.validate());
  d.at(0, 0, 0) = 0.7;
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("binary dump round-trips") {
  auto rng = testing::test_stream(10);
  const auto dist = testing::random_distribution(7, 3, 4, rng);
  std::stringstream buffer;
  write_distribution(dist, buffer);
  CHECK(buffer.str().size() == 3 * 8 + 1 + 7 * 3 * 4 * 8);
  const auto back = read_distribution(buffer);
  CHECK(back.num_points() == 7);
  CHECK(back.num_samples() == 3);
  CHECK(back.num_classes() == 4);
  CHECK(back.data() == dist.data());

  std::stringstream truncated(buffer.str().substr(0, 30));
  CHECK_THROWS_AS(read_distribution(truncated), Error);
}
