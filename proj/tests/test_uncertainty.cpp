#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nsamc/uncertainty.hpp"
#include "support.hpp"

using namespace nsamc;

namespace {

const double kLn2 = std::numbers::ln2;

// Per-class variance sums computed straight from the samples.
struct Oracle {
  double epistemic = 0, aleatoric = 0;
};

Oracle variance_oracle(const EmpiricalDistribution& d, std::size_t i) {
  const std::size_t t = d.num_samples(), m = d.num_classes();
  Oracle o;
  for (std::size_t c = 0; c < m; ++c) {
    double mean = 0;
    for (std::size_t s = 0; s < t; ++s) mean += d.at(i, s, c);
    mean /= static_cast<double>(t);
    for (std::size_t s = 0; s < t; ++s) {
      const double p = d.at(i, s, c);
      o.epistemic += (p - mean) * (p - mean) / static_cast<double>(t);
      o.aleatoric += p * (1 - p) / static_cast<double>(t);
    }
  }
  o.epistemic /= static_cast<double>(m);
  o.aleatoric /= static_cast<double>(m);
  return o;
}

}  // namespace

TEST_CASE("entropy decomposition examples") {
  const auto disagree = entropy_decomposition(testing::single_point({{1, 0}, {0, 1}}));
  CHECK(disagree.acquisition == Acquisition::PE);
  CHECK(disagree.total[0] == doctest::Approx(kLn2));
  CHECK(disagree.aleatoric[0] == 0.0);
  CHECK(disagree.epistemic[0] == doctest::Approx(kLn2));

  const auto coin = entropy_decomposition(testing::single_point({{0.5, 0.5}, {0.5, 0.5}}));
  CHECK(coin.total[0] == doctest::Approx(kLn2));
  CHECK(coin.aleatoric[0] == doctest::Approx(kLn2));
  CHECK(std::abs(coin.epistemic[0]) < 1e-15);

  auto rng = testing::test_stream(1);
  const auto single = entropy_decomposition(testing::random_distribution(20, 1, 6, rng));
  for (double he : single.epistemic) CHECK(he == 0.0);
}

TEST_CASE("variance decomposition examples") {
  const auto disagree = std_decomposition(testing::single_point({{1, 0}, {0, 1}}));
  CHECK(disagree.acquisition == Acquisition::STD);
  CHECK(disagree.epistemic[0] == doctest::Approx(0.25));
  CHECK(disagree.aleatoric[0] == 0.0);

  const auto cov = std_covariances(testing::single_point({{1, 0}, {0, 1}}), 0);
  CHECK(cov.epistemic(0, 0) == doctest::Approx(0.25));
  CHECK(cov.epistemic(1, 1) == doctest::Approx(0.25));
  CHECK(cov.aleatoric.cwiseAbs().maxCoeff() == 0.0);
  CHECK(cov.total(0, 0) == doctest::Approx(0.25));
  CHECK(cov.total(1, 1) == doctest::Approx(0.25));

  const auto coin = std_decomposition(testing::single_point({{0.5, 0.5}, {0.5, 0.5}}));
  CHECK(coin.epistemic[0] == 0.0);
  CHECK(coin.aleatoric[0] == doctest::Approx(0.25));

  const auto sure = std_decomposition(testing::single_point({{0, 1, 0}, {0, 1, 0}, {0, 1, 0}}));
  CHECK(sure.total[0] == 0.0);
  CHECK(sure.aleatoric[0] == 0.0);
  CHECK(sure.epistemic[0] == 0.0);
}

TEST_CASE("replicated one-hot samples carry zero uncertainty under both acquisitions") {
  EmpiricalDistribution d(4, 5, 3, Provenance::MC);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t t = 0; t < 5; ++t) d.at(i, t, i % 3) = 1.0;
  }
  for (const auto& map : {entropy_decomposition(d), std_decomposition(d)}) {
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(map.total[i] == 0.0);
      CHECK(map.aleatoric[i] == 0.0);
      CHECK(map.epistemic[i] == 0.0);
    }
  }
}

TEST_CASE("variance split matches a direct per-class oracle") {
  auto rng = testing::test_stream(2);
  const auto d = testing::random_distribution(40, 7, 5, rng);
  const auto map = std_decomposition(d);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto o = variance_oracle(d, i);
    CHECK(map.epistemic[i] == doctest::Approx(o.epistemic).epsilon(1e-12));
    CHECK(map.aleatoric[i] == doctest::Approx(o.aleatoric).epsilon(1e-12));
  }
}

TEST_CASE("identities and bounds on random distributions") {
  auto rng = testing::test_stream(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(20), t = 1 + rng.below(12), m = 2 + rng.below(8);
    const auto d = testing::random_distribution(n, t, m, rng);
    CHECK(total_variance_identity_check(d) < 1e-12);
    const auto pe = entropy_decomposition(d);
    const auto sd = std_decomposition(d);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(pe.epistemic[i] >= -1e-12);
      CHECK(pe.total[i] <= std::log(static_cast<double>(m)) + 1e-12);
      CHECK(std::abs(pe.total[i] - pe.aleatoric[i] - pe.epistemic[i]) < 1e-9);
      CHECK(std::abs(sd.total[i] - sd.aleatoric[i] - sd.epistemic[i]) < 1e-9);
      CHECK(sd.aleatoric[i] >= -1e-12);
      CHECK(sd.epistemic[i] >= -1e-12);
    }
  }
}

TEST_CASE("outputs do not depend on the order of samples") {
  auto rng = testing::test_stream(4);
  const auto d = testing::random_distribution(10, 6, 4, rng);
  EmpiricalDistribution rotated(10, 6, 4, Provenance::NSA);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t c = 0; c < 4; ++c) rotated.at(i, (t + 2) % 6, c) = d.at(i, t, c);
    }
  }
  for (auto f : {&entropy_decomposition, &std_decomposition}) {
    const auto a = f(d), b = f(rotated);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(a.total[i] == doctest::Approx(b.total[i]).epsilon(1e-13));
      CHECK(a.aleatoric[i] == doctest::Approx(b.aleatoric[i]).epsilon(1e-13));
      CHECK(a.epistemic[i] == doctest::Approx(b.epistemic[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("acquisition names and CSV export") {
  CHECK(parse_acquisition("PE") == Acquisition::PE);
  CHECK(parse_acquisition("STD") == Acquisition::STD);
  CHECK_THROWS_AS(parse_acquisition("MI"), Error);

  std::ostringstream out;
  write_uncertainty_csv(std_decomposition(testing::single_point({{1, 0}, {0, 1}})), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# columns: point_index,total,aleatoric,epistemic,acquisition");
  std::getline(in, line);
  CHECK(line == "point_index,total,aleatoric,epistemic,acquisition");
  std::getline(in, line);
  CHECK(line == "0,0.25,0,0.25,STD");
}
