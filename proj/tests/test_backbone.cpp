#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "nsamc/backbone.hpp"
#include "nsamc/parallel.hpp"
#include "nsamc/training.hpp"
#include "support.hpp"

using namespace nsamc;

namespace {

BackboneConfig small_config(DropoutConfig layout = DropoutConfig::Con1, double rate = 0.5) {
  BackboneConfig c;
  c.encoder = {16, 24};
  c.decoder = {32, 24, 20, 16, 4};
  c.dropout_config = layout;
  c.dropout_rate = rate;
  return c;
}

// A model with non-trivial biases, so dead-ReLU regions do not hide bugs.
nn::ModelParams model(const BackboneConfig& c, std::size_t input_dim, std::uint64_t seed) {
  auto p = init_backbone(c, input_dim, seed);
  auto rng = testing::test_stream(seed, 5);
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.1, 0.1);
  }
  return p;
}

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("default backbone sizes") {
  const BackboneConfig c;
  CHECK(c.encoder == std::vector<std::size_t>{64, 128, 256});
  CHECK(c.decoder == std::vector<std::size_t>{512, 256, 256, 128, 5});
  CHECK(BackboneConfig::for_classes(13).num_classes() == 13);
  CHECK(c.hidden_decoder_layers() == 4);
}

TEST_CASE("dropout layouts") {
  auto flags = [](DropoutConfig d) { return small_config(d).dropout_spec().after_layer; };
  CHECK(flags(DropoutConfig::Con1) == std::vector<bool>{true, true, true, true});
  CHECK(flags(DropoutConfig::Con2) == std::vector<bool>{true, false, true, false});
  CHECK(flags(DropoutConfig::Con3) == std::vector<bool>{false, true, false, false});
}

TEST_CASE("config validation") {
  auto c = small_config();
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.decoder.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.encoder = {8, 0};
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("parameter shapes follow the config") {
  const auto c = small_config();
  const auto p = init_backbone(c, 7, 1);
  REQUIRE(p.layers.size() == 7);
  CHECK(p.layers[0].in_dim() == 7);
  CHECK(p.layers[2].in_dim() == 16 + 24);
  CHECK(p.layers.back().out_dim() == 4);
  CHECK_NOTHROW(check_backbone_params(p, c, 7));
  CHECK_THROWS_AS(check_backbone_params(p, c, 8), Error);
  const auto cloud = testing::random_cloud(10, 1, 1.0, 5);
  try {
    forward_deterministic(p, c, cloud);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("deterministic forward: duplicates, permutation, single point") {
  const auto c = small_config();
  auto cloud = testing::random_cloud(40, 2, 1.0, 4);
  const auto p = model(c, 7, 2);

  cloud.coords.row(39) = cloud.coords.row(3);
  cloud.features.row(39) = cloud.features.row(3);
  const auto out = forward_deterministic(p, c, cloud);
  CHECK(out.probs.row(39) == out.probs.row(3));
  for (Eigen::Index i = 0; i < 40; ++i) CHECK(out.probs.row(i).sum() == doctest::Approx(1.0));

  std::vector<std::uint32_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0u);
  auto rng = testing::test_stream(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud permuted = cloud;
  for (std::size_t k = 0; k < 40; ++k) {
    permuted.coords.row(static_cast<Eigen::Index>(k)) = cloud.coords.row(perm[k]);
    permuted.features.row(static_cast<Eigen::Index>(k)) = cloud.features.row(perm[k]);
  }
  const auto pout = forward_deterministic(p, c, permuted);
  for (std::size_t k = 0; k < 40; ++k) {
    CHECK(max_abs(pout.probs.row(static_cast<Eigen::Index>(k)), out.probs.row(perm[k])) < 1e-12);
  }

  // Stochastic: masks travel with the original ids.
  const auto sout = forward_stochastic(p, c, cloud, 9, 1);
  const auto spout = forward_stochastic(p, c, permuted, 9, 1, perm);
  for (std::size_t k = 0; k < 40; ++k) {
    CHECK(max_abs(spout.probs.row(static_cast<Eigen::Index>(k)), sout.probs.row(perm[k])) < 1e-12);
  }

  PointCloud single;
  single.coords = cloud.coords.topRows(1);
  single.features = cloud.features.topRows(1);
  CHECK(forward_deterministic(p, c, single).probs.rows() == 1);
}

TEST_CASE("stochastic forward examples") {
  const auto cloud = [] {
    auto c = testing::random_cloud(2, 4, 1.0, 2);
    c.coords.row(1) = c.coords.row(0);
    c.features.row(1) = c.features.row(0);
    return c;
  }();
  for (auto layout : {DropoutConfig::Con1, DropoutConfig::Con2, DropoutConfig::Con3}) {
    const auto c0 = small_config(layout, 0.0);
    const auto p = model(c0, 5, 4);
    CHECK(forward_stochastic(p, c0, cloud, 1, 1).probs == forward_deterministic(p, c0, cloud).probs);

    const auto c = small_config(layout, 0.5);
    const auto a = forward_stochastic(p, c, cloud, 1, 1);
    CHECK(a.probs.row(0) != a.probs.row(1));
    CHECK(forward_stochastic(p, c, cloud, 1, 1).probs == a.probs);
    CHECK(forward_stochastic(p, c, cloud, 1, 2).probs != a.probs);
    CHECK(forward_mc_style(p, c, cloud, 1, 1).probs == a.probs);
  }
}

TEST_CASE("stochastic forward needs a dropout layer") {
  BackboneConfig c = small_config();
  c.decoder = {4};
  const auto p = init_backbone(c, 3, 1);
  const auto cloud = testing::random_cloud(5, 1);
  try {
    forward_stochastic(p, c, cloud, 1, 1);
    FAIL("expected NoDropoutLayers");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoDropoutLayers);
  }
  CHECK_NOTHROW(forward_deterministic(p, c, cloud));
}

TEST_CASE("MC average over 200 passes approaches the deterministic toy head") {
  BackboneConfig c;
  c.encoder = {8};
  c.decoder = {64, 3};
  c.dropout_rate = 0.5;
  auto p = model(c, 3, 6);
  // A small output layer keeps the softmax close to linear.
  p.layers.back().weight *= 0.2;
  const auto cloud = testing::random_cloud(3, 7);
  const auto det = forward_deterministic(p, c, cloud);
  Matrix mean = Matrix::Zero(3, 3);
  for (std::uint32_t t = 1; t <= 200; ++t) mean += forward_mc_style(p, c, cloud, 5, t).probs;
  mean /= 200.0;
  CHECK(max_abs(mean, det.probs) < 0.02);
}

TEST_CASE("chunked inference matches the recorded forward and ignores the thread count") {
  const auto c = small_config();
  const auto cloud = testing::random_cloud(5000, 8, 2.0, 1);
  const auto p = model(c, 4, 8);
  const StochasticPass pass{3, 2, {}};
  nn::Tape tape;
  const auto id = forward_recorded(p, c, backbone_input(cloud), &pass, tape);
  const Matrix recorded = tape.value(id);
  set_thread_count(1);
  const Matrix one = forward_logits(p, c, backbone_input(cloud), &pass);
  set_thread_count(3);
  const Matrix three = forward_logits(p, c, backbone_input(cloud), &pass);
  set_thread_count(1);
  CHECK(one == three);
  CHECK(max_abs(one, recorded) < 1e-10);
}

TEST_CASE("pass counter counts forward passes") {
  const auto c = small_config();
  const auto cloud = testing::random_cloud(20, 9, 1.0, 1);
  const auto p = model(c, 4, 9);
  reset_forward_pass_count();
  forward_deterministic(p, c, cloud);
  forward_stochastic(p, c, cloud, 1, 1);
  nn::Tape tape;
  forward_recorded(p, c, backbone_input(cloud), nullptr, tape);
  CHECK(forward_pass_count() == 3);
}

TEST_CASE("backbone gradients match finite differences for every dropout layout") {
  for (auto layout : {DropoutConfig::Con1, DropoutConfig::Con2, DropoutConfig::Con3}) {
    CAPTURE(to_string(layout));
    const auto c = small_config(layout);
    const auto cloud = testing::random_cloud(128, 10, 1.0, 2, 4);
    const auto p = model(c, 5, 10);
    const Matrix input = backbone_input(cloud);
    const StochasticPass pass{4, 1, {}};
    const nn::LossFunction loss = [&](const nn::ModelParams& q, nn::GradientSet* grads) {
      nn::Tape tape;
      const auto out = forward_recorded(q, c, input, &pass, tape);
      const auto result = ce_loss(nn::softmax_rows(tape.value(out)), cloud.labels);
      if (grads) *grads = nn::backward(q, tape, out, result.grad_logits);
      return result.loss;
    };
    CHECK(nn::gradient_check(p, loss, 1e-5, 100, 1) < 1e-4);
  }
}
