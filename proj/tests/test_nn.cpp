#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "calving/nn/serialize.hpp"
#include "calving/nn/train.hpp"

using namespace calving;
using namespace calving::nn;

TEST_CASE("spec validation rejects incompatible adjacent layers") {
  NetworkSpec spec;
  spec.input = {4, 1};
  spec.layers = {Dense{4, 3}, Dense{5, 2}};
  CHECK_THROWS_AS(spec.layer_shapes(), ContractViolation);

  spec.layers = {Dense{4, 3}, Relu{}, Dense{3, 2}, Softmax{}};
  CHECK(spec.output_shape() == Shape{2, 1});

  NetworkSpec conv;
  conv.input = {2, 4};
  conv.layers = {Conv1d{2, 3, 5, 1}};  // kernel longer than the input
  CHECK_THROWS_AS(conv.layer_shapes(), ContractViolation);
}

TEST_CASE("zero dense+softmax net gives the uniform posterior") {
  Network net = Network::zeros(dense_classifier(3, {}, 4));
  Tensor out = forward(net, Tensor::vec({0.3, -2.0, 5.0}));
  for (double p : out.v) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("identity-configured dense layer passes its input through") {
  NetworkSpec spec;
  spec.input = {3, 1};
  spec.layers = {Dense{3, 3}};
  Network net = Network::zeros(spec);
  for (int i = 0; i < 3; ++i) net.params[0].w[static_cast<size_t>(i * 3 + i)] = 1.0;
  Tensor out = forward(net, Tensor::vec({1.5, -0.25, 42.0}));
  CHECK(out.v == std::vector<double>{1.5, -0.25, 42.0});
}

TEST_CASE("unit conv kernel plus GAP averages a constant sequence to itself") {
  NetworkSpec spec;
  spec.input = {1, 10};
  spec.layers = {Conv1d{1, 1, 1, 1}, GlobalAvgPool{}};
  Network net = Network::zeros(spec);
  net.params[0].w[0] = 1.0;
  Tensor in(1, 10);
  for (double& v : in.v) v = 3.25;
  Tensor out = forward(net, in);
  CHECK(out.v[0] == doctest::Approx(3.25).epsilon(1e-15));
}

TEST_CASE("forward rejects inputs that do not match the declared shape") {
  Network net = Network::zeros(dense_classifier(3, {}, 2));
  CHECK_THROWS_AS(forward(net, Tensor::vec({1.0, 2.0})), ContractViolation);
}

TEST_CASE("softmax outputs stay on the simplex for random nets") {
  Rng rng(123);
  for (int draw = 0; draw < 50; ++draw) {
    Network net = Network::init(dense_classifier(6, {5}, 3), rng.next_u64());
    Tensor x(6, 1);
    for (double& v : x.v) v = rng.gauss(0.0, 5.0);
    Tensor out = forward(net, x);
    double sum = 0.0;
    for (double p : out.v) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cross-entropy examples") {
  Network net = Network::zeros(dense_classifier(2, {}, 2));
  // Force a near-perfect posterior through a large logit gap.
  net.params[0].w = {30.0, 0.0, -30.0, 0.0};
  auto [loss, grads] = loss_and_gradients(net, {{Tensor::vec({1.0, 0.0}), 0}});
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-9));

  Network uniform = Network::zeros(dense_classifier(2, {}, 2));
  auto [l2, g2] = loss_and_gradients(uniform, {{Tensor::vec({1.0, 0.0}), 1}});
  CHECK(l2 == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(loss_and_gradients(net, {}), ContractViolation);
}

TEST_CASE("sgd step arithmetic") {
  NetworkSpec spec;
  spec.input = {1, 1};
  spec.layers = {Dense{1, 1}};
  Network net = Network::zeros(spec);
  net.params[0].w[0] = 1.0;

  ParamSet grads = zero_like(net);
  grads[0].w[0] = 2.0;
  sgd_step(net, grads, 0.005);
  CHECK(net.params[0].w[0] == doctest::Approx(0.99).epsilon(1e-15));

  sgd_step(net, grads, 0.0);  // lr 0: unchanged
  CHECK(net.params[0].w[0] == doctest::Approx(0.99).epsilon(1e-15));

  ParamSet zero = zero_like(net);
  sgd_step(net, zero, 0.1);  // zero gradients: unchanged
  CHECK(net.params[0].w[0] == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("network serialization round-trips parameters bitwise") {
  Rng rng(77);
  NetworkSpec spec;
  spec.input = {2, 20};
  spec.layers = {Conv1d{2, 4, 3, 1}, Relu{}, GlobalAvgPool{}, Dense{4, 2}, Softmax{}};
  spec.hlo_tap = 2;
  Network net = Network::init(spec, rng.next_u64());
  for (auto& p : net.params)
    for (double& b : p.b) b = rng.gauss();

  const auto path = std::filesystem::temp_directory_path() / "calving_net_roundtrip.model";
  save_network(net, path.string());
  Network loaded = load_network(path.string());
  CHECK(loaded.flat_params() == net.flat_params());
  CHECK(loaded.spec.hlo_tap == net.spec.hlo_tap);
  CHECK(loaded.fingerprint() == net.fingerprint());
  std::filesystem::remove(path);
}

TEST_CASE("model files with a wrong schema version are rejected") {
  Network net = Network::zeros(dense_classifier(2, {}, 2));
  nlohmann::json j = network_to_json(net);
  j["schema_version"] = 999;
  CHECK_THROWS_AS(network_from_json(j), IoError);
}

TEST_CASE("forward_with_hlo returns the tapped activation") {
  NetworkSpec spec = dense_classifier(4, {3}, 2, 3);
  REQUIRE(spec.hlo_tap == 1);
  Rng rng(5);
  Network net = Network::init(spec, rng.next_u64());
  Tensor x(4, 1);
  for (double& v : x.v) v = rng.gauss();
  auto [out, hlo] = forward_with_hlo(net, x);
  CHECK(hlo.size() == 3);
  for (double v : hlo.v) CHECK(v >= 0.0);  // post-ReLU tap
}
