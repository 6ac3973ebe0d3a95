/*
 Copyright 2026 The conn-control Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "conn/dataset.hpp"
#include "conn/errors.hpp"
#include "conn/model.hpp"
#include "conn/problems.hpp"
#include "conn/training.hpp"
#include "gradient_check.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace conn;
using conn::testing::random_vec;
namespace fs = std::filesystem;

namespace
{

  fs::path temp_file(const std::string &name)
  {
    const fs::path dir = fs::temp_directory_path() / "conn_unit_tests";
    fs::create_directories(dir);
    return dir / name;
  }

  std::string slurp(const fs::path &p)
  {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  ConnModel hand_network()
  {
    ConnArchitecture arch;
    arch.state_dim = 1;
    arch.horizon = 2;
    arch.hidden = {1};
    arch.activation = Activation::kTanh;
    arch.input_scale = 1.0;
    Mat w0(1, 1);
    w0 << 0.5;
    Vec b0(1);
    b0 << 0.1;
    Mat w1(2, 1);
    w1 << 2.0, -1.0;
    Vec b1(2);
    b1 << 0.5, 0.0;
    return ConnModel(arch, {w0, w1}, {b0, b1});
  }

} // namespace

TEST_CASE("hand network forward pass")
{
  const Mat out = hand_network().forward(Vec::Constant(1, 2.0));
  REQUIRE(out.rows() == 2);
  REQUIRE(out.cols() == 1);
  CHECK(out(0, 0) == doctest::Approx(2.100998043521259412).epsilon(1e-14));
  CHECK(out(1, 0) == doctest::Approx(-0.8004990217606297060).epsilon(1e-14));
}

TEST_CASE("shapes and zero output layer")
{
  ConnArchitecture arch;
  arch.state_dim = 2;
  arch.horizon = 5;
  arch.hidden = {7, 3};
  ConnModel m = ConnModel::initialize(arch, 11);
  CHECK(m.layer_sizes() == std::vector<int>{2, 7, 3, 10});
  CHECK(m.parameter_count() == static_cast<std::size_t>(2 * 7 + 7 + 7 * 3 + 3 + 3 * 10 + 10));
  m.weights().back().setZero();
  m.biases().back().setZero();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i)
  {
    const Mat out = m.forward(random_vec(rng, 2, -5, 5));
    CHECK(out.rows() == 5);
    CHECK(out.cols() == 2);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(m.forward(Vec::Zero(1)), ArgumentError);
  CHECK_THROWS_AS(m.forward(Vec::Constant(2, NAN)), ArgumentError);
}

TEST_CASE("parameter vector round trip")
{
  ConnArchitecture arch;
  arch.hidden = {4, 4};
  const ConnModel a = ConnModel::initialize(arch, 5);
  ConnModel b = ConnModel::initialize(arch, 6);
  CHECK(a.parameters() != b.parameters());
  b.set_parameters(a.parameters());
  CHECK(a.parameters() == b.parameters());
  CHECK_THROWS_AS(b.set_parameters(Vec::Zero(3)), ArgumentError);
}

TEST_CASE("initialisation is seeded")
{
  ConnArchitecture arch;
  CHECK(ConnModel::initialize(arch, 9).parameters() == ConnModel::initialize(arch, 9).parameters());
  CHECK(ConnModel::initialize(arch, 9).parameters() != ConnModel::initialize(arch, 10).parameters());
}

TEST_CASE("activation names")
{
  for (Activation a : {Activation::kTanh, Activation::kRelu, Activation::kSoftplus})
    CHECK(parse_activation(activation_name(a)) == a);
  CHECK_THROWS_AS(parse_activation("sigmoid"), ArgumentError);
}

TEST_CASE("model files round-trip")
{
  ConnArchitecture arch;
  arch.hidden = {8, 6};
  arch.activation = Activation::kSoftplus;
  ConnModel m = ConnModel::initialize(arch, 21);
  m.set_train_config_hash(0x0123456789abcdefULL);
  const fs::path path = temp_file("roundtrip.model");
  save_model(m, path);
  const ConnModel back = load_model(path);
  CHECK(back.activation() == Activation::kSoftplus);
  CHECK(back.train_config_hash() == m.train_config_hash());
  CHECK(back.layer_sizes() == m.layer_sizes());
  CHECK(back.input_scale() == m.input_scale());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i)
  {
    const Vec x = random_vec(rng, 1, -10, 10);
    CHECK(back.forward(x) == m.forward(x));
  }
  save_model(back, temp_file("roundtrip2.model"));
  CHECK(slurp(path) == slurp(temp_file("roundtrip2.model")));

  const std::string text = slurp(path);
  {
    std::ofstream(temp_file("truncated.model"), std::ios::binary) << text.substr(0, text.size() - 40);
    CHECK_THROWS_AS(load_model(temp_file("truncated.model")), ParseError);
  }
  {
    std::string bad = text;
    bad.replace(bad.find("weights 0"), 9, "weights 7");
    std::ofstream(temp_file("corrupt.model"), std::ios::binary) << bad;
    CHECK_THROWS_AS(load_model(temp_file("corrupt.model")), ParseError);
  }
  {
    std::string v9 = text;
    v9.replace(v9.find("format_version: 1"), 17, "format_version: 9");
    std::ofstream(temp_file("v9.model"), std::ios::binary) << v9;
    CHECK_THROWS_AS(load_model(temp_file("v9.model")), FormatVersionError);
  }
  CHECK_THROWS_AS(load_model(temp_file("missing.model")), IoError);
}

TEST_CASE("prediction loss")
{
  Mat a(2, 1), b(2, 1);
  a << 1.0, 2.0;
  b << 1.5, 1.0;
  CHECK(loss_prediction(a, b) == doctest::Approx(0.625));
  CHECK(loss_prediction(a, a) == 0.0);
  CHECK_THROWS_AS(loss_prediction(a, Mat::Zero(3, 1)), ArgumentError);
}

TEST_CASE("Euler continuity loss by hand")
{
  Mat xw(2, 1), lam(2, 1);
  xw << 1.0, 0.9;
  lam << 0.5, 0.4;
  const ContinuityLoss l = loss_continuity(paper1d(), xw, lam, 0.05, StepScheme::kEuler, 1);
  CHECK_FALSE(l.diverged);
  CHECK(l.value == doctest::Approx(0.01125).epsilon(1e-12));
}

TEST_CASE("continuity loss vanishes on optimal windows")
{
  const Dataset ds = generate_dataset(paper1d(), -3.0, 3.0, 3);
  for (const TrajectoryPair &pair : ds.entries)
    for (const Window &w : windows(pair, 11))
    {
      const ContinuityLoss l = loss_continuity(paper1d(), w.x_window, w.lambda_window, ds.delta);
      CHECK(l.value <= 1e-4);
    }
}

TEST_CASE("continuity loss reports divergence")
{
  Mat xw(2, 1), lam(2, 1);
  xw << 1e200, 0.0;
  lam << 0.0, 0.0;
  const ContinuityLoss l = loss_continuity(paper1d(), xw, lam, 0.05);
  CHECK(l.diverged);
  CHECK(l.value >= kDivergencePenalty);
}

TEST_CASE("gradient matches central differences")
{
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 20; ++c)
  {
    const conn::testing::GradientCheck r = conn::testing::gradient_check(c, rng);
    INFO("config " << c);
    CHECK(r.parameters > 0);
    CHECK(r.mismatches == 0);
    CHECK(r.loss_gap <= 1e-12);
  }
}

TEST_CASE("zero continuity weight gives the prediction-only gradient")
{
  ConnArchitecture arch;
  arch.hidden = {5, 5};
  const ConnModel model = ConnModel::initialize(arch, 4);
  Window w;
  w.x_window = Mat::Random(11, 1);
  w.lambda_window = Mat::Random(11, 1);
  TrainConfig c0;
  c0.continuity_weight = 0.0;
  const Gradients g0 = gradients(model, paper1d(), w, c0);

  ForwardTrace trace;
  const Vec out = forward_traced(model, w.x_window.row(0).transpose(), trace);
  Vec target(11);
  for (int j = 0; j < 11; ++j)
    target[j] = w.lambda_window(j, 0);
  const Vec d = (2.0 / 11.0) * (out - target);
  std::vector<Mat> dw;
  std::vector<Vec> db;
  backpropagate(model, trace, d, dw, db);
  for (std::size_t l = 0; l < dw.size(); ++l)
  {
    CHECK((dw[l] - g0.weights[l]).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((db[l] - g0.biases[l]).cwiseAbs().maxCoeff() <= 1e-14);
  }
}
