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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace conn;
namespace fs = std::filesystem;

namespace
{

  const Dataset &small_dataset()
  {
    static const Dataset ds = generate_dataset(paper1d(), -2.0, 2.0, 3);
    return ds;
  }

  ConnModel small_model(std::uint64_t seed = 1)
  {
    ConnArchitecture arch;
    arch.hidden = {8, 8};
    arch.activation = Activation::kRelu;
    return ConnModel::initialize(arch, seed);
  }

} // namespace

TEST_CASE("zero epochs leaves the model unchanged")
{
  const ConnModel m = small_model();
  TrainConfig cfg;
  cfg.n_epoch = 0;
  const TrainResult r = train(m, small_dataset(), paper1d(), cfg);
  CHECK(r.updates == 0);
  CHECK(r.log.empty());
  CHECK_FALSE(r.diverged);
  CHECK(r.model.parameters() == m.parameters());
}

TEST_CASE("one update per window and trajectory")
{
  TrainConfig cfg;
  cfg.n_epoch = 2;
  const TrainResult r = train(small_model(), small_dataset(), paper1d(), cfg);
  CHECK(r.updates == 2LL * 3 * (201 - 11));
  REQUIRE(r.log.size() == 2);
  CHECK(r.log[0].updates == 3 * 190);
  CHECK(r.log[1].updates == 3 * 190);
  CHECK(r.model.train_config_hash() == cfg.hash());
}

TEST_CASE("training is deterministic")
{
  TrainConfig cfg;
  cfg.n_epoch = 1;
  cfg.shuffle = true;
  cfg.seed = 77;
  const TrainResult a = train(small_model(), small_dataset(), paper1d(), cfg);
  const TrainResult b = train(small_model(), small_dataset(), paper1d(), cfg);
  CHECK(a.model.parameters() == b.model.parameters());
  CHECK(a.log[0].prediction == b.log[0].prediction);

  cfg.seed = 78;
  const TrainResult c = train(small_model(), small_dataset(), paper1d(), cfg);
  CHECK(c.model.parameters() != a.model.parameters());
}

TEST_CASE("loss decreases and the learning rate decays")
{
  TrainConfig cfg;
  cfg.n_epoch = 4;
  cfg.lr_decay = 0.5;
  const TrainResult r = train(small_model(), small_dataset(), paper1d(), cfg);
  REQUIRE(r.log.size() == 4);
  CHECK(r.log.back().prediction < r.log.front().prediction);
  CHECK(r.log[0].learning_rate == cfg.learning_rate);
  CHECK(r.log[3].learning_rate == doctest::Approx(cfg.learning_rate / 8));
  for (const EpochLog &e : r.log)
    CHECK(e.total == doctest::Approx(e.prediction + e.continuity));
}

TEST_CASE("exploding parameters are reported")
{
  TrainConfig cfg;
  cfg.n_epoch = 2;
  cfg.learning_rate = 1e300;
  const ConnModel m = small_model();
  const TrainResult r = train(m, small_dataset(), paper1d(), cfg);
  CHECK(r.diverged);
  CHECK(r.model.all_finite());
  CHECK(r.model.parameters() == m.parameters());
}

TEST_CASE("training input validation")
{
  TrainConfig cfg;
  cfg.n_epoch = -1;
  CHECK_THROWS_AS(train(small_model(), small_dataset(), paper1d(), cfg), ArgumentError);
  cfg = {};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.continuity_weight = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);

  ConnArchitecture arch;
  arch.horizon = 201;
  CHECK_THROWS_AS(train(ConnModel::initialize(arch, 0), small_dataset(), paper1d(), {}), ArgumentError);

  Dataset other = small_dataset();
  other.delta = 0.1;
  CHECK_THROWS_AS(train(small_model(), other, paper1d(), {}), ArgumentError);
  CHECK_THROWS_AS(train(small_model(), Dataset{}, paper1d(), {}), ArgumentError);
}

TEST_CASE("config hash tracks every field")
{
  TrainConfig a, b;
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
  b = a;
  b.continuity_weight = 0.0;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("loss log file")
{
  TrainConfig cfg;
  cfg.n_epoch = 1;
  const TrainResult r = train(small_model(), small_dataset(), paper1d(), cfg);
  const fs::path dir = fs::temp_directory_path() / "conn_unit_tests";
  fs::create_directories(dir);
  write_loss_log(r.log, cfg.continuity_weight, dir / "loss.csv");
  std::ifstream in(dir / "loss.csv");
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "epoch,prediction_loss,continuity_loss,total_loss,continuity_weight,learning_rate,updates");
  CHECK(row.rfind("0,", 0) == 0);
  CHECK(row.substr(row.rfind(',') + 1) == "570");
  CHECK_FALSE(std::getline(in, extra));
}
