#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "sei/error.hpp"
#include "sei/rng.hpp"
#include "sei/trainer.hpp"
#include "support/reference_gradient.hpp"

using namespace sei;
using namespace sei::testing;

namespace {

EmbedderParams small_params(std::uint64_t seed, std::uint32_t buckets = 64, int dim = 8) {
  FeaturizerConfig cfg;
  cfg.min_n = 2;
  cfg.max_n = 3;
  cfg.hash_buckets = buckets;
  return make_random_params(cfg, dim, seed, 0.3);
}

const std::vector<std::string> kWords = {
    "river", "stone", "orbit", "lantern", "meadow", "cipher", "violet", "harbor",
    "ember", "quartz", "willow", "falcon", "tundra", "mosaic", "drift", "anchor",
};

std::string random_text(Rng& rng, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i > 0) out.push_back(' ');
    out += kWords[static_cast<std::size_t>(rng.below(kWords.size()))];
  }
  return out;
}

// Owns the strings the ContrastiveInstance views point into.
struct OwnedBatch {
  std::vector<std::string> storage;
  std::vector<ContrastiveInstance> instances;
};

OwnedBatch random_batch(Rng& rng, int instances, int negatives) {
  OwnedBatch batch;
  batch.storage.reserve(static_cast<std::size_t>(instances) * (3 + static_cast<std::size_t>(negatives)));
  for (int i = 0; i < instances; ++i) {
    const std::size_t base = batch.storage.size();
    batch.storage.push_back("Task " + std::to_string(i) + ": " + random_text(rng, 3));
    batch.storage.push_back(random_text(rng, 4));
    batch.storage.push_back(random_text(rng, 5));
    for (int j = 0; j < negatives; ++j) batch.storage.push_back(random_text(rng, 5));
    ContrastiveInstance inst;
    inst.instruction = batch.storage[base];
    inst.query = batch.storage[base + 1];
    inst.positive = batch.storage[base + 2];
    for (int j = 0; j < negatives; ++j) {
      inst.negatives.push_back(batch.storage[base + 3 + static_cast<std::size_t>(j)]);
    }
    batch.instances.push_back(std::move(inst));
  }
  return batch;
}

SyntheticExample planted_example(const std::string& query, const std::string& positive,
                                 const std::string& negative) {
  SyntheticExample ex;
  ex.query = query;
  ex.positive = positive;
  ex.negative = negative;
  ex.category = Category::kShortShort;
  ex.negative_origin = NegativeOrigin::kGenerated;
  return ex;
}

}  // namespace

TEST_CASE("loss is ln 2 when the positive and negative scores tie") {
  // positive text == negative text forces s+ == s- for any params.
  EmbedderParams p = small_params(11);
  ContrastiveInstance inst;
  inst.query = "quartz harbor anchor";
  inst.positive = "violet meadow stone";
  inst.negatives = {inst.positive};
  for (double tau : {0.05, 0.5, 1.0, 4.0}) {
    CHECK(contrastive_loss(p, inst, tau) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("k tied negatives give loss ln(1+k)") {
  EmbedderParams p = small_params(12);
  for (int k : {1, 2, 5, 9}) {
    ContrastiveInstance inst;
    inst.query = "ember lantern drift";
    inst.positive = "falcon tundra mosaic";
    for (int j = 0; j < k; ++j) inst.negatives.push_back(inst.positive);
    CHECK(contrastive_loss(p, inst, 0.7) ==
          doctest::Approx(std::log(1.0 + k)).epsilon(1e-12));
  }
}

TEST_CASE("closed form at s+=1, s-=0, tau=1") {
  // Identical query/positive strings give cosine exactly 1; an empty-feature
  // negative (whitespace) embeds to zero, similarity 0 by convention.
  EmbedderParams p = small_params(13);
  p.instruction_mode = InstructionMode::kIgnore;
  ContrastiveInstance inst;
  inst.query = "orbit cipher willow";
  inst.positive = "orbit cipher willow";  // cosine(q, p) == 1
  inst.negatives = {"   "};               // zero vector -> similarity 0
  const double expected = std::log(1.0 + std::exp(-1.0));  // 0.31326168751822286
  CHECK(contrastive_loss(p, inst, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("empty negative list is rejected") {
  EmbedderParams p = small_params(14);
  ContrastiveInstance inst;
  inst.query = "river";
  inst.positive = "stone";
  CHECK_THROWS_AS(contrastive_loss(p, inst, 1.0), ValidationError);
}

TEST_CASE("loss stays positive and decays as the positive pulls ahead") {
  EmbedderParams p = small_params(15);
  ContrastiveInstance inst;
  inst.query = "harbor ember quartz";
  inst.positive = "harbor ember quartz drift";
  inst.negatives = {"willow falcon tundra"};
  double previous = contrastive_loss(p, inst, 1.0);
  CHECK(previous > 0.0);
  // Shrinking tau amplifies s+/tau faster than s-/tau whenever s+ > s-,
  // so the loss must fall monotonically along the sweep.
  const double s_pos = similarity(embed(p, {}, inst.query), embed(p, {}, inst.positive));
  const double s_neg = similarity(embed(p, {}, inst.query), embed(p, {}, std::string(inst.negatives[0])));
  REQUIRE(s_pos > s_neg);
  for (double tau : {0.5, 0.25, 0.1, 0.05, 0.01, 0.002}) {
    const double l = contrastive_loss(p, inst, tau);
    CHECK(l > 0.0);
    CHECK(l < previous);
    previous = l;
  }
  CHECK(previous < 1e-10);
}

TEST_CASE("negative order does not change the loss") {
  EmbedderParams p = small_params(16);
  Rng rng(77);
  OwnedBatch batch = random_batch(rng, 1, 6);
  ContrastiveInstance inst = batch.instances[0];
  const double base = contrastive_loss(p, inst, 0.3);
  Rng shuffler(5);
  for (int trial = 0; trial < 10; ++trial) {
    shuffler.shuffle(inst.negatives);
    CHECK(contrastive_loss(p, inst, 0.3) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(2025);
  for (int trial = 0; trial < 20; ++trial) {
    EmbedderParams p = small_params(100 + static_cast<std::uint64_t>(trial));
    OwnedBatch batch = random_batch(rng, 4, 2);
    const double tau = 0.2 + rng.next_double() * 1.8;

    std::vector<double> analytic;
    loss_gradient(p, batch.instances, tau, analytic);
    const std::vector<double> fd = finite_difference_gradient(p, batch.instances, tau, 1e-5);
    CHECK(max_relative_error(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("analytic gradient matches the independent reference implementation") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    EmbedderParams p = small_params(300 + static_cast<std::uint64_t>(trial));
    OwnedBatch batch = random_batch(rng, 3, 2);
    std::vector<double> analytic;
    const double loss = loss_gradient(p, batch.instances, 0.8, analytic);
    const std::vector<double> ref = reference_gradient(p, batch.instances, 0.8);
    CHECK(max_relative_error(analytic, ref) < 1e-12);

    double ref_loss = 0.0;
    for (const auto& inst : batch.instances) ref_loss += reference_loss(p, inst, 0.8);
    CHECK(loss == doctest::Approx(ref_loss / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("positive == negative puts the gradient at the symmetric saddle") {
  EmbedderParams p = small_params(17);
  ContrastiveInstance inst;
  inst.query = "mosaic drift anchor";
  inst.positive = "lantern meadow cipher";
  inst.negatives = {"lantern meadow cipher"};
  std::vector<double> grad;
  loss_gradient(p, std::vector<ContrastiveInstance>{inst}, 1.0, grad);
  for (double g : grad) CHECK(std::abs(g) < 1e-14);
}

TEST_CASE("doubling tau equals halving the similarities before the softmax") {
  Rng rng(88);
  for (int trial = 0; trial < 5; ++trial) {
    EmbedderParams p = small_params(400 + static_cast<std::uint64_t>(trial));
    OwnedBatch batch = random_batch(rng, 3, 3);
    const double tau = 0.4 + rng.next_double();

    std::vector<double> analytic;
    loss_gradient(p, batch.instances, 2.0 * tau, analytic);
    // Independent path: the reference gradient scales similarities by 1/2
    // explicitly and keeps the original temperature.
    const std::vector<double> scaled = reference_gradient(p, batch.instances, tau, 0.5);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      worst = std::max(worst, std::abs(analytic[i] - scaled[i]));
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("training reduces the loss on a contrastable instance") {
  Dataset ds;
  ds.push_back(planted_example("river stone orbit", "river stone harbor", "violet quartz ember"));

  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.in_batch_negatives = false;
  cfg.epochs = 200;
  cfg.learning_rate = 0.05;
  cfg.warmup_steps = 0;
  cfg.weight_decay = 0.0;
  cfg.seed = 9;

  const EmbedderParams base = small_params(18, 256, 16);
  const TrainReport report = train(ds, base, cfg);
  REQUIRE(report.loss_curve.size() == 200);
  CHECK(report.loss_curve.back().second < report.loss_curve.front().second);
  CHECK(report.examples_seen == 200);
}

TEST_CASE("identical seeds reproduce the loss curve bit-for-bit") {
  Rng rng(55);
  Dataset ds;
  for (int i = 0; i < 24; ++i) {
    ds.push_back(planted_example(random_text(rng, 4), random_text(rng, 5), random_text(rng, 5)));
  }
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.seed = 1234;
  const EmbedderParams base = small_params(19, 128, 8);

  const TrainReport a = train(ds, base, cfg);
  const TrainReport b = train(ds, base, cfg);
  REQUIRE(a.loss_curve.size() == b.loss_curve.size());
  for (std::size_t i = 0; i < a.loss_curve.size(); ++i) {
    CHECK(a.loss_curve[i].first == b.loss_curve[i].first);
    CHECK(a.loss_curve[i].second == b.loss_curve[i].second);
  }
  CHECK(params_equal(a.final_params, b.final_params));

  TrainConfig other = cfg;
  other.seed = 4321;
  const TrainReport c = train(ds, base, other);
  CHECK(!params_equal(a.final_params, c.final_params));
}

TEST_CASE("planted corpus separates positives from negatives on held-out data") {
  // Positives share the query's marker token; negatives never do.
  Rng rng(66);
  auto make_planted = [&](int i) {
    const std::string marker = "zephyr" + std::to_string(i % 8);
    return planted_example("find " + marker + " " + random_text(rng, 2),
                           marker + " document " + random_text(rng, 2),
                           "unrelated " + random_text(rng, 3));
  };
  Dataset train_ds;
  for (int i = 0; i < 160; ++i) train_ds.push_back(make_planted(i));
  std::vector<SyntheticExample> held_out;
  for (int i = 0; i < 40; ++i) held_out.push_back(make_planted(i));

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 4;
  cfg.learning_rate = 0.05;
  cfg.warmup_steps = 20;
  cfg.seed = 7;

  FeaturizerConfig fcfg;
  fcfg.min_n = 3;
  fcfg.max_n = 4;
  fcfg.hash_buckets = 2048;
  const EmbedderParams base = make_random_params(fcfg, 24, 20, 0.05);
  const TrainReport report = train(train_ds, base, cfg);

  int margin_ok = 0;
  for (const auto& ex : held_out) {
    const auto q = embed(report.final_params, {}, ex.query);
    const double sp = similarity(q, embed(report.final_params, {}, ex.positive));
    const double sn = similarity(q, embed(report.final_params, {}, *ex.negative));
    margin_ok += sp > sn;
  }
  CHECK(margin_ok >= 38);  // >= 95% of 40
}

TEST_CASE("a lone trailing instance without negatives is skipped, not fatal") {
  // 5 examples, batch 4: the last batch holds one instance; without a stored
  // negative and with nothing in-batch to contrast against it is dropped.
  Rng rng(44);
  Dataset ds;
  for (int i = 0; i < 5; ++i) {
    auto ex = planted_example("query " + random_text(rng, 3) + " " + std::to_string(i),
                              "positive " + std::to_string(i), "negative " + std::to_string(i));
    ds.push_back(ex);
  }
  ds[4].negative.reset();
  ds[4].negative_origin = NegativeOrigin::kAbsent;

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.in_batch_negatives = true;
  cfg.epochs = 1;
  cfg.seed = 3;  // shuffle keeps index 4 last for this seed? examples_seen tells either way
  const TrainReport report = train(ds, small_params(22, 128, 8), cfg);
  CHECK(report.examples_seen >= 4);
  CHECK(report.examples_seen <= 5);
}

TEST_CASE("missing negatives are rejected when in-batch negatives are off") {
  Dataset ds;
  auto ex = planted_example("river stone", "orbit harbor", "x");
  ex.negative.reset();
  ex.negative_origin = NegativeOrigin::kAbsent;
  ds.push_back(ex);

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.in_batch_negatives = false;
  CHECK_THROWS_AS(train(ds, small_params(21), cfg), ValidationError);
}

TEST_CASE("config invariants") {
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.in_batch_negatives = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.in_batch_negatives = false;
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
