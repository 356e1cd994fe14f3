#include <doctest.h>

#include <cmath>
#include <numeric>

#include "hgx/errors.hpp"
#include "hgx/train.hpp"
#include "oracles.hpp"

using namespace hgx;

namespace {

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_nodes = 200;
  s.num_classes = 3;
  s.num_hyperedges = 80;
  s.feature_dim = 6;
  s.train_per_class = 10;
  s.val_per_class = 10;
  s.seed = seed;
  return s;
}

ModelConfig quick(Variant v, std::size_t layers) {
  ModelConfig c;
  c.variant = v;
  c.num_layers = layers;
  c.hidden_dim = 8;
  c.epochs = 40;
  c.patience = 100;
  return c;
}

}  // namespace

TEST_CASE("accuracy: ties and simple cases") {
  DenseMatrix logits{{1, 1, 0}, {0, 2, 2}, {0, 0, 3}};
  std::vector<int> labels{0, 1, 2};
  std::vector<std::size_t> all{0, 1, 2};
  CHECK(accuracy(logits, labels, all) == 1.0);
  std::vector<int> second{1, 2, 2};
  CHECK(accuracy(logits, second, all) == doctest::Approx(1.0 / 3.0));
  std::vector<std::size_t> none;
  CHECK_THROWS_AS(accuracy(logits, labels, none), DataError);
}

TEST_CASE("accuracy: adversarial labels and random logits") {
  Rng rng(40);
  auto logits = oracle::to_dense(oracle::random_mat(rng, 500, 4));
  std::vector<int> wrong(500);
  std::vector<std::size_t> all(500);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < 500; ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < 4; ++j) arg = logits(i, j) > logits(i, arg) ? j : arg;
    wrong[i] = static_cast<int>((arg + 1) % 4);
  }
  CHECK(accuracy(logits, wrong, all) == 0.0);

  // Two classes, labels independent of the logits.
  auto coin = oracle::to_dense(oracle::random_mat(rng, 10000, 2));
  std::vector<int> labels(10000);
  std::vector<std::size_t> idx(10000);
  std::iota(idx.begin(), idx.end(), 0);
  for (auto& l : labels) l = static_cast<int>(rng.below(2));
  double acc = accuracy(coin, labels, idx);
  CHECK(acc > 0.45);
  CHECK(acc < 0.55);
}

TEST_CASE("mlp fits linearly separable features") {
  SyntheticSpec s = small_spec(1);
  s.separation = 8.0;
  s.noise = 0.5;
  auto ds = generate_synthetic(s);
  auto c = quick(Variant::mlp, 1);
  c.epochs = 100;
  c.dropout = 0.0;
  auto r = train(ds, c);
  REQUIRE(r.report.test_acc.has_value());
  CHECK(*r.report.test_acc >= 0.95);
}

TEST_CASE("graph models exploit a perfectly homophilous hypergraph") {
  SyntheticSpec s = small_spec(2);
  s.homophily = 1.0;
  s.noise = 0.0;
  s.separation = 10.0;
  auto ds = generate_synthetic(s);
  for (Variant v : {Variant::deep_hgcn, Variant::hgnn}) {
    auto r = train(ds, quick(v, 2));
    CHECK(*r.report.test_acc >= 0.99);
  }
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
  auto ds = generate_synthetic(small_spec(3));
  auto c = quick(Variant::deep_hgcn, 2);
  c.patience = 0;
  c.epochs = 200;
  auto r = train(ds, c);
  const auto& ep = r.report.epochs;
  REQUIRE(ep.size() >= 2);
  CHECK(r.report.stopped_early);
  CHECK(ep.size() < 200);
  CHECK(*ep.back().val_acc <= *ep[ep.size() - 2].val_acc);
  for (std::size_t i = 1; i + 1 < ep.size(); ++i) CHECK(*ep[i].val_acc > *ep[i - 1].val_acc);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto ds = generate_synthetic(small_spec(4));
  auto c = quick(Variant::deep_hgcn, 4);
  auto a = train(ds, c), b = train(ds, c);
  CHECK(a.report.to_json().dump() == b.report.to_json().dump());
  for (std::size_t t = 0; t < a.params.tensor_count(); ++t) CHECK(a.params.tensor(t) == b.params.tensor(t));
  CHECK_FALSE(a.report.to_json().contains("wall_seconds"));
  CHECK(a.report.to_json(true).contains("wall_seconds"));
  c.seed = 1;
  CHECK(train(ds, c).report.to_json().dump() != a.report.to_json().dump());
}

TEST_CASE("zero learning rate leaves the training loss unchanged") {
  auto ds = generate_synthetic(small_spec(5));
  ds.val_mask.clear();
  auto c = quick(Variant::hgnn, 2);
  c.learning_rate = 0.0;
  c.epochs = 10;
  c.patience = 3;
  auto r = train(ds, c);
  CHECK(r.report.signal == StopSignal::train_loss);
  for (const auto& e : r.report.epochs) CHECK(e.train_loss == r.report.epochs.front().train_loss);
  CHECK(r.report.best_epoch == 1);
  CHECK(r.report.epochs.size() == 5);
}

TEST_CASE("restored parameters reproduce the best signal") {
  auto ds = generate_synthetic(small_spec(6));
  auto c = quick(Variant::deep_hgcn, 3);
  c.epochs = 60;
  auto r = train(ds, c);
  double best = 0;
  for (const auto& e : r.report.epochs) best = std::max(best, *e.val_acc);
  CHECK(r.report.best_signal == best);
  CHECK(evaluate(r.params, ds, ds.val_mask, c) == best);
  CHECK(*r.report.epochs[r.report.best_epoch - 1].val_acc == best);
}

TEST_CASE("stratified splits") {
  auto ds = generate_synthetic(small_spec(7));
  auto splits = generate_splits(ds, 3, 9);
  REQUIRE(splits.size() == 3);
  for (const auto& s : splits) {
    CHECK(s.train.size() == 30);
    CHECK(s.val.size() == 30);
    CHECK(s.test.size() == 140);
    std::vector<int> per(3, 0);
    for (auto v : s.train) ++per[ds.labels[v]];
    CHECK(per == std::vector<int>{10, 10, 10});
    auto d = with_split(ds, s);
    CHECK_NOTHROW(d.validate());
  }
  CHECK(splits[0].train != splits[1].train);
  CHECK(generate_splits(ds, 3, 9)[2].test == splits[2].test);
}

TEST_CASE("depth sweep aggregates and is independent of the thread count") {
  auto ds = generate_synthetic(small_spec(8));
  auto c = quick(Variant::deep_hgcn, 2);
  c.epochs = 15;
  std::vector<std::size_t> depths{2, 4};
  SweepOptions o;
  o.num_splits = 3;
  o.split_seed = 5;
  o.jobs = 1;
  auto serial = depth_sweep(ds, depths, c, o);
  o.jobs = 4;
  auto parallel = depth_sweep(ds, depths, c, o);
  CHECK(serial.to_csv() == parallel.to_csv());
  CHECK(serial.to_json().dump() == parallel.to_json().dump());
  REQUIRE(serial.rows.size() == 2);
  CHECK(serial.runs.size() == 6);
  for (const auto& row : serial.rows) {
    REQUIRE(row.accuracies.size() == 3);
    double m = (row.accuracies[0] + row.accuracies[1] + row.accuracies[2]) / 3.0;
    double v = 0;
    for (double a : row.accuracies) v += (a - m) * (a - m);
    CHECK(row.mean == doctest::Approx(m).epsilon(1e-15));
    CHECK(row.std == doctest::Approx(std::sqrt(v / 3.0)).epsilon(1e-12));
  }
  CHECK(serial.runs[1].seed == c.seed + 1);

  SweepOptions single;
  auto one = depth_sweep(ds, std::vector<std::size_t>{3}, c, single);
  CHECK(one.dataset_splits);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].std == 0.0);
  auto direct = c;
  direct.num_layers = 3;
  CHECK(one.rows[0].mean == *train(ds, direct).report.test_acc);
}

TEST_CASE("energy probe: plain stacks collapse, initial residual keeps energy") {
  SyntheticSpec s = small_spec(9);
  auto ds = generate_synthetic(s);
  auto c = quick(Variant::hgnn, 32);
  c.dropout = 0.0;
  auto params = init_params(c, ds.feature_dim(), ds.num_classes, Rng(0));
  rescale_layer_weights(params, 0.9);
  for (const auto& w : params.layer_weights) CHECK(max_singular_value(w) == doctest::Approx(0.9).epsilon(1e-9));
  auto trace = energy_probe(params, ds, c);
  REQUIRE(trace.energies.size() == 33);
  CHECK(trace.energies.back() / trace.energies.front() < 1e-6);
  CHECK(trace.distances.size() == 33);

  auto d = quick(Variant::deep_hgcn, 32);
  d.alpha = 0.1;
  d.lambda_id = 0.5;
  auto dp = init_params(d, ds.feature_dim(), ds.num_classes, Rng(0));
  auto dt = energy_probe(dp, ds, d);
  CHECK(dt.energies.back() / dt.energies.front() > 1e-3);

  auto one = quick(Variant::hgnn, 1);
  auto op = init_params(one, ds.feature_dim(), ds.num_classes, Rng(0));
  CHECK(energy_probe(op, ds, one).layers == std::vector<std::size_t>{0, 1});
}

TEST_CASE("config json lists every hyperparameter") {
  auto j = config_to_json(ModelConfig{});
  for (const char* k : {"variant", "layers", "hidden", "alpha", "lambda_id", "dropout", "lr", "weight_decay", "epochs",
                        "patience", "seed", "precision", "activation"}) {
    CHECK(j.contains(k));
  }
  CHECK(j["variant"] == "deep-hgcn");
}
