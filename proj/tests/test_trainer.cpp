#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>
#include <vector>

#include "dmib/data.hpp"
#include "dmib/trainer.hpp"
#include "doctest.h"

using namespace dmib;

namespace {

// Gives params the gradient `coef` by differentiating sum(p * coef).
void set_grad(Tensor& p, const std::vector<double>& coef) {
  Tape tape;
  Tensor c(p.shape(), coef);
  tape.backward(sum(tape, mul(tape, p, c)));
}

MultimodalDataset prepped_synthetic(std::size_t n, std::uint64_t seed, std::size_t repeats = 1) {
  SyntheticSpec spec;
  spec.n_samples = n;
  spec.n_features = 6;
  spec.repeats = repeats;
  return gen_synthetic(spec, seed);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.backbone_hidden = {};
  cfg.feature_dim = 4;
  cfg.bottleneck = 0;
  cfg.k_folds = 2;
  return cfg;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.values().size() == b.values().size() &&
         std::memcmp(a.values().data(), b.values().data(),
                     a.values().size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("adam leaves parameters alone when nothing produced a gradient") {
    std::vector<NamedParam> params{{"p", Tensor(Shape{1, 3}, {0.5, -0.2, 0.8})}};
    const std::vector<double> before = params[0].tensor.values();
    AdamState st = init_adam(params);
    adam_step(params, st, TrainConfig{}, 0.01);
    CHECK(params[0].tensor.values() == before);
    CHECK(st.step == 1);
  }

  TEST_CASE("the first adam step moves each weight by about lr against the gradient") {
    std::vector<NamedParam> params{{"p", Tensor(Shape{1, 3}, {0.5, -0.2, 0.8})}};
    const std::vector<double> coef = {3.0, -2.0, 5.0};
    const std::vector<double> before = params[0].tensor.values();
    set_grad(params[0].tensor, coef);
    AdamState st = init_adam(params);
    adam_step(params, st, TrainConfig{}, 0.01);
    // bias correction makes m-hat = g and v-hat = g^2, so the step is
    // lr * g / (|g| + eps) = lr * sign(g) up to eps
    for (std::size_t j = 0; j < 3; ++j) {
      const double moved = params[0].tensor.values()[j] - before[j];
      CHECK(moved == doctest::Approx(-0.01 * (coef[j] > 0 ? 1.0 : -1.0)).epsilon(1e-6));
    }
  }

  TEST_CASE("a constant gradient walks the weight monotonically downhill") {
    std::vector<NamedParam> params{{"p", Tensor(Shape{1, 1}, {1.0})}};
    AdamState st = init_adam(params);
    const TrainConfig cfg;
    double prev = params[0].tensor.values()[0];
    for (int step = 0; step < 100; ++step) {
      set_grad(params[0].tensor, {2.0});
      adam_step(params, st, cfg, 1e-3);
      params[0].tensor.zero_grad();
      const double cur = params[0].tensor.values()[0];
      CHECK(cur < prev);
      prev = cur;
    }
    CHECK(st.step == 100);
  }

  TEST_CASE("a non-finite gradient aborts, naming the parameter and step") {
    std::vector<NamedParam> params{{"p", Tensor(Shape{1, 1}, {0.0})}};
    // finite forwards throughout, but the chained backward factors overflow
    Tape tape;
    Tensor huge1 = Tensor::full(Shape{1, 1}, 1e200);
    Tensor huge2 = Tensor::full(Shape{1, 1}, 1e200);
    Tensor y = mul(tape, mul(tape, params[0].tensor, huge1), huge2);
    tape.backward(sum(tape, y));
    REQUIRE(params[0].tensor.has_grad());
    AdamState st = init_adam(params);
    CHECK_THROWS_WITH_AS(adam_step(params, st, TrainConfig{}, 1e-3),
                         doctest::Contains("'p' at step 1"), TrainingError);
  }

  TEST_CASE("adam state must match the parameter list") {
    std::vector<NamedParam> one{{"a", Tensor(Shape{1, 1}, {1.0})}};
    std::vector<NamedParam> two{{"a", Tensor(Shape{1, 1}, {1.0})},
                                {"b", Tensor(Shape{1, 1}, {2.0})}};
    AdamState st = init_adam(one);
    CHECK_THROWS_AS(adam_step(two, st, TrainConfig{}, 1e-3), UsageError);
  }

  TEST_CASE("the learning-rate schedule decays linearly and floors at one percent") {
    CHECK(lr_schedule(1e-3, 0.01, 0, 70) == 1e-3);
    CHECK(lr_schedule(1e-3, 0.0, 69, 70) == 1e-3);
    CHECK(lr_schedule(1e-6, 0.01, 50, 70) == doctest::Approx(5e-7).epsilon(1e-12));
    // epoch 60 at decay 0.05 would go negative; the floor catches it
    CHECK(lr_schedule(1e-3, 0.05, 60, 70) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK_THROWS_AS(lr_schedule(1e-3, 0.01, 70, 70), ParameterError);
    CHECK_THROWS_AS(lr_schedule(0.0, 0.01, 0, 70), ParameterError);

    CHECK(lr_schedule(1e-3, 0.1, 3, 70, true) ==
          doctest::Approx(1e-3 * 0.9 * 0.9 * 0.9).epsilon(1e-12));
    // 0.9^44 < 0.01, so the multiplicative variant floors too
    CHECK(lr_schedule(1e-3, 0.1, 44, 70, true) == doctest::Approx(1e-5).epsilon(1e-12));
  }

  TEST_CASE("training configuration rejects out-of-range settings") {
    TrainConfig cfg = quick_config();
    CHECK_NOTHROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.k_folds = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.threshold = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("step counts follow the batching arithmetic") {
    // 16 rows, 2 folds of 8: training on the other fold is one 8-row batch
    MultimodalDataset small = prepped_synthetic(16, 21);
    SplitPlan plan = split_stratified(small.labels, 0.0, 2, 3);
    TrainConfig cfg = quick_config();
    FoldResult res = train_fold(small, plan, 0, cfg);
    REQUIRE(res.log.size() == 1);
    CHECK(res.log[0].steps == 1);
    CHECK(res.log[0].fold == 0);
    CHECK(res.log[0].lr == cfg.lr);

    // 18 rows split 10/8: training on the 10-row fold is a batch and a remainder
    MultimodalDataset bigger = prepped_synthetic(18, 22);
    SplitPlan plan9 = split_stratified(bigger.labels, 0.0, 2, 3);
    FoldResult res9 = train_fold(bigger, plan9, 1, cfg);
    CHECK(res9.log[0].steps == 2);

    CHECK_THROWS_AS(train_fold(small, plan, 5, cfg), UsageError);
  }

  TEST_CASE("every epoch is logged and the schedule shows up in the log") {
    MultimodalDataset ds = prepped_synthetic(16, 23);
    SplitPlan plan = split_stratified(ds.labels, 0.0, 2, 3);
    TrainConfig cfg = quick_config();
    cfg.epochs = 10;
    cfg.decay = 0.2;  // floors from epoch 5 on
    FoldResult res = train_fold(ds, plan, 0, cfg);
    REQUIRE(res.log.size() == 10);
    for (std::size_t e = 0; e < 10; ++e) {
      CHECK(res.log[e].epoch == e);
      CHECK(res.log[e].lr ==
            doctest::Approx(lr_schedule(cfg.lr, cfg.decay, e, 10)).epsilon(1e-15));
    }
    CHECK(res.log.back().lr == doctest::Approx(0.01 * cfg.lr).epsilon(1e-12));
    CHECK(res.val_auc == res.log.back().val_auc);
  }

  TEST_CASE("identical seeds reproduce the final weights bit for bit") {
    MultimodalDataset ds = prepped_synthetic(20, 24);
    SplitPlan plan = split_stratified(ds.labels, 0.0, 2, 9);
    TrainConfig cfg = quick_config();
    cfg.epochs = 3;
    FoldResult a = train_fold(ds, plan, 0, cfg);
    FoldResult b = train_fold(ds, plan, 0, cfg);
    REQUIRE(a.network.parameters().size() == b.network.parameters().size());
    for (std::size_t i = 0; i < a.network.parameters().size(); ++i) {
      CAPTURE(a.network.parameters()[i].name);
      CHECK(same_values(a.network.parameters()[i].tensor, b.network.parameters()[i].tensor));
    }
    CHECK(a.val_auc == b.val_auc);

    TrainConfig other = cfg;
    other.seed = cfg.seed + 1;
    FoldResult c = train_fold(ds, plan, 0, other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.network.parameters().size(); ++i)
      any_diff = any_diff || !same_values(a.network.parameters()[i].tensor,
                                          c.network.parameters()[i].tensor);
    CHECK(any_diff);
  }

  TEST_CASE("a single modality trains without modality masking") {
    SyntheticSpec spec;
    spec.n_samples = 16;
    spec.n_modalities = 1;
    spec.n_features = 6;
    MultimodalDataset ds = gen_synthetic(spec, 25);
    SplitPlan plan = split_stratified(ds.labels, 0.0, 2, 3);
    TrainConfig cfg = quick_config();
    FoldResult res = train_fold(ds, plan, 0, cfg);
    CHECK(res.log.size() == 1);
  }

  TEST_CASE("cross-validation selects the best final validation auc, ties to the lowest") {
    MultimodalDataset ds = prepped_synthetic(40, 26);
    SplitPlan plan = split_stratified(ds.labels, 0.2, 3, 4);
    TrainConfig cfg = quick_config();
    cfg.epochs = 2;
    cfg.k_folds = 3;
    CrossValResult cv = cross_validate(ds, plan, cfg);
    const RunRecord& rec = cv.record;
    REQUIRE(rec.fold_val_auc.size() == 3);
    REQUIRE(rec.selected_fold < 3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (i < rec.selected_fold) CHECK(rec.fold_val_auc[i] < rec.fold_val_auc[rec.selected_fold]);
      else CHECK(rec.fold_val_auc[i] <= rec.fold_val_auc[rec.selected_fold]);
    }
    CHECK(rec.epochs.size() == 3 * 2);  // folds x epochs
    CHECK(rec.plan_hash == plan.hash());
    CHECK(rec.flags == cfg.flags.describe());
    CHECK(rec.test.n_samples == plan.test.size());

    // the returned network is the selected fold's model
    FoldResult direct = train_fold(ds, plan, rec.selected_fold, cfg);
    for (std::size_t i = 0; i < direct.network.parameters().size(); ++i)
      CHECK(same_values(direct.network.parameters()[i].tensor,
                        cv.network.parameters()[i].tensor));
  }

  TEST_CASE("a one-fold plan validates on the training rows and still selects") {
    MultimodalDataset ds = prepped_synthetic(20, 27);
    SplitPlan plan = split_stratified(ds.labels, 0.2, 1, 5);
    TrainConfig cfg = quick_config();
    cfg.k_folds = 1;
    CrossValResult cv = cross_validate(ds, plan, cfg);
    CHECK(cv.record.fold_val_auc.size() == 1);
    CHECK(cv.record.selected_fold == 0);
  }

  TEST_CASE("a short run on separable data reaches a strong test auc") {
    MultimodalDataset ds = prepped_synthetic(80, 28);
    SplitPlan plan = split_stratified(ds.labels, 0.2, 2, 6);
    TrainConfig cfg = quick_config();
    cfg.lr = 1e-2;
    cfg.epochs = 40;
    cfg.k_folds = 2;
    cfg.backbone_hidden = {8};
    cfg.feature_dim = 8;
    CrossValResult cv = cross_validate(ds, plan, cfg);
    CHECK(cv.record.test.auc >= 0.9);
  }

  TEST_CASE("grouped evaluation reports one unit per group") {
    MultimodalDataset ds = prepped_synthetic(10, 29, /*repeats=*/3);
    REQUIRE(ds.n_samples() == 30);
    std::vector<std::size_t> input_dims = {6, 6};
    TrainConfig cfg = quick_config();
    DmibNetwork net(cfg.model_config(input_dims, 2), 1);
    std::vector<std::size_t> rows(ds.n_samples());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    MetricsReport rep = evaluate_rows(net, ds, rows);
    CHECK(rep.n_samples == 10);

    // grouped selection agrees with evaluating the aggregated scores directly
    const std::vector<double> probs = predict_scores(net, ds, rows);
    const double sel = grouped_selection_auc(probs, ds.labels, 2, ds.group_ids);
    CHECK(sel == doctest::Approx(rep.auc).epsilon(1e-12));
  }

  TEST_CASE("run records serialize with the plan hash and per-epoch step counts") {
    MultimodalDataset ds = prepped_synthetic(20, 30);
    SplitPlan plan = split_stratified(ds.labels, 0.2, 2, 8);
    TrainConfig cfg = quick_config();
    cfg.epochs = 2;
    CrossValResult cv = cross_validate(ds, plan, cfg);
    nlohmann::json j = cv.record.to_json();
    CHECK(j["plan_hash"].is_string());
    CHECK(j["plan_hash"].get<std::string>().substr(0, 2) == "0x");
    REQUIRE(j["epochs"].is_array());
    CHECK(j["epochs"].size() == 2 * 2);
    for (const auto& e : j["epochs"]) {
      CHECK(e.contains("steps"));
      CHECK(e.contains("lr"));
      CHECK(e["train"].contains("sufficiency"));
    }
    CHECK(j["flags"] == cfg.flags.describe());
  }

  TEST_CASE("the ablation grid runs its six fixed settings on one shared plan") {
    const bool expected[6][5] = {
        {true, false, false, false, false},
        {false, true, true, false, true},
        {true, true, true, false, true},
        {true, true, true, true, false},
        {true, true, false, true, true},
        {true, true, true, true, true},
    };
    for (int r = 0; r < 6; ++r) {
      const AblationFlags& f = kAblationRows[r];
      CHECK(f.loss_fused == expected[r][0]);
      CHECK(f.use_ib == expected[r][1]);
      CHECK(f.loss_distilled == expected[r][2]);
      CHECK(f.loss_sufficiency == expected[r][3]);
      CHECK(f.loss_modality == expected[r][4]);
      CHECK_NOTHROW(f.validate());
    }

    MultimodalDataset ds = prepped_synthetic(30, 31);
    SplitPlan plan = split_stratified(ds.labels, 0.2, 1, 2);
    TrainConfig cfg = quick_config();
    cfg.k_folds = 1;
    std::vector<AblationRun> runs = run_ablation(ds, plan, cfg);
    REQUIRE(runs.size() == 6);
    for (int r = 0; r < 6; ++r) {
      CHECK(runs[r].flags.describe() == kAblationRows[r].describe());
      CHECK(runs[r].record.plan_hash == plan.hash());
    }
    const std::string table = ablation_table(runs);
    CHECK(table.find("plan hash (shared)") != std::string::npos);
    CHECK(table.find("L_suff") != std::string::npos);
  }
}
