#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dmib/checkpoint.hpp"
#include "dmib/commands.hpp"
#include "dmib/config.hpp"
#include "dmib/data.hpp"
#include "doctest.h"

using namespace dmib;
namespace fs = std::filesystem;

namespace {

fs::path tmp_base() {
  const auto dir = fs::temp_directory_path() / "dmib_cmd_tests";
  fs::create_directories(dir);
  return dir;
}

std::string fresh_dir(const std::string& name) {
  const auto dir = tmp_base() / name;
  fs::remove_all(dir);
  return dir.string();
}

std::string write_file(const std::string& name, const std::string& content) {
  const auto path = tmp_base() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json tiny_synth_config() {
  nlohmann::json root;
  root["seed"] = 7;
  root["data"]["synthetic"] = {{"n_samples", 30}, {"n_features", 6}};
  root["model"] = {{"feature_dim", 4}, {"hidden", nlohmann::json::array({6})}};
  root["train"] = {{"lr", 1e-3}, {"epochs", 2}, {"folds", 2}};
  return root;
}

}  // namespace

TEST_SUITE("commands") {
  TEST_CASE("unknown keys anywhere in the config are rejected by name") {
    auto bad = [](nlohmann::json j) { ExperimentConfig::from_json(j); };
    nlohmann::json base = tiny_synth_config();

    nlohmann::json j = base;
    j["trian"] = nlohmann::json::object();
    CHECK_THROWS_WITH_AS(bad(j), doctest::Contains("unknown key 'trian'"), ConfigError);

    j = base;
    j["data"]["labelz"] = "x";
    CHECK_THROWS_WITH_AS(bad(j), doctest::Contains("labelz"), ConfigError);

    j = base;
    j["data"]["synthetic"]["samples"] = 10;
    CHECK_THROWS_WITH_AS(bad(j), doctest::Contains("samples"), ConfigError);

    j = base;
    j["model"]["width"] = 3;
    CHECK_THROWS_WITH_AS(bad(j), doctest::Contains("width"), ConfigError);

    j = base;
    j["train"]["lrr"] = 0.1;
    CHECK_THROWS_WITH_AS(bad(j), doctest::Contains("lrr"), ConfigError);

    j = base;
    j["flags"] = {{"loss_fuse", true}};
    CHECK_THROWS_WITH_AS(bad(j), doctest::Contains("loss_fuse"), ConfigError);

    j = base;
    j["train"]["epochs"] = "many";
    CHECK_THROWS_AS(bad(j), ConfigError);
  }

  TEST_CASE("a config must name exactly one data source") {
    nlohmann::json both = tiny_synth_config();
    both["data"]["modalities"] = {"a.csv"};
    both["data"]["labels"] = "l.csv";
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(both), doctest::Contains("not both"),
                         ConfigError);

    nlohmann::json none;
    none["seed"] = 1;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(none), doctest::Contains("no data source"),
                         ConfigError);

    nlohmann::json tables;
    tables["data"]["modalities"] = {"a.csv"};
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(tables),
                         doctest::Contains("data.labels"), ConfigError);
  }

  TEST_CASE("noise and schedule settings are validated up front") {
    nlohmann::json j = tiny_synth_config();
    j["data"]["noise"] = {{"mode", "replace"}};  // no target
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(j), doctest::Contains("target"),
                         ConfigError);

    j = tiny_synth_config();
    j["data"]["noise"] = {{"mode", "sideways"}, {"target", "mod1"}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = tiny_synth_config();
    j["data"]["noise"] = {{"mode", "replace"}, {"target", "mod1"}, {"generator", "gaussian"}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = tiny_synth_config();
    j["train"]["decay_mode"] = "exponential";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    // noise seed defaults to the run seed and can be pinned separately
    j = tiny_synth_config();
    j["data"]["noise"] = {{"mode", "replace"}, {"target", "mod1"}};
    ExperimentConfig follows = ExperimentConfig::from_json(j);
    CHECK(follows.noise_seed == follows.seed);
    j["data"]["noise"]["seed"] = 123;
    ExperimentConfig pinned = ExperimentConfig::from_json(j);
    CHECK(pinned.noise_seed == 123);
  }

  TEST_CASE("overrides apply before parsing and are recorded in the resolved config") {
    const auto path = write_file("ovr_config.json", tiny_synth_config().dump());
    ExperimentConfig cfg =
        ExperimentConfig::load(path, {"train.lr=0.01", "model.feature_dim=8",
                                      "train.decay_mode=multiplicative"});
    CHECK(cfg.train.lr == 0.01);
    CHECK(cfg.train.feature_dim == 8);
    CHECK(cfg.train.multiplicative_decay);
    REQUIRE(cfg.overrides.size() == 3);
    CHECK(cfg.overrides[0] == "train.lr=0.01");
    CHECK(cfg.train.seed == cfg.seed);

    // the resolved document re-parses to the same resolved document
    ExperimentConfig again = ExperimentConfig::from_json(cfg.to_json());
    CHECK(again.to_json().dump() == cfg.to_json().dump());

    CHECK_THROWS_WITH_AS(ExperimentConfig::load(path, {"no_equals"}),
                         doctest::Contains("key=value"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::load(path, {"train.typo=1"}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::load(tmp_base().string() + "/absent.json", {}),
                    ConfigError);
    const auto broken = write_file("broken.json", "{ not json");
    CHECK_THROWS_WITH_AS(ExperimentConfig::load(broken, {}), doctest::Contains("invalid JSON"),
                         ConfigError);
  }

  TEST_CASE("gen-synth emits loadable tables, byte-identical per seed") {
    SyntheticSpec spec;
    spec.n_samples = 30;
    spec.n_features = 5;
    const std::string out1 = fresh_dir("synth1");
    const std::string out2 = fresh_dir("synth2");
    CHECK(run_gen_synth(spec, 11, out1) == 0);
    CHECK(run_gen_synth(spec, 11, out2) == 0);

    for (const char* name : {"mod0.csv", "mod1.csv", "labels.csv"}) {
      CAPTURE(name);
      REQUIRE(fs::exists(fs::path(out1) / name));
      CHECK(read_bytes((fs::path(out1) / name).string()) ==
            read_bytes((fs::path(out2) / name).string()));
    }

    MultimodalDataset direct = gen_synthetic(spec, 11);
    MultimodalDataset loaded =
        load_modalities({(fs::path(out1) / "mod0.csv").string(),
                         (fs::path(out1) / "mod1.csv").string()},
                        (fs::path(out1) / "labels.csv").string());
    CHECK(loaded.sample_ids == direct.sample_ids);
    CHECK(loaded.labels == direct.labels);
    CHECK(loaded.modalities[0].values == direct.modalities[0].values);
    CHECK(loaded.modalities[1].values == direct.modalities[1].values);
  }

  TEST_CASE("train writes its five artifacts and reruns byte-identically") {
    ExperimentConfig cfg = ExperimentConfig::from_json(tiny_synth_config());
    const std::string out1 = fresh_dir("train1");
    const std::string out2 = fresh_dir("train2");
    CHECK(run_train(cfg, out1) == 0);
    CHECK(run_train(cfg, out2) == 0);
    for (const char* name : {"resolved_config.json", "run_record.json", "metrics.txt",
                             "metrics.json", "checkpoint.bin"}) {
      CAPTURE(name);
      REQUIRE(fs::exists(fs::path(out1) / name));
      CHECK(read_bytes((fs::path(out1) / name).string()) ==
            read_bytes((fs::path(out2) / name).string()));
    }
    // no cache unless asked for
    CHECK(!fs::exists(fs::path(out1) / "dataset_cache.bin"));

    ExperimentConfig cached = cfg;
    cached.write_cache = true;
    const std::string out3 = fresh_dir("train3");
    CHECK(run_train(cached, out3) == 0);
    REQUIRE(fs::exists(fs::path(out3) / "dataset_cache.bin"));
    MultimodalDataset cache = load_cache((fs::path(out3) / "dataset_cache.bin").string());
    CHECK(cache.n_samples() == 30);  // the raw ingested dataset, pre-split
  }

  TEST_CASE("a failing run leaves no partial output directory behind") {
    nlohmann::json j;
    j["data"]["modalities"] = {(tmp_base() / "missing_mod.csv").string()};
    j["data"]["labels"] = (tmp_base() / "missing_labels.csv").string();
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    const std::string out = fresh_dir("failed_run");
    CHECK_THROWS_WITH_AS(run_train(cfg, out), doctest::Contains("missing_labels.csv"),
                         DataError);
    CHECK(!fs::exists(out));
  }

  TEST_CASE("the output stager cleans up everything it created, but only that") {
    const std::string fresh = fresh_dir("stager_fresh");
    {
      OutputStager stager(fresh);
      stager.write_text("a.txt", "hello");
      REQUIRE(fs::exists(fs::path(fresh) / "a.txt"));
      // no commit
    }
    CHECK(!fs::exists(fresh));

    const std::string kept = fresh_dir("stager_kept");
    fs::create_directories(kept);  // pre-existing directory stays
    {
      OutputStager stager(kept);
      stager.write_text("b.txt", "hello");
    }
    CHECK(fs::exists(kept));
    CHECK(!fs::exists(fs::path(kept) / "b.txt"));

    {
      OutputStager stager(fresh);
      stager.write_text("c.txt", "hello");
      stager.commit();
    }
    CHECK(fs::exists(fs::path(fresh) / "c.txt"));
  }

  TEST_CASE("checkpoints restore the model, preprocessing and metadata exactly") {
    SyntheticSpec spec;
    spec.n_samples = 20;
    spec.n_features = 5;
    MultimodalDataset ds = gen_synthetic(spec, 3);
    std::vector<std::size_t> all(ds.n_samples());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    Preprocessor pp = Preprocessor::fit(ds, all);
    MultimodalDataset prepped = pp.apply(ds);

    ModelConfig mc;
    mc.input_dims = {5, 5};
    mc.backbone_hidden = {4};
    mc.feature_dim = 4;
    mc.n_classes = 2;
    DmibNetwork net(mc, 99);

    const auto path = (tmp_base() / "model.ckpt").string();
    nlohmann::json extra;
    extra["note"] = "round-trip";
    save_checkpoint(path, net, pp, extra);
    LoadedCheckpoint lc = load_checkpoint(path);

    REQUIRE(lc.network.parameters().size() == net.parameters().size());
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      CHECK(lc.network.parameters()[i].name == net.parameters()[i].name);
      CHECK(lc.network.parameters()[i].tensor.values() == net.parameters()[i].tensor.values());
    }
    REQUIRE(lc.preprocessor.stats.size() == pp.stats.size());
    for (std::size_t m = 0; m < pp.stats.size(); ++m) {
      CHECK(lc.preprocessor.stats[m].name == pp.stats[m].name);
      CHECK(lc.preprocessor.stats[m].impute == pp.stats[m].impute);
      CHECK(lc.preprocessor.stats[m].zscore.mu == pp.stats[m].zscore.mu);
      CHECK(lc.preprocessor.stats[m].zscore.sigma == pp.stats[m].zscore.sigma);
    }
    CHECK(lc.meta["extra"]["note"] == "round-trip");

    auto batch = batch_tensors(prepped, {0, 1, 2, 3});
    CHECK(net.predict_proba(batch) == lc.network.predict_proba(batch));

    // identical inputs produce identical checkpoint bytes
    const auto path2 = (tmp_base() / "model2.ckpt").string();
    save_checkpoint(path2, net, pp, extra);
    CHECK(read_bytes(path) == read_bytes(path2));

    const auto junk = write_file("junk.ckpt", "not a checkpoint");
    CHECK_THROWS_AS(load_checkpoint(junk), DataError);
  }

  TEST_CASE("eval scores saved tables against a trained checkpoint") {
    ExperimentConfig cfg = ExperimentConfig::from_json(tiny_synth_config());
    const std::string train_out = fresh_dir("eval_train");
    REQUIRE(run_train(cfg, train_out) == 0);

    // export the same synthetic dataset as tables
    SyntheticSpec spec;
    spec.n_samples = 30;
    spec.n_features = 6;
    const std::string data_out = fresh_dir("eval_data");
    REQUIRE(run_gen_synth(spec, 7, data_out) == 0);

    const std::string out = fresh_dir("eval_out");
    const int rc = run_eval((fs::path(train_out) / "checkpoint.bin").string(),
                            {(fs::path(data_out) / "mod0.csv").string(),
                             (fs::path(data_out) / "mod1.csv").string()},
                            (fs::path(data_out) / "labels.csv").string(), out);
    CHECK(rc == 0);
    CHECK(fs::exists(fs::path(out) / "metrics.txt"));
    CHECK(fs::exists(fs::path(out) / "metrics.json"));
    const std::string text = read_bytes((fs::path(out) / "metrics.txt").string());
    CHECK(text.find("auc") != std::string::npos);
  }

  TEST_CASE("ablate writes the six-row grid with one shared plan") {
    nlohmann::json j = tiny_synth_config();
    j["train"]["epochs"] = 1;
    j["train"]["folds"] = 1;
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    const std::string out = fresh_dir("ablate_out");
    CHECK(run_ablate(cfg, out) == 0);
    REQUIRE(fs::exists(fs::path(out) / "ablation_table.txt"));
    REQUIRE(fs::exists(fs::path(out) / "ablation_records.json"));
    REQUIRE(fs::exists(fs::path(out) / "resolved_config.json"));

    nlohmann::json records;
    std::ifstream in(fs::path(out) / "ablation_records.json");
    in >> records;
    REQUIRE(records["rows"].size() == 6);
    const std::string shared = records["plan_hash"].get<std::string>();
    for (const auto& row : records["rows"]) {
      CHECK(row["record"]["plan_hash"].get<std::string>() == shared);
      CHECK(row["flags"].contains("use_ib"));
    }
    CHECK(records["rows"][0]["flags"]["loss_fused"] == true);
    CHECK(records["rows"][0]["flags"]["use_ib"] == false);
    CHECK(records["rows"][5]["flags"]["loss_sufficiency"] == true);
  }

  TEST_CASE("verification runs clean at a reduced trial count") {
    const std::string out = fresh_dir("verify_out");
    CHECK(run_verify(50, 4242, out) == 0);
    REQUIRE(fs::exists(fs::path(out) / "verify_report.txt"));
    const std::string text = read_bytes((fs::path(out) / "verify_report.txt").string());
    CHECK(text.find("PASS") != std::string::npos);
    CHECK(text.find("FAIL") == std::string::npos);
  }
}
