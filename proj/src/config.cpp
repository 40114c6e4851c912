#include "dmib/config.hpp"

#include <fstream>
#include <string_view>

namespace dmib {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto a : allowed) known = known || it.key() == a;
    if (!known)
      throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

std::string at(const char* where, const char* key) { return std::string(where) + "." + key; }

double get_num(const json& j, const char* where, const char* key, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) throw ConfigError(at(where, key) + ": expected a number");
  return j[key].get<double>();
}

std::uint64_t get_uint(const json& j, const char* where, const char* key, std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  const auto& v = j[key];
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0))
    throw ConfigError(at(where, key) + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

long get_int(const json& j, const char* where, const char* key, long dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number_integer()) throw ConfigError(at(where, key) + ": expected an integer");
  return j[key].get<long>();
}

bool get_bool(const json& j, const char* where, const char* key, bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_boolean()) throw ConfigError(at(where, key) + ": expected true or false");
  return j[key].get<bool>();
}

std::string get_str(const json& j, const char* where, const char* key, const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_string()) throw ConfigError(at(where, key) + ": expected a string");
  return j[key].get<std::string>();
}

void apply_override(json& root, const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + expr + "' is not key=value");
  const std::string keypath = expr.substr(0, eq);
  const std::string raw = expr.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (...) {
    value = raw;  // unquoted strings pass through verbatim
  }
  json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const auto dot = keypath.find('.', pos);
    const std::string part =
        dot == std::string::npos ? keypath.substr(pos) : keypath.substr(pos, dot - pos);
    if (part.empty()) throw ConfigError("override '" + expr + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object())
      throw ConfigError("override '" + expr + "': '" + part + "' is not a section");
    node = &next;
    pos = dot + 1;
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& override_exprs) {
  json root = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    try {
      root = json::parse(in);
    } catch (const std::exception& e) {
      throw ConfigError(path + ": invalid JSON: " + std::string(e.what()));
    }
  }
  for (const auto& o : override_exprs) apply_override(root, o);
  root["overrides"] = override_exprs;
  return from_json(root);
}

ExperimentConfig ExperimentConfig::from_json(const json& root) {
  check_keys(root, "config", {"seed", "overrides", "data", "model", "train", "flags"});
  ExperimentConfig cfg;
  cfg.seed = get_uint(root, "config", "seed", 42);
  if (root.contains("overrides")) {
    if (!root["overrides"].is_array())
      throw ConfigError("config.overrides: expected an array of strings");
    for (const auto& o : root["overrides"]) {
      if (!o.is_string()) throw ConfigError("config.overrides: expected an array of strings");
      cfg.overrides.push_back(o.get<std::string>());
    }
  }

  if (root.contains("data")) {
    const json& d = root["data"];
    check_keys(d, "data", {"modalities", "labels", "synthetic", "noise", "cache"});
    if (d.contains("modalities")) {
      if (!d["modalities"].is_array()) throw ConfigError("data.modalities: expected an array");
      for (const auto& p : d["modalities"]) {
        if (!p.is_string()) throw ConfigError("data.modalities: expected file path strings");
        cfg.modality_paths.push_back(p.get<std::string>());
      }
    }
    cfg.labels_path = get_str(d, "data", "labels", "");
    cfg.write_cache = get_bool(d, "data", "cache", false);
    if (d.contains("synthetic")) {
      const json& s = d["synthetic"];
      check_keys(s, "data.synthetic",
                 {"n_samples", "n_modalities", "n_features", "informative", "classes",
                  "separation", "noise_floor", "repeats"});
      cfg.use_synthetic = true;
      cfg.synthetic.n_samples = get_uint(s, "data.synthetic", "n_samples", 500);
      cfg.synthetic.n_modalities = get_uint(s, "data.synthetic", "n_modalities", 2);
      cfg.synthetic.n_features = get_uint(s, "data.synthetic", "n_features", 10);
      cfg.synthetic.informative = get_int(s, "data.synthetic", "informative", 0);
      cfg.synthetic.n_classes = get_uint(s, "data.synthetic", "classes", 2);
      cfg.synthetic.separation = get_num(s, "data.synthetic", "separation", 5.0);
      cfg.synthetic.noise_floor = get_num(s, "data.synthetic", "noise_floor", 1.0);
      cfg.synthetic.repeats = get_uint(s, "data.synthetic", "repeats", 1);
    }
    if (d.contains("noise")) {
      const json& n = d["noise"];
      check_keys(n, "data.noise",
                 {"mode", "target", "name", "features", "generator", "lo", "hi", "seed"});
      cfg.has_noise = true;
      const std::string mode = get_str(n, "data.noise", "mode", "replace");
      if (mode != "replace" && mode != "append")
        throw ConfigError("data.noise.mode: expected 'replace' or 'append'");
      cfg.noise.append = mode == "append";
      cfg.noise.target = get_str(n, "data.noise", "target", "");
      cfg.noise.name = get_str(n, "data.noise", "name", "noise");
      cfg.noise.n_features = get_uint(n, "data.noise", "features", 1);
      const std::string gen = get_str(n, "data.noise", "generator", "integer-uniform");
      if (gen != "integer-uniform" && gen != "real-uniform")
        throw ConfigError("data.noise.generator: expected 'integer-uniform' or 'real-uniform'");
      cfg.noise.integer = gen == "integer-uniform";
      cfg.noise.lo = get_num(n, "data.noise", "lo", 0.0);
      cfg.noise.hi = get_num(n, "data.noise", "hi", 100.0);
      cfg.noise_seed = get_uint(n, "data.noise", "seed", cfg.seed);
    } else {
      cfg.noise_seed = cfg.seed;
    }
  } else {
    cfg.noise_seed = cfg.seed;
  }

  if (root.contains("model")) {
    const json& m = root["model"];
    check_keys(m, "model", {"hidden", "feature_dim", "bottleneck", "dropout"});
    if (m.contains("hidden")) {
      if (!m["hidden"].is_array()) throw ConfigError("model.hidden: expected an array");
      for (const auto& h : m["hidden"]) {
        if (!h.is_number_integer() || h.get<std::int64_t>() <= 0)
          throw ConfigError("model.hidden: expected positive integers");
        cfg.train.backbone_hidden.push_back(h.get<std::size_t>());
      }
    }
    cfg.train.feature_dim = get_uint(m, "model", "feature_dim", 16);
    cfg.train.bottleneck = get_uint(m, "model", "bottleneck", 0);
    cfg.train.dropout = get_num(m, "model", "dropout", 0.5);
  }

  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train",
               {"lr", "decay", "decay_mode", "batch_size", "epochs", "adam_beta1", "adam_beta2",
                "adam_eps", "alpha", "beta", "sufficiency_stop_fused", "modality_loss_on_masked",
                "test_frac", "folds", "threshold"});
    cfg.train.lr = get_num(t, "train", "lr", 1e-6);
    cfg.train.decay = get_num(t, "train", "decay", 1e-2);
    const std::string mode = get_str(t, "train", "decay_mode", "linear");
    if (mode != "linear" && mode != "multiplicative")
      throw ConfigError("train.decay_mode: expected 'linear' or 'multiplicative'");
    cfg.train.multiplicative_decay = mode == "multiplicative";
    cfg.train.batch_size = get_uint(t, "train", "batch_size", 8);
    cfg.train.epochs = get_uint(t, "train", "epochs", 70);
    cfg.train.adam_beta1 = get_num(t, "train", "adam_beta1", 0.9);
    cfg.train.adam_beta2 = get_num(t, "train", "adam_beta2", 0.999);
    cfg.train.adam_eps = get_num(t, "train", "adam_eps", 1e-8);
    cfg.train.weights.alpha = get_num(t, "train", "alpha", 1.0);
    cfg.train.weights.beta = get_num(t, "train", "beta", 10.0);
    cfg.train.weights.sufficiency_stop_fused =
        get_bool(t, "train", "sufficiency_stop_fused", false);
    cfg.train.weights.modality_loss_on_masked =
        get_bool(t, "train", "modality_loss_on_masked", false);
    cfg.train.test_frac = get_num(t, "train", "test_frac", 0.2);
    cfg.train.k_folds = get_uint(t, "train", "folds", 5);
    cfg.train.threshold = get_num(t, "train", "threshold", 0.5);
  }

  if (root.contains("flags")) {
    const json& f = root["flags"];
    check_keys(f, "flags",
               {"loss_fused", "use_ib", "loss_distilled", "loss_sufficiency", "loss_modality"});
    cfg.train.flags.loss_fused = get_bool(f, "flags", "loss_fused", true);
    cfg.train.flags.use_ib = get_bool(f, "flags", "use_ib", true);
    cfg.train.flags.loss_distilled = get_bool(f, "flags", "loss_distilled", true);
    cfg.train.flags.loss_sufficiency = get_bool(f, "flags", "loss_sufficiency", true);
    cfg.train.flags.loss_modality = get_bool(f, "flags", "loss_modality", true);
  }

  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (use_synthetic && !modality_paths.empty())
    throw ConfigError("config: give either data.modalities or data.synthetic, not both");
  if (!use_synthetic) {
    if (modality_paths.empty())
      throw ConfigError("config: no data source; set data.modalities or data.synthetic");
    if (labels_path.empty()) throw ConfigError("config: data.labels is required with tables");
  } else {
    synthetic.validate();
  }
  if (has_noise && !noise.append && noise.target.empty())
    throw ConfigError("config: data.noise.target is required in replace mode");
  train.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  json root;
  root["seed"] = seed;
  root["overrides"] = overrides;
  json d;
  if (use_synthetic) {
    d["synthetic"] = json{{"n_samples", synthetic.n_samples},
                          {"n_modalities", synthetic.n_modalities},
                          {"n_features", synthetic.n_features},
                          {"informative", synthetic.informative},
                          {"classes", synthetic.n_classes},
                          {"separation", synthetic.separation},
                          {"noise_floor", synthetic.noise_floor},
                          {"repeats", synthetic.repeats}};
  } else {
    d["modalities"] = modality_paths;
    d["labels"] = labels_path;
  }
  if (has_noise)
    d["noise"] = json{{"mode", noise.append ? "append" : "replace"},
                      {"target", noise.target},
                      {"name", noise.name},
                      {"features", noise.n_features},
                      {"generator", noise.integer ? "integer-uniform" : "real-uniform"},
                      {"lo", noise.lo},
                      {"hi", noise.hi},
                      {"seed", noise_seed}};
  d["cache"] = write_cache;
  root["data"] = std::move(d);
  root["model"] = json{{"hidden", train.backbone_hidden},
                       {"feature_dim", train.feature_dim},
                       {"bottleneck", train.bottleneck},
                       {"dropout", train.dropout}};
  root["train"] = json{{"lr", train.lr},
                       {"decay", train.decay},
                       {"decay_mode", train.multiplicative_decay ? "multiplicative" : "linear"},
                       {"batch_size", train.batch_size},
                       {"epochs", train.epochs},
                       {"adam_beta1", train.adam_beta1},
                       {"adam_beta2", train.adam_beta2},
                       {"adam_eps", train.adam_eps},
                       {"alpha", train.weights.alpha},
                       {"beta", train.weights.beta},
                       {"sufficiency_stop_fused", train.weights.sufficiency_stop_fused},
                       {"modality_loss_on_masked", train.weights.modality_loss_on_masked},
                       {"test_frac", train.test_frac},
                       {"folds", train.k_folds},
                       {"threshold", train.threshold}};
  root["flags"] = json{{"loss_fused", train.flags.loss_fused},
                       {"use_ib", train.flags.use_ib},
                       {"loss_distilled", train.flags.loss_distilled},
                       {"loss_sufficiency", train.flags.loss_sufficiency},
                       {"loss_modality", train.flags.loss_modality}};
  return root;
}

MultimodalDataset ExperimentConfig::build_dataset() const {
  MultimodalDataset ds;
  if (use_synthetic) {
    ds = gen_synthetic(synthetic, seed);
  } else {
    LoadReport report;
    ds = load_modalities(modality_paths, labels_path, &report);
  }
  if (has_noise) ds = inject_noise_channel(ds, noise, noise_seed);
  return ds;
}

}  // namespace dmib
