#include "dmib/checkpoint.hpp"

#include <fstream>

#include "dmib/serialize.hpp"

namespace dmib {

namespace {

constexpr char kMagic[] = "DMIBCKPT";
constexpr std::uint32_t kVersion = 1;

nlohmann::json model_json(const ModelConfig& mc) {
  return nlohmann::json{{"input_dims", mc.input_dims},
                        {"backbone_hidden", mc.backbone_hidden},
                        {"feature_dim", mc.feature_dim},
                        {"bottleneck", mc.bottleneck},
                        {"n_classes", mc.n_classes},
                        {"dropout", mc.dropout},
                        {"use_ib", mc.use_ib}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig mc;
  mc.input_dims = j.at("input_dims").get<std::vector<std::size_t>>();
  mc.backbone_hidden = j.at("backbone_hidden").get<std::vector<std::size_t>>();
  mc.feature_dim = j.at("feature_dim").get<std::size_t>();
  mc.bottleneck = j.at("bottleneck").get<std::size_t>();
  mc.n_classes = j.at("n_classes").get<std::size_t>();
  mc.dropout = j.at("dropout").get<double>();
  mc.use_ib = j.at("use_ib").get<bool>();
  return mc;
}

nlohmann::json preprocessor_json(const Preprocessor& pp) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& st : pp.stats)
    arr.push_back(nlohmann::json{{"name", st.name},
                                 {"impute", st.impute},
                                 {"mu", st.zscore.mu},
                                 {"sigma", st.zscore.sigma}});
  return arr;
}

Preprocessor preprocessor_from_json(const nlohmann::json& arr) {
  Preprocessor pp;
  for (const auto& j : arr) {
    Preprocessor::ModalityStats st;
    st.name = j.at("name").get<std::string>();
    st.impute = j.at("impute").get<std::vector<double>>();
    st.zscore.mu = j.at("mu").get<std::vector<double>>();
    st.zscore.sigma = j.at("sigma").get<std::vector<double>>();
    pp.stats.push_back(std::move(st));
  }
  return pp;
}

}  // namespace

void save_checkpoint(const std::string& path, const DmibNetwork& net, const Preprocessor& pp,
                     const nlohmann::json& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  nlohmann::json meta;
  meta["model"] = model_json(net.config());
  meta["preprocessor"] = preprocessor_json(pp);
  meta["extra"] = extra;
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_string(out, meta.dump());
  write_u64(out, net.parameters().size());
  for (const auto& p : net.parameters()) {
    write_string(out, p.name);
    const Shape& shape = p.tensor.shape();
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) write_u64(out, d);
    for (double v : p.tensor.values()) write_f64(out, v);
  }
  if (!out) throw DataError(path + ": write failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::string(magic, 8) != kMagic)
    throw DataError(path + ": not a checkpoint file");
  if (read_u32(in) != kVersion) throw DataError(path + ": unsupported checkpoint version");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_string(in));
  } catch (const std::exception& e) {
    throw DataError(path + ": corrupt metadata: " + e.what());
  }

  LoadedCheckpoint lc{DmibNetwork(model_from_json(meta.at("model")), 0),
                      preprocessor_from_json(meta.at("preprocessor")), meta};

  const std::uint64_t n_params = read_u64(in);
  if (n_params != lc.network.parameters().size())
    throw DataError(path + ": has " + std::to_string(n_params) + " parameter blocks, expected " +
                    std::to_string(lc.network.parameters().size()));
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = read_string(in);
    const std::uint32_t ndim = read_u32(in);
    Shape shape(ndim);
    for (auto& d : shape) d = read_u64(in);
    NamedParam* target = nullptr;
    for (auto& p : lc.network.parameters())
      if (p.name == name) target = &p;
    if (!target) throw DataError(path + ": unknown parameter block '" + name + "'");
    if (target->tensor.shape() != shape)
      throw DataError(path + ": parameter '" + name + "' has an unexpected shape");
    for (auto& v : target->tensor.mutable_values()) v = read_f64(in);
  }
  return lc;
}

}  // namespace dmib
