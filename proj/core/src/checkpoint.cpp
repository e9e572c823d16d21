// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ghostlab/gtf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ghostlab {

namespace {

json config_to_json(const DynGhostConfig& c) {
  return json{{"T", c.T},
              {"M", c.M},
              {"H", c.H},
              {"W", c.W},
              {"embed_dim", c.embed_dim},
              {"heads", c.heads},
              {"block_layout", c.block_layout},
              {"mlp_hidden", c.mlp_hidden},
              {"head_hidden", c.head_hidden},
              {"use_temporal_pe", c.use_temporal_pe}};
}

DynGhostConfig config_from_json(const json& j) {
  DynGhostConfig c;
  c.T = j.at("T").get<int64_t>();
  c.M = j.at("M").get<int64_t>();
  c.H = j.at("H").get<int64_t>();
  c.W = j.at("W").get<int64_t>();
  c.embed_dim = j.at("embed_dim").get<int64_t>();
  c.heads = j.at("heads").get<int64_t>();
  c.block_layout = j.at("block_layout").get<std::string>();
  c.mlp_hidden = j.at("mlp_hidden").get<int64_t>();
  c.head_hidden = j.at("head_hidden").get<int64_t>();
  c.use_temporal_pe = j.at("use_temporal_pe").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["config"] = config_to_json(ck.config);
  manifest["step"] = ck.step;
  manifest["optimizer"] = {{"lr", ck.optimizer.lr},
                           {"beta1", ck.optimizer.beta1},
                           {"beta2", ck.optimizer.beta2},
                           {"eps", ck.optimizer.eps},
                           {"weight_decay", ck.optimizer.weight_decay}};
  manifest["loss_weights"] = {{"mse", ck.loss.mse},
                              {"ssim", ck.loss.ssim},
                              {"temporal", ck.loss.temporal}};
  manifest["normalizer"] = json::parse(ck.normalizer.serialize_json());

  json names = json::array();
  for (size_t i = 0; i < ck.params.size(); ++i) {
    const std::string& name = ck.params.name(i);
    names.push_back(name);
    save_tensor(ck.params.tensor(i), (fs::path(dir) / (name + ".gtf")).string());
  }
  manifest["params"] = names;

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("checkpoint: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("checkpoint: missing manifest.json in " + dir);
  json manifest = json::parse(in);

  Checkpoint ck;
  ck.config = config_from_json(manifest.at("config"));
  ck.step = manifest.at("step").get<int64_t>();
  const auto& opt = manifest.at("optimizer");
  ck.optimizer.lr = opt.at("lr").get<double>();
  ck.optimizer.beta1 = opt.at("beta1").get<double>();
  ck.optimizer.beta2 = opt.at("beta2").get<double>();
  ck.optimizer.eps = opt.at("eps").get<double>();
  ck.optimizer.weight_decay = opt.at("weight_decay").get<double>();
  const auto& lw = manifest.at("loss_weights");
  ck.loss.mse = lw.at("mse").get<double>();
  ck.loss.ssim = lw.at("ssim").get<double>();
  ck.loss.temporal = lw.at("temporal").get<double>();
  ck.normalizer = Normalizer::from_json(manifest.at("normalizer").dump());

  for (const auto& name : manifest.at("params")) {
    const std::string n = name.get<std::string>();
    ck.params.add(n, load_tensor((fs::path(dir) / (n + ".gtf")).string()));
  }
  return ck;
}

}  // namespace ghostlab
