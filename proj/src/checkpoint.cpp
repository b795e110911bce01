#include "attnseg/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

using nlohmann::json;

namespace attnseg {

namespace {
constexpr char kMagic[8] = {'A', 'T', 'S', 'G', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, const nn::ParamList& params,
                     const CheckpointMeta& meta) {
  json header;
  header["config_hash"] = meta.config_hash;
  header["seed"] = meta.seed;
  header["epoch"] = meta.epoch;
  header["tensors"] = json::array();
  for (const auto& p : params)
    header["tensors"].push_back({{"name", p.name}, {"shape", p.var.value().shape()}});
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), (std::streamsize)htext.size());
  for (const auto& p : params) {
    const Tensor& t = p.var.value();
    out.write(reinterpret_cast<const char*>(t.data()),
              (std::streamsize)(t.size() * sizeof(Scalar)));
  }
  if (!out) throw IoError("short write for checkpoint " + path);

  json side;
  side["config_hash"] = meta.config_hash;
  side["seed"] = meta.seed;
  side["epoch"] = meta.epoch;
  side["tensor_count"] = params.size();
  std::ofstream sout(path + ".json");
  sout << side.dump(2) << "\n";
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path,
                                              CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), (std::streamsize)hlen);
  json header = json::parse(htext);
  if (meta) {
    meta->config_hash = header.at("config_hash").get<uint64_t>();
    meta->seed = header.at("seed").get<uint64_t>();
    meta->epoch = header.at("epoch").get<int>();
  }
  std::map<std::string, Tensor> out;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            (std::streamsize)(t.size() * sizeof(Scalar)));
    if (!in) throw IoError("truncated checkpoint " + path);
    out.emplace(name, std::move(t));
  }
  return out;
}

void restore_params(const std::map<std::string, Tensor>& stored, nn::ParamList& params) {
  for (auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw IoError("checkpoint missing tensor " + p.name);
    check_shape(it->second.same_shape(p.var.value()),
                "checkpoint shape mismatch for " + p.name);
    std::copy(it->second.data(), it->second.data() + it->second.size(),
              p.var.mutable_value().data());
  }
}

}  // namespace attnseg
