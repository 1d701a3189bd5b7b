#include "tubeground/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "tubeground/errors.hpp"
#include "tubeground/stvf.hpp"

namespace tubeground {

using nlohmann::json;

namespace {

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<Parameter*>& params,
                     const nn::AdamOptimizer* optimizer) {
  std::filesystem::create_directories(dir);
  json index;
  index["parameters"] = json::array();
  for (const Parameter* p : params) {
    const std::string file = sanitize(p->name) + ".stvf";
    stvf::write_tensor(p->value, dir / file);
    index["parameters"].push_back({{"name", p->name}, {"file", file}});
  }
  if (optimizer) {
    json opt;
    opt["step_count"] = optimizer->step_count();
    opt["learning_rate"] = optimizer->config().learning_rate;
    opt["beta1"] = optimizer->config().beta1;
    opt["beta2"] = optimizer->config().beta2;
    opt["epsilon"] = optimizer->config().epsilon;
    opt["moments"] = json::array();
    for (const auto& [name, m] : optimizer->moments()) {
      const std::string base = sanitize(name);
      stvf::write_tensor(m.first, dir / (base + ".m1.stvf"));
      stvf::write_tensor(m.second, dir / (base + ".m2.stvf"));
      opt["moments"].push_back({{"name", name},
                                {"first", base + ".m1.stvf"},
                                {"second", base + ".m2.stvf"}});
    }
    index["optimizer"] = std::move(opt);
  }
  std::ofstream os(dir / "checkpoint.json", std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint index in " + dir.string());
  os << index.dump(2) << "\n";
}

void load_checkpoint(const std::filesystem::path& dir,
                     const std::vector<Parameter*>& params,
                     nn::AdamOptimizer* optimizer) {
  std::ifstream is(dir / "checkpoint.json");
  if (!is) throw DataError("cannot open checkpoint index in " + dir.string());
  json index;
  try {
    is >> index;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad checkpoint index: ") + e.what());
  }
  std::map<std::string, std::string> files;
  for (const auto& e : index.at("parameters")) {
    files[e.at("name").get<std::string>()] = e.at("file").get<std::string>();
  }
  for (Parameter* p : params) {
    const auto it = files.find(p->name);
    if (it == files.end()) throw DataError("checkpoint lacks parameter " + p->name);
    Tensor t = stvf::read_tensor(dir / it->second);
    if (!t.same_shape(p->value)) {
      throw DataError("checkpoint shape mismatch for " + p->name + ": " + t.shape_str() +
                      " vs " + p->value.shape_str());
    }
    p->value = std::move(t);
    p->zero_grad();
  }
  if (optimizer && index.contains("optimizer")) {
    const json& opt = index.at("optimizer");
    std::map<std::string, nn::AdamOptimizer::MomentState> moments;
    for (const auto& e : opt.at("moments")) {
      nn::AdamOptimizer::MomentState m;
      m.first = stvf::read_tensor(dir / e.at("first").get<std::string>());
      m.second = stvf::read_tensor(dir / e.at("second").get<std::string>());
      moments[e.at("name").get<std::string>()] = std::move(m);
    }
    optimizer->restore(opt.at("step_count").get<std::int64_t>(), std::move(moments));
  }
}

}  // namespace tubeground
