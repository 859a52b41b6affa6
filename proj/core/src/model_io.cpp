#include "maligan/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "maligan/recurrent_generator.hpp"
#include "maligan/tabular_generator.hpp"

namespace maligan {

void save_model(const std::string& prefix, const Generator& gen) {
  nlohmann::json meta;
  if (const auto* tab = dynamic_cast<const TabularGenerator*>(&gen)) {
    meta["kind"] = "tabular";
    meta["alphabet"] = tab->alphabet();
    meta["length"] = tab->max_len();
    meta["order"] = tab->order();
  } else if (const auto* rec = dynamic_cast<const RecurrentGenerator*>(&gen)) {
    const auto& o = rec->options();
    meta["kind"] = "recurrent";
    meta["vocab"] = o.vocab;
    meta["embed"] = o.embed;
    meta["hidden"] = o.hidden;
    meta["max_len"] = o.max_len;
    meta["use_eos"] = o.use_eos;
  } else {
    throw std::invalid_argument("save_model: unknown generator kind");
  }
  std::ofstream out(prefix + ".json");
  if (!out) throw std::runtime_error("save_model: cannot open " + prefix + ".json");
  out << meta.dump(2) << '\n';
  gen.params().save(prefix + ".ckpt");
}

std::unique_ptr<Generator> load_model(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw std::runtime_error("load_model: cannot open " + prefix + ".json");
  nlohmann::json meta = nlohmann::json::parse(in);
  std::unique_ptr<Generator> gen;
  const std::string kind = meta.at("kind");
  if (kind == "tabular") {
    gen = std::make_unique<TabularGenerator>(meta.at("alphabet").get<std::size_t>(),
                                             meta.at("length").get<std::size_t>(),
                                             meta.at("order").get<std::size_t>());
  } else if (kind == "recurrent") {
    RecurrentGenerator::Options o;
    o.vocab = meta.at("vocab").get<std::size_t>();
    o.embed = meta.at("embed").get<std::size_t>();
    o.hidden = meta.at("hidden").get<std::size_t>();
    o.max_len = meta.at("max_len").get<std::size_t>();
    o.use_eos = meta.at("use_eos").get<bool>();
    gen = std::make_unique<RecurrentGenerator>(o);
  } else {
    throw std::runtime_error("load_model: unknown kind '" + kind + "'");
  }
  gen->params().load(prefix + ".ckpt");
  return gen;
}

}  // namespace maligan
