#include "fmn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fmn/errors.hpp"

namespace fmn {

using nlohmann::ordered_json;

ordered_json attack_config_to_json(const AttackConfig& cfg) {
  ordered_json j;
  j["loss"] = std::string(to_string(cfg.loss));
  j["alpha0"] = cfg.alpha0;
  j["iterations"] = cfg.iterations;
  j["gamma0"] = cfg.gamma0;
  j["gamma_min"] = cfg.gamma_min;

  const auto& o = cfg.optimizer;
  j["optimizer.kind"] = std::string(to_string(o.kind));
  j["optimizer.weight_decay"] = o.weight_decay;
  if (o.kind == OptimizerKind::SGD) {
    j["optimizer.momentum"] = o.momentum;
    j["optimizer.dampening"] = o.dampening;
    j["optimizer.nesterov"] = o.nesterov;
  } else {
    j["optimizer.beta1"] = o.beta1;
    j["optimizer.beta2"] = o.beta2;
    j["optimizer.eps"] = o.eps;
    j["optimizer.amsgrad"] = o.amsgrad;
  }

  const auto& s = cfg.scheduler;
  j["scheduler.kind"] = std::string(to_string(s.kind));
  switch (s.kind) {
    case SchedulerKind::CALR:
      j["scheduler.t_max"] = s.t_max;
      j["scheduler.eta_min"] = s.eta_min;
      break;
    case SchedulerKind::CAWR:
      j["scheduler.t_0"] = s.t_0;
      j["scheduler.t_mult"] = s.t_mult;
      j["scheduler.eta_min"] = s.eta_min;
      break;
    case SchedulerKind::MSLR:
      j["scheduler.milestones"] = s.milestones;
      j["scheduler.gamma"] = s.gamma;
      break;
    case SchedulerKind::RLROP:
      j["scheduler.factor"] = s.factor;
      j["scheduler.patience"] = s.patience;
      j["scheduler.threshold"] = s.threshold;
      break;
  }
  return j;
}

namespace {

double get_number(const ordered_json& v, const std::string& key) {
  if (!v.is_number()) throw ParseError(key, "expected number");
  return v.get<double>();
}

std::int64_t get_integer(const ordered_json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ParseError(key, "expected integer");
  return v.get<std::int64_t>();
}

bool get_bool(const ordered_json& v, const std::string& key) {
  if (!v.is_boolean()) throw ParseError(key, "expected true/false");
  return v.get<bool>();
}

std::string get_string(const ordered_json& v, const std::string& key) {
  if (!v.is_string()) throw ParseError(key, "expected string");
  return v.get<std::string>();
}

}  // namespace

AttackConfig attack_config_from_json(const ordered_json& doc) {
  if (!doc.is_object()) throw ParseError("$", "config must be an object");
  AttackConfig cfg;
  // Kinds first: they select defaults for the nested parameters.
  if (doc.contains("optimizer.kind")) {
    cfg.optimizer.kind = parse_optimizer_kind(get_string(doc["optimizer.kind"], "optimizer.kind"));
  }
  if (doc.contains("scheduler.kind")) {
    cfg.scheduler.kind = parse_scheduler_kind(get_string(doc["scheduler.kind"], "scheduler.kind"));
  }

  for (const auto& [key, v] : doc.items()) {
    if (key.rfind("meta.", 0) == 0 || key == "optimizer.kind" || key == "scheduler.kind") continue;
    auto& o = cfg.optimizer;
    auto& s = cfg.scheduler;
    if (key == "loss") cfg.loss = parse_loss_kind(get_string(v, key));
    else if (key == "alpha0") cfg.alpha0 = get_number(v, key);
    else if (key == "iterations") cfg.iterations = get_integer(v, key);
    else if (key == "gamma0") cfg.gamma0 = get_number(v, key);
    else if (key == "gamma_min") cfg.gamma_min = get_number(v, key);
    else if (key == "optimizer.weight_decay") o.weight_decay = get_number(v, key);
    else if (key == "optimizer.momentum") o.momentum = get_number(v, key);
    else if (key == "optimizer.dampening") o.dampening = get_number(v, key);
    else if (key == "optimizer.nesterov") o.nesterov = get_bool(v, key);
    else if (key == "optimizer.beta1") o.beta1 = get_number(v, key);
    else if (key == "optimizer.beta2") o.beta2 = get_number(v, key);
    else if (key == "optimizer.eps") o.eps = get_number(v, key);
    else if (key == "optimizer.amsgrad") o.amsgrad = get_bool(v, key);
    else if (key == "scheduler.t_max") s.t_max = get_integer(v, key);
    else if (key == "scheduler.eta_min") s.eta_min = get_number(v, key);
    else if (key == "scheduler.t_0") s.t_0 = get_integer(v, key);
    else if (key == "scheduler.t_mult") s.t_mult = get_integer(v, key);
    else if (key == "scheduler.gamma") s.gamma = get_number(v, key);
    else if (key == "scheduler.factor") s.factor = get_number(v, key);
    else if (key == "scheduler.patience") s.patience = get_integer(v, key);
    else if (key == "scheduler.threshold") s.threshold = get_number(v, key);
    else if (key == "scheduler.milestones") {
      if (!v.is_array()) throw ParseError(key, "expected array of integers");
      s.milestones.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        s.milestones.push_back(get_integer(v[i], key + "[" + std::to_string(i) + "]"));
      }
    } else {
      throw ParseError(key, "unknown configuration key");
    }
  }
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ParseError("$", e.what());
  }
  return cfg;
}

AttackConfig attack_config_from_text(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  return attack_config_from_json(doc);
}

AttackConfig load_attack_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return attack_config_from_text(ss.str());
}

void save_attack_config(const AttackConfig& cfg, const std::filesystem::path& path, const ordered_json& meta) {
  auto doc = attack_config_to_json(cfg);
  for (const auto& [k, v] : meta.items()) doc["meta." + k] = v;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

std::string attack_config_summary(const AttackConfig& cfg) {
  std::string out;
  const auto doc = attack_config_to_json(cfg);
  for (const auto& [k, v] : doc.items()) {
    if (!out.empty()) out += ';';
    out += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

}  // namespace fmn
