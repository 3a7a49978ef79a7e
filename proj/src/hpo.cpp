#include "fmn/hpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "fmn/config.hpp"
#include "fmn/errors.hpp"
#include "fmn/metrics.hpp"

namespace fmn::hpo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_known_param(const std::string& name) {
  static const std::set<std::string> known = {
      "alpha0",           "optimizer.momentum", "optimizer.dampening", "optimizer.weight_decay",
      "optimizer.nesterov", "optimizer.amsgrad", "optimizer.beta1",     "optimizer.beta2",
      "scheduler.t_max",  "scheduler.eta_min",  "scheduler.t_0",        "scheduler.t_mult",
      "scheduler.factor", "scheduler.gamma",    "scheduler.patience",   "scheduler.milestone1",
      "scheduler.milestone2", "scheduler.milestone3"};
  return known.contains(name);
}

}  // namespace

void ParamSpec::validate() const {
  if (!is_known_param(name)) throw ContractError("unknown tunable parameter '" + name + "'");
  if (kind == ParamKind::Categorical) {
    if (choices.empty()) throw ContractError(name + ": categorical parameter needs choices");
    return;
  }
  if (!(lower < upper)) throw ContractError(name + ": lower bound must be below upper bound");
  if (kind == ParamKind::LogUniform && !(lower > 0.0)) throw ContractError(name + ": log-uniform needs lower > 0");
}

std::string Lineage::name() const {
  return std::string(to_string(loss)) + "/" + std::string(to_string(optimizer)) + "/" +
         std::string(to_string(scheduler));
}

SearchSpace SearchSpace::default_space(std::int64_t horizon) {
  if (horizon < 30) throw ContractError("default search space needs a horizon of at least 30 iterations");
  SearchSpace s;
  s.losses = {LossKind::LL, LossKind::CE};
  s.optimizers = {OptimizerKind::SGD, OptimizerKind::Adam};
  s.schedulers = {SchedulerKind::CALR, SchedulerKind::CAWR, SchedulerKind::MSLR, SchedulerKind::RLROP};
  s.base.iterations = horizon;
  s.common = {{"alpha0", ParamKind::LogUniform, 0.1, 10.0, {}}};
  s.optimizer_params[OptimizerKind::SGD] = {
      {"optimizer.momentum", ParamKind::Uniform, 0.8, 0.99, {}},
      {"optimizer.dampening", ParamKind::Uniform, 0.0, 0.2, {}},
      {"optimizer.weight_decay", ParamKind::LogUniform, 1e-3, 1.0, {}},
      {"optimizer.nesterov", ParamKind::Categorical, 0, 0, {0.0, 1.0}},
  };
  s.optimizer_params[OptimizerKind::Adam] = {
      {"optimizer.weight_decay", ParamKind::LogUniform, 1e-3, 1.0, {}},
      {"optimizer.amsgrad", ParamKind::Categorical, 0, 0, {0.0, 1.0}},
  };
  const auto k = static_cast<double>(horizon);
  s.scheduler_params[SchedulerKind::CALR] = {
      {"scheduler.t_max", ParamKind::Integer, std::floor(k / 2.0), 2.0 * k, {}}};
  s.scheduler_params[SchedulerKind::CAWR] = {
      {"scheduler.t_0", ParamKind::Integer, 10.0, k, {}},
      {"scheduler.t_mult", ParamKind::Categorical, 0, 0, {1.0, 2.0}},
  };
  s.scheduler_params[SchedulerKind::MSLR] = {
      {"scheduler.milestone1", ParamKind::Integer, 10.0, k - 10.0, {}},
      {"scheduler.milestone2", ParamKind::Integer, 10.0, k - 10.0, {}},
  };
  s.scheduler_params[SchedulerKind::RLROP] = {{"scheduler.factor", ParamKind::Uniform, 0.1, 0.5, {}}};
  return s;
}

std::vector<Lineage> SearchSpace::lineages() const {
  std::vector<Lineage> out;
  for (auto l : losses)
    for (auto o : optimizers)
      for (auto sc : schedulers) out.push_back({l, o, sc});
  return out;
}

std::vector<ParamSpec> SearchSpace::params_for(const Lineage& lineage) const {
  std::vector<ParamSpec> out = common;
  if (auto it = optimizer_params.find(lineage.optimizer); it != optimizer_params.end()) {
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  if (auto it = scheduler_params.find(lineage.scheduler); it != scheduler_params.end()) {
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

void SearchSpace::validate() const {
  if (losses.empty() || optimizers.empty() || schedulers.empty()) {
    throw ContractError("search space needs at least one loss, optimizer and scheduler");
  }
  for (const auto& lineage : lineages()) {
    std::set<std::string> names;
    for (const auto& p : params_for(lineage)) {
      p.validate();
      if (!names.insert(p.name).second) throw ContractError("duplicate parameter '" + p.name + "'");
    }
  }
}

AttackConfig bind_config(const SearchSpace& space, const Lineage& lineage, const std::vector<double>& values) {
  const auto params = space.params_for(lineage);
  if (values.size() != params.size()) throw ContractError("value count does not match the lineage parameters");
  AttackConfig cfg = space.base;
  cfg.loss = lineage.loss;
  cfg.optimizer.kind = lineage.optimizer;
  cfg.scheduler.kind = lineage.scheduler;

  std::vector<std::int64_t> milestones;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& n = params[i].name;
    const double v = values[i];
    const auto iv = static_cast<std::int64_t>(std::llround(v));
    auto& o = cfg.optimizer;
    auto& s = cfg.scheduler;
    if (n == "alpha0") cfg.alpha0 = v;
    else if (n == "optimizer.momentum") o.momentum = v;
    else if (n == "optimizer.dampening") o.dampening = v;
    else if (n == "optimizer.weight_decay") o.weight_decay = v;
    else if (n == "optimizer.nesterov") o.nesterov = v != 0.0;
    else if (n == "optimizer.amsgrad") o.amsgrad = v != 0.0;
    else if (n == "optimizer.beta1") o.beta1 = v;
    else if (n == "optimizer.beta2") o.beta2 = v;
    else if (n == "scheduler.t_max") s.t_max = iv;
    else if (n == "scheduler.eta_min") s.eta_min = v;
    else if (n == "scheduler.t_0") s.t_0 = iv;
    else if (n == "scheduler.t_mult") s.t_mult = iv;
    else if (n == "scheduler.factor") s.factor = v;
    else if (n == "scheduler.gamma") s.gamma = v;
    else if (n == "scheduler.patience") s.patience = iv;
    else if (n.rfind("scheduler.milestone", 0) == 0) milestones.push_back(iv);
  }
  if (!milestones.empty()) {
    std::sort(milestones.begin(), milestones.end());
    for (std::size_t i = 1; i < milestones.size(); ++i) {
      milestones[i] = std::max(milestones[i], milestones[i - 1] + 1);
    }
    cfg.scheduler.milestones = milestones;
  }
  if (cfg.optimizer.kind == OptimizerKind::SGD && cfg.optimizer.nesterov) {
    if (cfg.optimizer.momentum > 0.0) cfg.optimizer.dampening = 0.0;
    else cfg.optimizer.nesterov = false;
  }
  cfg.validate();
  return cfg;
}

std::vector<double> sample_values(const SearchSpace& space, const Lineage& lineage, Rng& rng) {
  std::vector<double> values;
  for (const auto& p : space.params_for(lineage)) {
    switch (p.kind) {
      case ParamKind::Uniform:
        values.push_back(std::uniform_real_distribution<double>(p.lower, p.upper)(rng));
        break;
      case ParamKind::LogUniform: {
        const double u = std::uniform_real_distribution<double>(std::log(p.lower), std::log(p.upper))(rng);
        values.push_back(std::exp(u));
        break;
      }
      case ParamKind::Integer:
        values.push_back(static_cast<double>(std::uniform_int_distribution<std::int64_t>(
            std::llround(p.lower), std::llround(p.upper))(rng)));
        break;
      case ParamKind::Categorical:
        values.push_back(p.choices[std::uniform_int_distribution<std::size_t>(0, p.choices.size() - 1)(rng)]);
        break;
    }
  }
  return values;
}

TrialConfig sample_config(const SearchSpace& space, Rng& rng) {
  const auto all = space.lineages();
  TrialConfig t;
  t.lineage = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
  t.values = sample_values(space, t.lineage, rng);
  t.config = bind_config(space, t.lineage, t.values);
  t.budget = t.config.iterations;
  return t;
}

std::vector<double> normalize(const std::vector<ParamSpec>& params, const std::vector<double>& values) {
  std::vector<double> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.numeric()) continue;
    double c = 0.0;
    if (p.kind == ParamKind::LogUniform) {
      c = (std::log(values[i]) - std::log(p.lower)) / (std::log(p.upper) - std::log(p.lower));
    } else {
      c = (values[i] - p.lower) / (p.upper - p.lower);
    }
    coords.push_back(std::clamp(c, 0.0, 1.0));
  }
  return coords;
}

std::vector<double> denormalize(const std::vector<ParamSpec>& params, const std::vector<double>& coords,
                                const std::vector<double>& fixed) {
  std::vector<double> values(params.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.numeric()) {
      values[i] = fixed.at(i);
      continue;
    }
    const double c = std::clamp(coords.at(j++), 0.0, 1.0);
    switch (p.kind) {
      case ParamKind::LogUniform:
        values[i] = std::exp(std::log(p.lower) + c * (std::log(p.upper) - std::log(p.lower)));
        values[i] = std::clamp(values[i], p.lower, p.upper);
        break;
      case ParamKind::Integer:
        values[i] = std::round(p.lower + c * (p.upper - p.lower));
        break;
      default:
        values[i] = p.lower + c * (p.upper - p.lower);
        break;
    }
  }
  return values;
}

// ---------------------------------------------------------------------------

RungLadder::RungLadder(std::int64_t b_min, std::int64_t b_max, std::int64_t eta) : eta_(eta) {
  if (b_min <= 0) throw ContractError("minimum budget must be positive");
  if (b_max < b_min) throw ContractError("maximum budget must be at least the minimum budget");
  if (eta < 2) throw ContractError("reduction factor eta must be >= 2");
  for (std::int64_t b = b_min; b <= b_max; b *= eta) budgets_.push_back(b);
  rungs_.resize(budgets_.size());
}

std::size_t RungLadder::rung_of(std::int64_t budget) const {
  const auto it = std::find(budgets_.begin(), budgets_.end(), budget);
  if (it == budgets_.end()) throw ContractError("budget " + std::to_string(budget) + " is not a rung");
  return static_cast<std::size_t>(it - budgets_.begin());
}

std::size_t RungLadder::quota(std::size_t n) const {
  const auto e = static_cast<std::size_t>(eta_);
  return (n + e - 1) / e;
}

bool RungLadder::is_promoted(const Rung& r, std::uint64_t id) const {
  return std::find(r.promoted.begin(), r.promoted.end(), id) != r.promoted.end();
}

AshaDecision RungLadder::on_result(const TrialResult& result) {
  const std::size_t rung = rung_of(result.budget);
  auto& r = rungs_[rung];
  for (const auto& entry : r.ranked) {
    if (entry.second == result.trial_id) throw ContractError("trial already reported at this rung");
  }
  const std::pair<double, std::uint64_t> key{result.objective, result.trial_id};
  const auto pos = std::upper_bound(r.ranked.begin(), r.ranked.end(), key);
  const auto rank = static_cast<std::size_t>(pos - r.ranked.begin());
  r.ranked.insert(pos, key);
  if (rung == top_rung() || rank >= quota(r.ranked.size())) return AshaDecision::Stop;
  r.promoted.push_back(result.trial_id);
  return AshaDecision::Promote;
}

std::vector<std::uint64_t> RungLadder::take_promotions(std::size_t rung) {
  std::vector<std::uint64_t> out;
  if (rung >= top_rung()) return out;
  auto& r = rungs_.at(rung);
  const std::size_t q = quota(r.ranked.size());
  for (std::size_t i = 0; i < q; ++i) {
    const auto id = r.ranked[i].second;
    if (!is_promoted(r, id)) {
      r.promoted.push_back(id);
      out.push_back(id);
    }
  }
  return out;
}

std::vector<std::uint64_t> RungLadder::top_set(std::size_t rung) const {
  const auto& r = rungs_.at(rung);
  std::vector<std::uint64_t> out;
  const std::size_t q = quota(r.ranked.size());
  for (std::size_t i = 0; i < q; ++i) out.push_back(r.ranked[i].second);
  return out;
}

std::vector<std::uint64_t> RungLadder::promoted(std::size_t rung) const { return rungs_.at(rung).promoted; }

AshaDecision asha_on_result(RungLadder& ladder, const TrialResult& result) { return ladder.on_result(result); }

// ---------------------------------------------------------------------------

CfoCandidates cfo_propose(const std::vector<double>& incumbent, double radius, Rng& rng) {
  if (!(radius > 0.0)) throw ContractError("cfo radius must be positive");
  CfoCandidates c;
  const std::size_t d = incumbent.size();
  c.direction.assign(d, 0.0);
  if (d > 0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double len = 0.0;
    while (len == 0.0) {
      for (auto& v : c.direction) v = normal(rng);
      len = norm_l2(c.direction);
    }
    for (auto& v : c.direction) v /= len;
  }
  c.plus.resize(d);
  c.minus.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    c.plus[i] = std::clamp(incumbent[i] + radius * c.direction[i], 0.0, 1.0);
    c.minus[i] = std::clamp(incumbent[i] - radius * c.direction[i], 0.0, 1.0);
  }
  return c;
}

std::pair<TrialConfig, TrialConfig> cfo_propose(const SearchSpace& space, const TrialConfig& incumbent,
                                                double radius, Rng& rng) {
  const auto params = space.params_for(incumbent.lineage);
  const auto c = cfo_propose(normalize(params, incumbent.values), radius, rng);
  auto make = [&](const std::vector<double>& coords) {
    TrialConfig t;
    t.lineage = incumbent.lineage;
    t.values = denormalize(params, coords, incumbent.values);
    t.config = bind_config(space, t.lineage, t.values);
    t.budget = incumbent.budget;
    return t;
  };
  return {make(c.plus), make(c.minus)};
}

CfoStep cfo_update(bool better_found, int consecutive_failures, double radius) {
  CfoStep s;
  if (better_found) {
    s.radius = std::min(radius * 2.0, kCfoMaxRadius);
    return s;
  }
  s.consecutive_failures = consecutive_failures + 1;
  s.radius = radius;
  if (s.consecutive_failures >= 2) {
    s.consecutive_failures = 0;
    s.radius = radius / 2.0;
    if (s.radius < kCfoMinRadius) {
      s.radius = kCfoMinRadius;
      s.restart = true;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

struct LineageRun {
  Lineage lineage;
  std::vector<ParamSpec> params;
  Rng rng;
  std::optional<std::uint64_t> incumbent;
  double radius = 0.0;
  int failures = 0;
  bool exhausted = false;
};

class Driver {
 public:
  Driver(const SearchSpace& space, const Evaluator& evaluate, const TunerConfig& cfg)
      : space_(space), evaluate_(evaluate), cfg_(cfg), ladder_(cfg.budget_min, cfg.budget_max, cfg.eta) {
    space_.base.iterations = ladder_.budgets().back();
    space_.validate();
  }

  TuneOutcome run() {
    const auto lineages = space_.lineages();
    for (std::size_t i = 0; i < lineages.size(); ++i) {
      LineageRun lr;
      lr.lineage = lineages[i];
      lr.params = space_.params_for(lr.lineage);
      std::seed_seq seq{static_cast<std::uint64_t>(cfg_.seed), static_cast<std::uint64_t>(i)};
      lr.rng.seed(seq);
      lr.radius = cfg_.initial_radius;
      runs_.push_back(std::move(lr));
    }

    bool progress = true;
    while (progress && !out_of_budget()) {
      progress = false;
      for (auto& lr : runs_) {
        if (lr.exhausted || out_of_budget()) continue;
        step(lr);
        progress = true;
      }
    }
    return finish();
  }

 private:
  bool out_of_budget() const { return evaluations_ >= cfg_.max_evaluations; }

  std::size_t numeric_dims(const LineageRun& lr) const {
    return static_cast<std::size_t>(std::count_if(lr.params.begin(), lr.params.end(),
                                                  [](const ParamSpec& p) { return p.numeric(); }));
  }

  void step(LineageRun& lr) {
    if (!lr.incumbent) {
      lr.incumbent = launch(lr.lineage, sample_values(space_, lr.lineage, lr.rng));
      if (numeric_dims(lr) == 0) lr.exhausted = true;
      return;
    }
    const TrialConfig& inc = trials_.at(*lr.incumbent);
    const auto [plus, minus] = cfo_propose(space_, inc, lr.radius, lr.rng);
    const double inc_obj = objective_.at(*lr.incumbent);

    bool better = false;
    const auto p_id = launch(lr.lineage, plus.values);
    if (objective_.at(p_id) < inc_obj) {
      lr.incumbent = p_id;
      better = true;
    } else if (!out_of_budget()) {
      const auto m_id = launch(lr.lineage, minus.values);
      if (objective_.at(m_id) < inc_obj) {
        lr.incumbent = m_id;
        better = true;
      }
    }
    const auto s = cfo_update(better, lr.failures, lr.radius);
    lr.radius = s.radius;
    lr.failures = s.consecutive_failures;
    if (s.restart && !out_of_budget()) {
      lr.radius = cfg_.initial_radius;
      lr.failures = 0;
      lr.incumbent = launch(lr.lineage, sample_values(space_, lr.lineage, lr.rng));
    }
  }

  // Creates a trial and runs it up the ladder as far as ASHA allows.
  std::uint64_t launch(const Lineage& lineage, std::vector<double> values) {
    TrialConfig t;
    t.id = next_id_++;
    t.lineage = lineage;
    t.values = std::move(values);
    t.config = bind_config(space_, lineage, t.values);
    trials_.emplace(t.id, t);
    objective_[t.id] = kInf;
    pending_.push_back({t.id, 0});
    drain();
    return t.id;
  }

  void drain() {
    while (!pending_.empty() && !out_of_budget()) {
      const auto [id, rung] = pending_.front();
      pending_.pop_front();
      evaluate_at(id, rung);
      for (std::size_t r = 0; r < ladder_.top_rung(); ++r) {
        for (auto pid : ladder_.take_promotions(r)) pending_.push_back({pid, r + 1});
      }
    }
    pending_.clear();
  }

  void evaluate_at(std::uint64_t id, std::size_t rung) {
    TrialConfig t = trials_.at(id);
    t.budget = ladder_.budgets()[rung];
    TrialResult r = evaluate_(t);
    r.trial_id = id;
    r.budget = t.budget;
    ++evaluations_;
    const auto decision = ladder_.on_result(r);
    objective_[id] = r.objective;

    TrialLogEntry e;
    e.trial_id = id;
    e.lineage = t.lineage.name();
    e.rung = rung;
    e.budget = t.budget;
    e.objective = r.objective;
    e.success_rate = r.success_rate;
    e.decision = decision;
    e.seed = cfg_.seed;
    e.config = t.config;
    log_.push_back(std::move(e));

    if (decision == AshaDecision::Promote) pending_.push_back({id, rung + 1});
  }

  TuneOutcome finish() {
    TuneOutcome out;
    out.log = log_;
    const std::size_t top = ladder_.top_rung();
    const TrialLogEntry* best = nullptr;
    std::size_t top_count = 0;
    for (const auto& e : log_) {
      if (e.rung != top) continue;
      ++top_count;
      if (best == nullptr || e.objective < best->objective) best = &e;
    }
    if (best == nullptr || !std::isfinite(best->objective)) {
      out.diagnostic = "no top-rung trial produced a finite objective (" + std::to_string(evaluations_) +
                       " evaluations, " + std::to_string(top_count) + " at the top rung)";
      return out;
    }
    out.ok = true;
    out.best_objective = best->objective;
    TrialConfig t = trials_.at(best->trial_id);
    t.budget = ladder_.budgets()[top];
    out.best = std::move(t);
    return out;
  }

  SearchSpace space_;
  const Evaluator& evaluate_;
  TunerConfig cfg_;
  RungLadder ladder_;
  std::vector<LineageRun> runs_;
  std::map<std::uint64_t, TrialConfig> trials_;
  std::map<std::uint64_t, double> objective_;  // at the highest rung reached
  std::deque<std::pair<std::uint64_t, std::size_t>> pending_;
  std::vector<TrialLogEntry> log_;
  std::uint64_t next_id_ = 0;
  std::size_t evaluations_ = 0;
};

}  // namespace

TuneOutcome tune(const SearchSpace& space, const Evaluator& evaluate, const TunerConfig& cfg) {
  Driver driver(space, evaluate, cfg);
  return driver.run();
}

TrialResult evaluate_attack(const ModelSpec& model, const Dataset& tuning, const TrialConfig& trial, int jobs) {
  const auto start = std::chrono::steady_clock::now();
  AttackOptions opts;
  opts.budget = trial.budget;
  const auto results = run_batch(model, tuning, trial.config, jobs, opts);

  TrialResult r;
  r.trial_id = trial.id;
  r.budget = trial.budget;
  std::size_t successes = 0;
  for (const auto& a : results) successes += a.success ? 1 : 0;
  const std::size_t n = results.size();
  r.success_rate = n == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(n);
  r.objective = (n == 0 || 2 * (n - successes) >= n) ? kInf : median_norm(results);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

TuneOutcome tune(const ModelSpec& model, const Dataset& tuning, const SearchSpace& space, const TunerConfig& cfg) {
  Evaluator eval = [&](const TrialConfig& t) { return evaluate_attack(model, tuning, t, cfg.jobs); };
  return tune(space, eval, cfg);
}

std::string log_entry_to_json_line(const TrialLogEntry& e) {
  nlohmann::ordered_json j;
  j["trial"] = e.trial_id;
  j["lineage"] = e.lineage;
  j["rung"] = e.rung;
  j["budget"] = e.budget;
  if (std::isfinite(e.objective)) j["objective"] = e.objective;
  else j["objective"] = "inf";
  j["success_rate"] = e.success_rate;
  j["decision"] = e.decision == AshaDecision::Promote ? "promote" : "stop";
  j["seed"] = e.seed;
  j["version"] = kToolkitVersion;
  j["config"] = attack_config_to_json(e.config);
  return j.dump();
}

}  // namespace fmn::hpo
