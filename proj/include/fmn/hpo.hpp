#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fmn/attack.hpp"
#include "fmn/dataset.hpp"
#include "fmn/model.hpp"

namespace fmn::hpo {

using Rng = std::mt19937_64;

enum class ParamKind { Uniform, LogUniform, Integer, Categorical };

/// One tunable scalar. Numeric kinds use [lower, upper]; Categorical picks
/// among `choices` and is held fixed during a local-search phase.
struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Uniform;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<double> choices;

  bool numeric() const noexcept { return kind != ParamKind::Categorical; }
  void validate() const;
};

/// The categorical triple that selects an attack family. Each lineage gets
/// its own local search.
struct Lineage {
  LossKind loss = LossKind::LL;
  OptimizerKind optimizer = OptimizerKind::SGD;
  SchedulerKind scheduler = SchedulerKind::CALR;

  std::string name() const;
  friend auto operator<=>(const Lineage&, const Lineage&) = default;
};

struct SearchSpace {
  std::vector<LossKind> losses;
  std::vector<OptimizerKind> optimizers;
  std::vector<SchedulerKind> schedulers;
  std::vector<ParamSpec> common;  // shared by every lineage (alpha0)
  std::map<OptimizerKind, std::vector<ParamSpec>> optimizer_params;
  std::map<SchedulerKind, std::vector<ParamSpec>> scheduler_params;
  AttackConfig base;  // values for everything not tuned; base.iterations is the horizon

  /// Full space over both losses, both optimizers and all four schedulers
  /// for an attack horizon of `horizon` iterations.
  static SearchSpace default_space(std::int64_t horizon);

  std::vector<Lineage> lineages() const;
  std::vector<ParamSpec> params_for(const Lineage& lineage) const;
  void validate() const;
};

/// A fully bound point of the search space.
struct TrialConfig {
  std::uint64_t id = 0;
  Lineage lineage;
  std::vector<double> values;  // natural units, aligned with params_for(lineage)
  AttackConfig config;
  std::int64_t budget = 0;     // attack iterations for this evaluation
};

struct TrialResult {
  std::uint64_t trial_id = 0;
  std::int64_t budget = 0;
  double objective = 0.0;  // median ||delta||_inf, +inf when failed
  double success_rate = 0.0;
  double wall_time_s = 0.0;
};

/// Builds the AttackConfig for `values` in `lineage`.
AttackConfig bind_config(const SearchSpace& space, const Lineage& lineage, const std::vector<double>& values);

std::vector<double> sample_values(const SearchSpace& space, const Lineage& lineage, Rng& rng);

/// Uniform lineage, then every parameter from its distribution.
TrialConfig sample_config(const SearchSpace& space, Rng& rng);

// Normalized coordinates: numeric parameters only, each mapped to [0,1]
// (log scale for LogUniform).
std::vector<double> normalize(const std::vector<ParamSpec>& params, const std::vector<double>& values);
/// Inverse of normalize; categorical entries are taken from `fixed`.
std::vector<double> denormalize(const std::vector<ParamSpec>& params, const std::vector<double>& coords,
                                const std::vector<double>& fixed);

// ---------------------------------------------------------------------------
// Asynchronous successive halving

enum class AshaDecision { Promote, Stop };

class RungLadder {
 public:
  RungLadder(std::int64_t b_min, std::int64_t b_max, std::int64_t eta);

  const std::vector<std::int64_t>& budgets() const noexcept { return budgets_; }
  std::int64_t eta() const noexcept { return eta_; }
  std::size_t top_rung() const noexcept { return budgets_.size() - 1; }

  /// Rung index holding `budget`; ContractError when it is not on the ladder.
  std::size_t rung_of(std::int64_t budget) const;

  /// Records `result` at its rung and decides whether the trial continues:
  /// promote iff it ranks within the top ceil(n/eta) of the n results
  /// completed at that rung so far. Never promotes from the top rung.
  AshaDecision on_result(const TrialResult& result);

  /// Trials currently in the top ceil(n/eta) of `rung` that have not been
  /// promoted yet; marks them promoted. Empty for the top rung.
  std::vector<std::uint64_t> take_promotions(std::size_t rung);

  /// Current top ceil(n/eta) trial ids at `rung`, best first.
  std::vector<std::uint64_t> top_set(std::size_t rung) const;
  std::vector<std::uint64_t> promoted(std::size_t rung) const;
  std::size_t completed(std::size_t rung) const { return rungs_.at(rung).ranked.size(); }

 private:
  struct Rung {
    std::vector<std::pair<double, std::uint64_t>> ranked;  // (objective, trial id), sorted
    std::vector<std::uint64_t> promoted;
  };
  std::size_t quota(std::size_t n) const;
  bool is_promoted(const Rung& r, std::uint64_t id) const;

  std::vector<std::int64_t> budgets_;
  std::int64_t eta_;
  std::vector<Rung> rungs_;
};

AshaDecision asha_on_result(RungLadder& ladder, const TrialResult& result);

// ---------------------------------------------------------------------------
// Cost-frugal local search

struct CfoCandidates {
  std::vector<double> plus;
  std::vector<double> minus;
  std::vector<double> direction;  // unit vector
};

/// incumbent +/- radius * u for a random unit u, each clamped to [0,1]^d.
CfoCandidates cfo_propose(const std::vector<double>& incumbent, double radius, Rng& rng);

/// Same, on trial configs: categorical values of the incumbent are kept.
std::pair<TrialConfig, TrialConfig> cfo_propose(const SearchSpace& space, const TrialConfig& incumbent,
                                                double radius, Rng& rng);

inline constexpr double kCfoMaxRadius = 1.0;
inline constexpr double kCfoMinRadius = 1e-3;

struct CfoStep {
  double radius = 0.0;
  int consecutive_failures = 0;
  bool restart = false;  // radius fell below kCfoMinRadius
};

/// Doubles the radius on success (capped at kCfoMaxRadius). A full failure
/// bumps the failure count; the second consecutive one halves the radius
/// and requests a restart once it drops below kCfoMinRadius.
CfoStep cfo_update(bool better_found, int consecutive_failures, double radius);

// ---------------------------------------------------------------------------
// Tuning driver

struct TunerConfig {
  std::int64_t budget_min = 30;
  std::int64_t budget_max = 300;
  std::int64_t eta = 3;
  std::size_t max_evaluations = 200;  // attack evaluations over all rungs
  double initial_radius = 0.1;
  std::uint64_t seed = 0;
  int jobs = 0;
};

struct TrialLogEntry {
  std::uint64_t trial_id = 0;
  std::string lineage;
  std::size_t rung = 0;
  std::int64_t budget = 0;
  double objective = 0.0;
  double success_rate = 0.0;
  AshaDecision decision = AshaDecision::Stop;
  std::uint64_t seed = 0;
  AttackConfig config;
};

struct TuneOutcome {
  bool ok = false;
  std::optional<TrialConfig> best;  // with budget set to the top rung
  double best_objective = 0.0;
  std::vector<TrialLogEntry> log;
  std::string diagnostic;
};

using Evaluator = std::function<TrialResult(const TrialConfig&)>;

/// Interleaves one CFO lineage per categorical triple, round robin, with
/// ASHA budget allocation. Every trial starts at the lowest rung. The
/// attack horizon is the top rung budget. Returns the best top-rung trial.
TuneOutcome tune(const SearchSpace& space, const Evaluator& evaluate, const TunerConfig& cfg);

/// Runs the attack on `tuning` at the trial budget; objective is the median
/// norm, +inf when at least half of the samples are not broken.
TrialResult evaluate_attack(const ModelSpec& model, const Dataset& tuning, const TrialConfig& trial, int jobs);

TuneOutcome tune(const ModelSpec& model, const Dataset& tuning, const SearchSpace& space, const TunerConfig& cfg);

/// Trial log record as a single-line JSON object.
std::string log_entry_to_json_line(const TrialLogEntry& e);

}  // namespace fmn::hpo
