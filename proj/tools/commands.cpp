#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fmn/config.hpp"
#include "fmn/errors.hpp"
#include "fmn/fixtures.hpp"
#include "fmn/gradcheck.hpp"
#include "fmn/hpo.hpp"
#include "fmn/metrics.hpp"

namespace fmn::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Raised for bad user input; reported as a single line with exit code 2.
struct InputError : std::runtime_error {
  InputError(std::string where_, const std::string& what) : std::runtime_error(what), where(std::move(where_)) {}
  std::string where;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(what, std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw InputError(path, std::string(what) + " file not found");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path.string(), "cannot write output file");
  out << text;
}

std::string header_line(std::uint64_t seed) {
  return "fmn " + std::string(kToolkitVersion) + " seed=" + std::to_string(seed);
}

ordered_json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  return "inf";
}

// ---------------------------------------------------------------------------

struct AttackArgs {
  std::string model, data, config, out;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string epsilon = "8/255";
  bool trace = false;
};

int cmd_attack(const AttackArgs& a, std::ostream& out) {
  require_file(a.model, "model");
  require_file(a.data, "data");
  require_file(a.config, "config");
  if (a.out.empty()) throw InputError("out", "missing --out");
  const ModelSpec model = load_model(a.model);
  const Dataset data = load_dataset(a.data);
  if (data.input_dim != model.input_dim()) throw InputError(a.data, "dataset dimension does not match the model");
  for (const auto& s : data.samples) {
    if (s.label >= model.num_classes()) throw InputError(a.data, "label out of range for the model");
  }
  const AttackConfig cfg = load_attack_config(a.config);
  double eps = 0.0;
  try {
    eps = parse_rational(a.epsilon);
  } catch (const ParseError&) {
    throw InputError("epsilon", "cannot parse --epsilon '" + a.epsilon + "'");
  }

  AttackOptions opts;
  opts.record_trace = a.trace;
  const auto results = run_batch(model, data, cfg, a.jobs, opts);

  const std::vector<std::string> comments = {header_line(a.seed), "config " + attack_config_summary(cfg),
                                             "model " + a.model, "data " + a.data};
  write_text(fs::path(a.out) / "results.csv", results_to_csv(results, data, comments));

  std::size_t successes = 0;
  for (const auto& r : results) successes += r.success ? 1 : 0;
  const double median = median_norm(results);
  const double rate = results.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(results.size());
  const double ra = robust_accuracy(results, {eps}).accuracy.front();

  ordered_json summary;
  summary["version"] = kToolkitVersion;
  summary["seed"] = a.seed;
  summary["samples"] = results.size();
  summary["median_norm"] = number_or_inf(median);
  summary["success_rate"] = rate;
  summary["epsilon"] = a.epsilon;
  summary["robust_accuracy"] = ra;
  summary["config"] = attack_config_to_json(cfg);
  write_text(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");

  if (a.trace) {
    std::string t = "# " + header_line(a.seed) + "\nindex,k,loss,epsilon,step_size,delta_norm,best_norm\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      for (std::size_t k = 0; k < results[i].trace.size(); ++k) {
        const auto& r = results[i].trace[k];
        t += std::to_string(i) + "," + std::to_string(k + 1) + "," + format_double(r.loss) + "," +
             format_double(r.epsilon) + "," + format_double(r.step_size) + "," + format_double(r.delta_norm) + "," +
             format_double(r.best_norm) + "\n";
      }
    }
    write_text(fs::path(a.out) / "trace.csv", t);
  }

  out << "samples=" << results.size() << " success_rate=" << format_double(rate)
      << " median_norm=" << format_double(median) << " robust_accuracy@" << a.epsilon << "=" << format_double(ra)
      << "\n";
  return successes == 0 && !results.empty() ? kNoResult : kOk;
}

// ---------------------------------------------------------------------------

struct TuneArgs {
  std::string model, data, config, out;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::int64_t budget_min = 30, budget_max = 300, eta = 3;
  std::size_t max_evals = 200;
  std::string losses = "LL,CE", optimizers = "sgd,adam", schedulers = "calr,cawr,mslr,rlrop";
};

template <class T, class F>
std::vector<T> parse_list(const std::string& text, F parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

int cmd_tune(const TuneArgs& a, std::ostream& out) {
  require_file(a.model, "model");
  require_file(a.data, "data");
  if (a.out.empty()) throw InputError("out", "missing --out");
  const ModelSpec model = load_model(a.model);
  const Dataset data = load_dataset(a.data);
  if (data.input_dim != model.input_dim()) throw InputError(a.data, "dataset dimension does not match the model");

  hpo::TunerConfig tc;
  tc.budget_min = a.budget_min;
  tc.budget_max = a.budget_max;
  tc.eta = a.eta;
  tc.max_evaluations = a.max_evals;
  tc.seed = a.seed;
  tc.jobs = a.jobs;
  const hpo::RungLadder ladder(tc.budget_min, tc.budget_max, tc.eta);
  const std::int64_t horizon = ladder.budgets().back();

  auto space = hpo::SearchSpace::default_space(std::max<std::int64_t>(horizon, 30));
  if (!a.config.empty()) {
    require_file(a.config, "config");
    space.base = load_attack_config(a.config);
  }
  space.base.iterations = horizon;
  space.losses = parse_list<LossKind>(a.losses, [](const std::string& s) { return parse_loss_kind(s); });
  space.optimizers = parse_list<OptimizerKind>(a.optimizers, [](const std::string& s) { return parse_optimizer_kind(s); });
  space.schedulers = parse_list<SchedulerKind>(a.schedulers, [](const std::string& s) { return parse_scheduler_kind(s); });

  const auto outcome = hpo::tune(model, data, space, tc);

  std::string log;
  for (const auto& e : outcome.log) log += hpo::log_entry_to_json_line(e) + "\n";
  write_text(fs::path(a.out) / "trials.jsonl", log);

  if (!outcome.ok) {
    out << "tune failed: " << outcome.diagnostic << "\n";
    return kNoResult;
  }
  const auto& best = *outcome.best;
  ordered_json meta;
  meta["version"] = kToolkitVersion;
  meta["seed"] = a.seed;
  meta["trial"] = best.id;
  meta["lineage"] = best.lineage.name();
  meta["objective"] = outcome.best_objective;
  meta["budget"] = best.budget;
  meta["evaluations"] = outcome.log.size();
  save_attack_config(best.config, fs::path(a.out) / "best_config.json", meta);

  out << "best optimizer=" << to_string(best.lineage.optimizer) << " scheduler=" << to_string(best.lineage.scheduler)
      << " loss=" << to_string(best.lineage.loss) << " objective=" << format_double(outcome.best_objective)
      << " evaluations=" << outcome.log.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct CurveArgs {
  std::string results, grid = "0:16/255:64pts", out;
};

int cmd_curve(const CurveArgs& a, std::ostream& out) {
  require_file(a.results, "results");
  std::ifstream in(a.results, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto file = parse_results_csv(ss.str());

  std::vector<double> grid;
  try {
    grid = parse_grid(a.grid);
    std::vector<double> norms;
    for (const auto& r : file.rows) norms.push_back(r.success ? r.norm : std::numeric_limits<double>::infinity());
    const auto curve = robust_accuracy(norms, grid);

    std::string text;
    for (const auto& c : file.comments) text += "# " + c + "\n";
    text += "# curve grid=" + a.grid + " source=" + a.results + "\n";
    text += "epsilon,robust_accuracy\n";
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
      text += format_double(curve.epsilons[i]) + "," + format_double(curve.accuracy[i]) + "\n";
    }
    if (a.out.empty()) out << text;
    else write_text(a.out, text);
  } catch (const ContractError& e) {
    throw InputError("grid", e.what());
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradArgs {
  std::string model;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  require_file(a.model, "model");
  const ModelSpec model = load_model(a.model);
  const auto report = gradient_check(model, a.trials, a.seed);
  const bool pass = report.cases == a.trials && report.max_rel_error < 1e-4;
  out << "cases=" << report.cases << " skipped_kinks=" << report.skipped
      << " max_rel_error=" << format_double(report.max_rel_error) << (pass ? " PASS" : " FAIL") << "\n";
  return pass ? kOk : kNoResult;
}

// ---------------------------------------------------------------------------

struct FixtureArgs {
  std::string kind = "all", out;
  std::uint64_t seed = 0;
  std::size_t count = 50;
};

std::string model_with_meta(const ModelSpec& model, std::uint64_t seed, const std::string& generator) {
  auto doc = ordered_json::parse(model_to_json_text(model));
  doc["meta"] = {{"version", kToolkitVersion}, {"seed", seed}, {"generator", generator}};
  return doc.dump(1) + "\n";
}

std::string dataset_with_meta(const Dataset& data, std::uint64_t seed, const std::string& what) {
  return "# " + header_line(seed) + " " + what + "\n" + dataset_to_csv_text(data);
}

int cmd_gen_fixtures(const FixtureArgs& a, std::ostream& out) {
  if (a.out.empty()) throw InputError("out", "missing --out");
  if (a.kind != "linear" && a.kind != "mlp" && a.kind != "all") {
    throw InputError("kind", "unknown fixture kind '" + a.kind + "' (linear, mlp, all)");
  }
  const fs::path root(a.out);
  if (a.kind == "linear" || a.kind == "all") {
    std::mt19937_64 rng(a.seed);
    std::uniform_int_distribution<std::size_t> dims(10, 50);
    std::string answers = "# " + header_line(a.seed) + " linear\nindex,dim,label,distance\n";
    for (std::size_t i = 0; i < a.count; ++i) {
      const auto c = fixtures::make_linear_case(dims(rng), rng);
      char name[32];
      std::snprintf(name, sizeof(name), "case_%03zu", i);
      write_text(root / "linear" / (std::string(name) + ".model.json"), model_with_meta(c.model, a.seed, "linear"));
      Dataset d;
      d.input_dim = c.x.size();
      d.samples.push_back({c.x, c.label});
      write_text(root / "linear" / (std::string(name) + ".data.csv"), dataset_with_meta(d, a.seed, "linear"));
      answers += std::to_string(i) + "," + std::to_string(c.x.size()) + "," + std::to_string(c.label) + "," +
                 format_double(c.distance) + "\n";
    }
    write_text(root / "linear" / "answers.csv", answers);
    out << "wrote " << a.count << " linear cases to " << (root / "linear").string() << "\n";
  }
  if (a.kind == "mlp" || a.kind == "all") {
    const auto f = fixtures::make_mlp_fixture(a.seed);
    write_text(root / "mlp" / "model.json", model_with_meta(f.model, a.seed, "mlp-2-64-64-2-adversarial"));
    write_text(root / "mlp" / "train.csv", dataset_with_meta(f.train, a.seed, "moons train"));
    write_text(root / "mlp" / "tune.csv", dataset_with_meta(f.tune, a.seed, "moons tune"));
    write_text(root / "mlp" / "eval.csv", dataset_with_meta(f.eval, a.seed, "moons eval"));
    out << "wrote mlp fixture to " << (root / "mlp").string() << " (clean eval accuracy "
        << format_double(fixtures::clean_accuracy(f.model, f.eval)) << ")\n";
  }
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string results_to_csv(const std::vector<AttackResult>& results, const Dataset& data,
                           const std::vector<std::string>& comments) {
  std::string text;
  for (const auto& c : comments) text += "# " + c + "\n";
  text += "index,label,success,norm,iterations\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    text += std::to_string(i) + "," + std::to_string(data.samples[i].label) + "," + (r.success ? "1" : "0") + "," +
            format_double(r.success ? r.norm : std::numeric_limits<double>::infinity()) + "," +
            std::to_string(r.iterations_run) + "\n";
  }
  return text;
}

ResultsFile parse_results_csv(const std::string& text) {
  ResultsFile file;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      file.comments.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (!header) {
      if (line != "index,label,success,norm,iterations") {
        throw ParseError("line " + std::to_string(lineno), "expected results header");
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string item;
    while (std::getline(ls, item, ',')) f.push_back(item);
    if (f.size() != 5) throw ParseError("line " + std::to_string(lineno), "expected 5 columns");
    ResultRow r;
    try {
      r.index = std::stoull(f[0]);
      r.label = std::stoull(f[1]);
      r.success = f[2] == "1";
      r.norm = parse_rational(f[3]);
      r.iterations = std::stoll(f[4]);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno), "malformed results row");
    }
    file.rows.push_back(r);
  }
  if (!header) throw ParseError("line 1", "missing results header");
  return file;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimum-norm l-inf adversarial attacks with hyperparameter optimization", "fmn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  AttackArgs attack;
  auto* sa = app.add_subcommand("attack", "Run the attack on every sample of a dataset");
  sa->add_option("--model", attack.model, "Model file")->required();
  sa->add_option("--data", attack.data, "Dataset CSV")->required();
  sa->add_option("--config", attack.config, "Attack configuration")->required();
  sa->add_option("--out", attack.out, "Output directory")->required();
  sa->add_option("--seed", attack.seed, "Seed recorded in every output");
  sa->add_option("--jobs", attack.jobs, "Worker threads (0 = all cores)");
  sa->add_option("--epsilon", attack.epsilon, "Threshold for the reported robust accuracy");
  sa->add_flag("--trace", attack.trace, "Also write per-iteration traces");

  TuneArgs tune;
  auto* st = app.add_subcommand("tune", "Search the attack configuration with the smallest median norm");
  st->add_option("--model", tune.model, "Model file")->required();
  st->add_option("--data", tune.data, "Tuning samples")->required();
  st->add_option("--config", tune.config, "Base configuration for untuned values");
  st->add_option("--out", tune.out, "Output directory")->required();
  st->add_option("--seed", tune.seed, "Search seed");
  st->add_option("--jobs", tune.jobs, "Worker threads per evaluation");
  st->add_option("--budget-min", tune.budget_min, "Lowest rung budget (iterations)");
  st->add_option("--budget-max", tune.budget_max, "Largest admissible budget (iterations)");
  st->add_option("--eta", tune.eta, "Successive-halving reduction factor");
  st->add_option("--max-evals", tune.max_evals, "Total attack evaluations");
  st->add_option("--losses", tune.losses, "Comma-separated losses");
  st->add_option("--optimizers", tune.optimizers, "Comma-separated optimizers");
  st->add_option("--schedulers", tune.schedulers, "Comma-separated schedulers");

  CurveArgs curve;
  auto* sc = app.add_subcommand("curve", "Robust accuracy over an epsilon grid from a results CSV");
  sc->add_option("--results", curve.results, "results.csv written by `attack`")->required();
  sc->add_option("--grid", curve.grid, "lo:hi:Npts or comma list; rationals like 8/255 allowed");
  sc->add_option("--out", curve.out, "Output CSV (stdout when omitted)");

  GradArgs grad;
  auto* sg = app.add_subcommand("gradcheck", "Compare input gradients against central differences");
  sg->add_option("--model", grad.model, "Model file")->required();
  sg->add_option("--trials", grad.trials, "Random cases");
  sg->add_option("--seed", grad.seed, "Seed");

  FixtureArgs fx;
  auto* sf = app.add_subcommand("gen-fixtures", "Generate deterministic test fixtures");
  sf->add_option("--kind", fx.kind, "linear, mlp or all");
  sf->add_option("--seed", fx.seed, "Seed");
  sf->add_option("--out", fx.out, "Output directory")->required();
  sf->add_option("--count", fx.count, "Number of linear cases");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*sa) return cmd_attack(attack, out);
    if (*st) return cmd_tune(tune, out);
    if (*sc) return cmd_curve(curve, out);
    if (*sg) return cmd_gradcheck(grad, out);
    if (*sf) return cmd_gen_fixtures(fx, out);
  } catch (const InputError& e) {
    err << "error: code=2 where=" << e.where << " message=" << e.what() << "\n";
    return kInputError;
  } catch (const ParseError& e) {
    err << "error: code=2 where=" << e.where() << " message=" << e.what() << "\n";
    return kInputError;
  } catch (const std::logic_error& e) {
    err << "error: code=2 where=input message=" << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: code=1 where=run message=" << e.what() << "\n";
    return kNoResult;
  }
  return kInputError;
}

}  // namespace fmn::cli
