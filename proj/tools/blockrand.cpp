// blockrand: design, estimation, exact verification, and simulation of
// blocked randomized experiments.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "blockrand/design.hpp"
#include "blockrand/estimators.hpp"
#include "blockrand/io.hpp"
#include "blockrand/moments.hpp"
#include "blockrand/montecarlo.hpp"
#include "blockrand/oracle.hpp"
#include "blockrand/outcomes.hpp"
#include "blockrand/verify.hpp"

namespace {

using namespace blockrand;

bool g_verbose = false;

void note(const std::string& message) {
  if (g_verbose) std::cerr << "blockrand: " << message << "\n";
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << text;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("BLOCKRAND_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ParseError("BLOCKRAND_SEED: not an unsigned integer: '" + std::string(env) + "'");
    }
  }
  throw ParseError("seed required: pass --seed or set BLOCKRAND_SEED");
}

std::pair<int, int> parse_treatments(const std::string& text, int r) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw ParseError("--treatments: expected 's,t', got '" + text + "'");
  }
  int s = 0, t = 0;
  try {
    s = std::stoi(text.substr(0, comma));
    t = std::stoi(text.substr(comma + 1));
  } catch (const std::exception&) {
    throw ParseError("--treatments: expected 's,t' with integer ids, got '" + text + "'");
  }
  if (s < 1 || s > r || t < 1 || t > r) {
    throw ParseError("--treatments: ids must be in 1.." + std::to_string(r));
  }
  if (s == t) throw ParseError("--treatments: s and t must differ");
  return {s, t};
}

// --------------------------------------------------------------------------
// assign
// --------------------------------------------------------------------------

struct AssignArgs {
  std::string design_path;
  std::optional<std::uint64_t> seed;
  std::string mode = "block";
  std::string output;
};

int run_assign(const AssignArgs& args) {
  const BlockDesign design = parse_design_json(load_json_file(args.design_path));
  const std::uint64_t seed = resolve_seed(args.seed);
  note("assign: seed " + std::to_string(seed) + ", mode " + args.mode + ", " +
       std::to_string(design.total_units()) + " units");
  SplitRng rng(seed);
  const Assignment assignment =
      args.mode == "complete"
          ? sample_complete(design.total_units(), design.num_treatments(), rng)
          : sample_block(design, rng);
  std::ostringstream out;
  write_assignment_csv(out, design, assignment);
  write_output(out.str(), args.output);
  return 0;
}

// --------------------------------------------------------------------------
// estimate
// --------------------------------------------------------------------------

struct EstimateArgs {
  std::string data_path;
  std::string design_path;
  std::string table_path;
  std::string treatments;
  std::string estimator = "both";
  std::string arithmetic = "double";
  bool variance = true;
  std::string format = "json";
  std::string output;
};

template <Field F>
Json estimate_report(const EstimateArgs& args, const BlockDesign& design, int s, int t) {
  std::ifstream in(args.data_path);
  if (!in) throw ParseError("cannot open file: " + args.data_path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string header;
  std::getline(buffer, header);
  const bool has_outcome = header.find("outcome") != std::string::npos;
  buffer.seekg(0);

  ObservedStudy<F> study{design, Assignment{}, {}};
  if (has_outcome) {
    study = read_study_csv<F>(buffer, design, args.data_path);
  } else {
    if (args.table_path.empty()) {
      throw ParseError(args.data_path +
                       ": no outcome column; pass --table to derive outcomes from a "
                       "potential-outcome table");
    }
    const Assignment assignment = read_assignment_csv(buffer, design, args.data_path);
    const auto table = parse_table_json<F>(load_json_file(args.table_path));
    study = observe(table, design, assignment);
  }

  Json estimates = Json::array();
  const auto add = [&](EstimatorKind kind) {
    const SateEstimate<F> estimate = estimate_sate(study, s, t, kind, args.variance);
    Json entry;
    entry["estimator"] = estimator_kind_name(kind);
    entry["s"] = s;
    entry["t"] = t;
    entry["point"] = field_traits<F>::to_double(estimate.point);
    if constexpr (field_traits<F>::exact) {
      entry["point_exact"] = field_traits<F>::to_string(estimate.point);
    }
    Json flags = Json::array();
    if (estimate.variance_estimate) {
      const double variance = field_traits<F>::to_double(*estimate.variance_estimate);
      entry["variance_estimate"] = variance;
      if constexpr (field_traits<F>::exact) {
        entry["variance_estimate_exact"] =
            field_traits<F>::to_string(*estimate.variance_estimate);
      }
      if (variance >= 0.0) {
        entry["se"] = std::sqrt(variance);
      } else {
        entry["se"] = nullptr;
        flags.push_back("negative_variance_estimate");
      }
    }
    entry["flags"] = std::move(flags);
    estimates.push_back(std::move(entry));
  };
  if (args.estimator == "diff" || args.estimator == "both") add(EstimatorKind::Diff);
  if (args.estimator == "ht" || args.estimator == "both") add(EstimatorKind::HT);

  Json report;
  report["schema_version"] = kSchemaVersion;
  report["arithmetic"] = field_traits<F>::name;
  report["design"] = design_to_json(design);
  report["estimates"] = std::move(estimates);
  return report;
}

std::string estimate_text(const Json& report) {
  std::ostringstream out;
  for (const Json& entry : report.at("estimates")) {
    out << entry.at("estimator").get<std::string>() << ": point="
        << entry.at("point").get<double>();
    if (entry.contains("variance_estimate")) {
      out << " variance_estimate=" << entry.at("variance_estimate").get<double>();
      if (!entry.at("se").is_null()) out << " se=" << entry.at("se").get<double>();
    }
    for (const Json& flag : entry.at("flags")) {
      out << " [" << flag.get<std::string>() << "]";
    }
    out << "\n";
  }
  return out.str();
}

int run_estimate(const EstimateArgs& args) {
  const BlockDesign design = parse_design_json(load_json_file(args.design_path));
  const auto [s, t] = parse_treatments(args.treatments, design.num_treatments());
  const Json report = args.arithmetic == "rational"
                          ? estimate_report<Rational>(args, design, s, t)
                          : estimate_report<double>(args, design, s, t);
  write_output(args.format == "text" ? estimate_text(report) : report.dump(2) + "\n",
               args.output);
  return 0;
}

// --------------------------------------------------------------------------
// moments
// --------------------------------------------------------------------------

struct MomentsArgs {
  std::string table_path;
  std::string design_path;
  std::string treatments;
  std::string arithmetic = "double";
  std::string format = "json";
  std::string output;
};

template <Field F>
Json moments_report(const MomentsArgs& args, const BlockDesign& design, int s, int t) {
  const auto table = parse_table_json<F>(load_json_file(args.table_path));
  check_conforms(table, design);
  const PopulationParams<F> params = population_params(table, design);
  const int n = design.total_units();

  const auto emit = [&](Json& target, const char* key, const F& value) {
    target[key] = field_traits<F>::to_double(value);
    if constexpr (field_traits<F>::exact) {
      target[std::string(key) + "_exact"] = field_traits<F>::to_string(value);
    }
  };

  Json report;
  report["schema_version"] = kSchemaVersion;
  report["arithmetic"] = field_traits<F>::name;
  report["treatments"] = Json{{"s", s}, {"t", t}};
  emit(report, "delta", sate_true(table, design, s, t));
  emit(report, "var_diff", var_sate_diff(table, design, s, t));
  emit(report, "var_ht", var_sate_ht(table, design, s, t));
  emit(report, "var_star_diff", var_star(table, design, s, t, EstimatorKind::Diff));
  emit(report, "var_star_ht", var_star(table, design, s, t, EstimatorKind::HT));
  report["constant_shift"] = is_constant_shift(table, design, s, t);

  Json per_block = Json::array();
  for (int c = 0; c < design.num_blocks(); ++c) {
    const int nc = design.block_size(c);
    const BlockDesign single = BlockDesign::single(nc, design.num_treatments());
    const PotentialOutcomeTable<F> slice = block_slice(table, design, c);
    const F weight = fr<F>(nc, n) * fr<F>(nc, n);
    Json entry;
    entry["block"] = c + 1;
    entry["n"] = nc;
    entry["z"] = design.block_remainder(c);
    emit(entry, "mu_s", params.block_mu[c][s - 1]);
    emit(entry, "mu_t", params.block_mu[c][t - 1]);
    emit(entry, "sigma2_s", params.block_sigma2[c][s - 1]);
    emit(entry, "sigma2_t", params.block_sigma2[c][t - 1]);
    emit(entry, "gamma_st", params.block_gamma[c][s - 1][t - 1]);
    emit(entry, "var_diff_term", F(weight * var_sate_diff(slice, single, s, t)));
    emit(entry, "var_ht_term", F(weight * var_sate_ht(slice, single, s, t)));
    emit(entry, "var_star_diff_term",
         F(weight * var_star(slice, single, s, t, EstimatorKind::Diff)));
    emit(entry, "var_star_ht_term",
         F(weight * var_star(slice, single, s, t, EstimatorKind::HT)));
    per_block.push_back(std::move(entry));
  }
  report["per_block"] = std::move(per_block);
  return report;
}

std::string moments_text(const Json& report) {
  std::ostringstream out;
  out << "delta=" << report.at("delta").get<double>()
      << " var_diff=" << report.at("var_diff").get<double>()
      << " var_ht=" << report.at("var_ht").get<double>()
      << " var_star_diff=" << report.at("var_star_diff").get<double>()
      << " var_star_ht=" << report.at("var_star_ht").get<double>() << "\n";
  return out.str();
}

int run_moments(const MomentsArgs& args) {
  const BlockDesign design = parse_design_json(load_json_file(args.design_path));
  const auto [s, t] = parse_treatments(args.treatments, design.num_treatments());
  const Json report = args.arithmetic == "rational"
                          ? moments_report<Rational>(args, design, s, t)
                          : moments_report<double>(args, design, s, t);
  write_output(args.format == "text" ? moments_text(report) : report.dump(2) + "\n",
               args.output);
  return 0;
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

struct VerifyArgs {
  std::string corpus_path;
  std::string identity;
  std::string format = "text";
  std::string output;
};

int run_verify(const VerifyArgs& args) {
  if (!args.identity.empty()) {
    const auto known = known_identities();
    if (std::find(known.begin(), known.end(), args.identity) == known.end()) {
      std::string names;
      for (const auto& name : known) names += "\n  " + name;
      throw ParseError("--identity: unknown identity '" + args.identity + "'; known:" + names);
    }
  }
  const std::vector<CorpusEntry> corpus = args.corpus_path.empty()
                                              ? default_corpus()
                                              : parse_corpus_json(load_json_file(args.corpus_path));
  note("verify: " + std::to_string(corpus.size()) + " corpus entries" +
       (args.identity.empty() ? "" : ", identity " + args.identity));
  VerifyOptions opts;
  opts.identity = args.identity;
  const VerifyReport report = verify_identities(corpus, opts);

  if (args.format == "json") {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    Json identities = Json::array();
    for (const IdentityCheck& check : report.checks) {
      identities.push_back(Json{{"identity", check.identity},
                                {"instance", check.instance},
                                {"lhs", check.lhs},
                                {"rhs", check.rhs},
                                {"pass", check.pass}});
    }
    doc["identities"] = std::move(identities);
    Json by_identity;
    for (const auto& [identity, counts] : report.by_identity()) {
      by_identity[identity] = Json{{"pass", counts.first}, {"fail", counts.second}};
    }
    doc["summary"] = Json{{"total", report.checks.size()},
                          {"failed", report.failures()},
                          {"by_identity", std::move(by_identity)}};
    write_output(doc.dump(2) + "\n", args.output);
  } else {
    std::ostringstream out;
    for (const auto& [identity, counts] : report.by_identity()) {
      out << (counts.second == 0 ? "PASS" : "FAIL") << "  " << identity << "  ("
          << counts.first << " pass, " << counts.second << " fail)\n";
    }
    for (const IdentityCheck& check : report.checks) {
      if (!check.pass) {
        out << "  failed: " << check.identity << " @ " << check.instance << ": " << check.lhs
            << " != " << check.rhs << "\n";
      }
    }
    out << (report.failures() == 0 ? "all identities verified\n"
                                   : std::to_string(report.failures()) + " failures\n");
    write_output(out.str(), args.output);
  }
  std::cerr << "verify: " << report.checks.size() << " checks across "
            << report.by_identity().size() << " identities, " << report.failures()
            << " failures\n";
  return report.failures() == 0 ? 0 : 2;
}

// --------------------------------------------------------------------------
// simulate
// --------------------------------------------------------------------------

struct SimulateArgs {
  std::string table_path;
  std::string design_path;
  std::string treatments;
  long long replications = 100000;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
  std::string output;
};

Json simulation_to_json(const SimulationResult& result) {
  return Json{{"label", result.label},
              {"replications", result.replications},
              {"empirical_mean", result.empirical_mean},
              {"empirical_variance", result.empirical_variance},
              {"mc_standard_error", result.mc_standard_error},
              {"variance_standard_error", result.variance_standard_error}};
}

int run_simulate(const SimulateArgs& args) {
  const BlockDesign design = parse_design_json(load_json_file(args.design_path));
  const auto [s, t] = parse_treatments(args.treatments, design.num_treatments());
  const auto table = parse_table_json<double>(load_json_file(args.table_path));
  check_conforms(table, design);
  const std::uint64_t seed = resolve_seed(args.seed);

  std::vector<Statistic<double>> stats = {stat_sate_diff<double>(s, t),
                                          stat_sate_ht<double>(s, t)};
  const bool estimable = design.min_block_size() >= 2 * design.num_treatments();
  if (estimable) {
    stats.push_back(stat_varhat_sate<double>(EstimatorKind::Diff, s, t));
    stats.push_back(stat_varhat_sate<double>(EstimatorKind::HT, s, t));
  }
  note("simulate: seed " + std::to_string(seed) + ", " + std::to_string(args.replications) +
       " replications, " + std::to_string(stats.size()) + " statistics");
  const std::vector<SimulationResult> results =
      simulate(table, design, stats, args.replications, seed);

  Json report;
  report["schema_version"] = kSchemaVersion;
  report["generator"] = SplitRng::name;
  report["seed"] = seed;
  report["replications"] = args.replications;
  Json statistics = Json::array();
  for (const SimulationResult& result : results) statistics.push_back(simulation_to_json(result));
  report["statistics"] = std::move(statistics);
  report["theory"] = Json{
      {"delta", sate_true(table, design, s, t)},
      {"var_diff", var_sate_diff(table, design, s, t)},
      {"var_ht", var_sate_ht(table, design, s, t)},
      {"var_star_diff", var_star(table, design, s, t, EstimatorKind::Diff)},
      {"var_star_ht", var_star(table, design, s, t, EstimatorKind::HT)},
  };
  report["comparison"] = Json{
      {"empirical_var_diff_minus_var_ht",
       results[0].empirical_variance - results[1].empirical_variance},
  };

  if (args.format == "text") {
    std::ostringstream out;
    for (const SimulationResult& result : results) {
      out << result.label << ": mean=" << result.empirical_mean
          << " variance=" << result.empirical_variance << " se=" << result.mc_standard_error
          << "\n";
    }
    write_output(out.str(), args.output);
  } else {
    write_output(report.dump(2) + "\n", args.output);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blocked randomized experiments under the potential outcomes model"};
  app.require_subcommand(1);
  app.add_flag("--verbose,-v", g_verbose, "progress notes on stderr");

  AssignArgs assign_args;
  CLI::App* assign = app.add_subcommand("assign", "draw one balanced randomized assignment");
  assign->add_option("--design", assign_args.design_path, "design JSON file")->required();
  assign->add_option("--seed", assign_args.seed, "RNG seed (fallback: BLOCKRAND_SEED)");
  assign->add_option("--mode", assign_args.mode, "randomization scope")
      ->check(CLI::IsMember({"block", "complete"}));
  assign->add_option("--output,-o", assign_args.output, "output path (default stdout)");

  EstimateArgs estimate_args;
  CLI::App* estimate = app.add_subcommand("estimate", "point and variance estimates from data");
  estimate->add_option("--data", estimate_args.data_path, "study CSV (or assignment CSV)")
      ->required();
  estimate->add_option("--design", estimate_args.design_path, "design JSON file")->required();
  estimate->add_option("--table", estimate_args.table_path,
                       "potential-outcome table (required when --data has no outcome column)");
  estimate->add_option("--treatments", estimate_args.treatments, "treatment pair s,t")
      ->required();
  estimate->add_option("--estimator", estimate_args.estimator, "which estimator")
      ->check(CLI::IsMember({"diff", "ht", "both"}));
  estimate->add_flag("--variance,!--no-variance", estimate_args.variance,
                     "also estimate the variance (default on)");
  estimate->add_option("--arithmetic", estimate_args.arithmetic, "scalar field")
      ->check(CLI::IsMember({"double", "rational"}));
  estimate->add_option("--format", estimate_args.format, "output format")
      ->check(CLI::IsMember({"json", "text"}));
  estimate->add_option("--output,-o", estimate_args.output, "output path (default stdout)");

  MomentsArgs moments_args;
  CLI::App* moments = app.add_subcommand("moments", "theoretical moments from a full table");
  moments->add_option("--table", moments_args.table_path, "potential-outcome table JSON")
      ->required();
  moments->add_option("--design", moments_args.design_path, "design JSON file")->required();
  moments->add_option("--treatments", moments_args.treatments, "treatment pair s,t")->required();
  moments->add_option("--arithmetic", moments_args.arithmetic, "scalar field")
      ->check(CLI::IsMember({"double", "rational"}));
  moments->add_option("--format", moments_args.format, "output format")
      ->check(CLI::IsMember({"json", "text"}));
  moments->add_option("--output,-o", moments_args.output, "output path (default stdout)");

  VerifyArgs verify_args;
  CLI::App* verify = app.add_subcommand("verify", "certify identities by exact enumeration");
  verify->add_option("--corpus", verify_args.corpus_path, "corpus JSON (default: built-in)");
  verify->add_option("--identity", verify_args.identity, "run a single identity");
  verify->add_option("--format", verify_args.format, "output format")
      ->check(CLI::IsMember({"json", "text"}));
  verify->add_option("--output,-o", verify_args.output, "output path (default stdout)");

  SimulateArgs simulate_args;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo moments of the estimators");
  simulate->add_option("--table", simulate_args.table_path, "potential-outcome table JSON")
      ->required();
  simulate->add_option("--design", simulate_args.design_path, "design JSON file")->required();
  simulate->add_option("--treatments", simulate_args.treatments, "treatment pair s,t")
      ->required();
  simulate->add_option("--replications,-R", simulate_args.replications, "number of draws")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", simulate_args.seed, "RNG seed (fallback: BLOCKRAND_SEED)");
  simulate->add_option("--format", simulate_args.format, "output format")
      ->check(CLI::IsMember({"json", "text"}));
  simulate->add_option("--output,-o", simulate_args.output, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (assign->parsed()) return run_assign(assign_args);
    if (estimate->parsed()) return run_estimate(estimate_args);
    if (moments->parsed()) return run_moments(moments_args);
    if (verify->parsed()) return run_verify(verify_args);
    if (simulate->parsed()) return run_simulate(simulate_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
