// hmcfs: build, simulate, filter and verify finite hidden Markov models.
//
// Exit codes: 0 ok / all checks passed, 1 a verification check failed,
// 2 usage or validation error, 3 impossible observation, 4 atom budget exceeded.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hmcfs/io.hpp"
#include "hmcfs/simulate.hpp"

using namespace hmcfs;

namespace {

enum Exit { ok = 0, check_failed = 1, usage = 2, impossible = 3, budget = 4 };

struct Options {
  std::string model;
  std::string obs;
  std::string what = "q";
  bool exact = false;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  int replicates = 1;
  std::string obs_out;
  std::string route = "native";
  std::string on_impossible = "error";
  int horizon = 3;
  std::string suite = "all";
};

void emit(const json& j) { std::cout << j.dump() << '\n'; }

template <typename T, typename Model>
std::optional<HmcModel<T>> hmc_view(const Model& model) {
  if constexpr (std::is_same_v<Model, HmcModel<T>>) return model;
  else return as_hmc<T>(model);
}

template <typename T>
HmcModel<T> require_hmc(const AnyModel<T>& any, const std::string& why) {
  auto hmc = std::visit([](const auto& m) { return hmc_view<T>(m); }, any);
  if (!hmc) throw ValidationError("type", "", why + " needs a model that is a hidden Markov chain");
  return *hmc;
}

// ---------------------------------------------------------------------------
// build

template <typename T>
int build(const Options& o) {
  const auto any = load_model<T>(o.model);
  if (o.what == "q") {
    if (const auto* sp = std::get_if<SigmaPModel<T>>(&any)) {
      emit(matrix_to_json(Mat<T>(sp->stacked() * x_selector<T>(sp->n(), sp->m()))));
      return ok;
    }
    emit(matrix_to_json(build_q(require_hmc(any, "--what q"))));
  } else if (o.what == "r") {
    if (const auto* ss = std::get_if<SigmaSModel<T>>(&any)) {
      emit(matrix_to_json(Mat<T>(ss->stacked() * x_selector<T>(ss->n(), ss->m()))));
      return ok;
    }
    emit(matrix_to_json(build_r(require_hmc(any, "--what r"))));
  } else if (o.what == "sigma-p") {
    if (const auto* sp = std::get_if<SigmaPModel<T>>(&any)) emit(to_json(*sp));
    else emit(to_json(hmc_to_sigma_p(require_hmc(any, "--what sigma-p"))));
  } else if (o.what == "sigma-s") {
    if (const auto* ss = std::get_if<SigmaSModel<T>>(&any)) emit(to_json(*ss));
    else emit(to_json(hmc_to_sigma_s(require_hmc(any, "--what sigma-s"))));
  } else {
    const Mat<T> a = std::visit(
        [](const auto& m) -> Mat<T> {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, HmcModel<T>>) return m.A();
          else if constexpr (std::is_same_v<M, SigmaPModel<T>>) return sigma_p_marginals(m).A;
          else return sigma_s_marginals(m).A;
        },
        any);
    const auto inv = invariant_distribution(StochMatrix<T>(a, "A"));
    json out{{"pi", to_json(inv.pi)}, {"unique", inv.unique}, {"closed_classes", inv.closed_classes}};
    if (const auto* h = std::get_if<HmcModel<T>>(&any)) out["z_invariant"] = to_json(Vec<T>(delta(h->G()) * inv.pi));
    emit(out);
  }
  return ok;
}

// ---------------------------------------------------------------------------
// simulate

std::string replicate_path(const std::string& base, int r, int replicates) {
  if (replicates == 1) return base;
  std::filesystem::path p(base);
  return (p.parent_path() / (p.stem().string() + "_" + std::to_string(r) + p.extension().string())).string();
}

int simulate(const Options& o) {
  if (o.steps < 0) throw ValidationError("steps", "", "must be >= 0");
  if (o.replicates < 1) throw ValidationError("replicates", "", "must be >= 1");
  const auto any = load_model<double>(o.model);
  const RngState root(o.seed);
  std::cout << "replicate,t,x,y\n";
  for (int r = 1; r <= o.replicates; ++r) {
    RngState rng = root.derive(static_cast<std::uint64_t>(r - 1));
    const PathSample s = std::visit(
        [&](const auto& m) -> PathSample {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, HmcModel<double>>) return sample_hmc(m, o.steps, rng);
          else if constexpr (std::is_same_v<M, SigmaPModel<double>>) return sample_sigma_p(m, o.steps, rng);
          else return sample_sigma_s(m, o.steps, rng);
        },
        any);
    for (std::size_t t = 0; t < s.x.size(); ++t) {
      std::cout << r << ',' << t << ',' << s.x[t] + 1 << ',';
      if (t < s.y.size()) std::cout << s.y[t] + 1;
      std::cout << '\n';
    }
    if (!o.obs_out.empty()) {
      std::ofstream f(replicate_path(o.obs_out, r, o.replicates));
      if (!f) throw ValidationError("obs-out", "", "cannot write " + o.obs_out);
      f << "t,y\n";
      for (std::size_t t = 0; t < s.y.size(); ++t) f << t << ',' << s.y[t] + 1 << '\n';
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------
// filter

template <typename T>
int filter(const Options& o) {
  const auto any = load_model<T>(o.model);
  const int m = std::visit([](const auto& mod) { return static_cast<int>(mod.m()); }, any);
  const auto ys = read_observations_file(o.obs, m);
  const auto policy = o.on_impossible == "error" ? ImpossiblePolicy::error : ImpossiblePolicy::uniform_reset;
  const Route route = o.route == "native" ? Route::native : o.route == "sigma-p" ? Route::sigma_p : Route::sigma_s;

  FilterRun<T> run;
  if (const auto* h = std::get_if<HmcModel<T>>(&any)) {
    run = run_filter(*h, ys, route, policy);
  } else if (const auto* sp = std::get_if<SigmaPModel<T>>(&any); sp && route != Route::sigma_s) {
    run = run_filter(*sp, ys, policy);
  } else if (const auto* ss = std::get_if<SigmaSModel<T>>(&any); ss && route != Route::sigma_p) {
    run = run_filter(*ss, ys, policy);
  } else {
    run = run_filter(require_hmc(any, "--route " + o.route), ys, route, policy);
  }

  std::size_t resets = 0;
  for (const auto& s : run.states) {
    emit(to_json(s));
    if (s.reset) ++resets;
  }
  json total{{"total", true}, {"steps", run.states.size()}, {"resets", resets}};
  total["loglik"] = std::isfinite(run.loglik) ? json(run.loglik) : json(nullptr);
  total["likelihood"] = ScalarTraits<T>::format(run.likelihood);
  emit(total);
  return ok;
}

// ---------------------------------------------------------------------------
// verify

Report lemma_suite(const FiniteSpace& space) {
  const int last = static_cast<int>(std::min(space.x_length(), space.y_length())) - 1;
  Report r;
  // Bayes step of the filter: condition X_T on past outputs, split by Y_T.
  r.append(lemma_a1_check(space, state_indicator(space, last), partition_fy(space, last - 1),
                          partition_y_at(space, last)),
           "lemma_a1.filter.");
  // Joint state/output given the full past, split by the current state.
  r.append(lemma_a1_check(space, joint_indicator(space, last), partition_f(space, last - 1),
                          partition_x_at(space, last)),
           "lemma_a1.joint.");
  return r;
}

int verify(const Options& o) {
  if (o.horizon < 0) throw ValidationError("horizon", "", "must be >= 0");
  const auto any = load_model<Rational>(o.model);
  const bool want_thm = o.suite == "theorem-3-5" || o.suite == "all";
  const bool want_lemma = o.suite == "lemma-a1" || o.suite == "all";
  const std::uint64_t budget_limit = atom_budget();

  Report report;
  json clauses;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        FiniteSpace space = [&] {
          if constexpr (std::is_same_v<M, HmcModel<Rational>>) return enumerate_hmc(m, o.horizon, budget_limit);
          else if constexpr (std::is_same_v<M, SigmaPModel<Rational>>)
            return enumerate_sigma_p(m, o.horizon, budget_limit);
          else return marginalize(enumerate_sigma_s(m, o.horizon + 1, budget_limit), o.horizon + 1, o.horizon + 1);
        }();
        if (want_thm) {
          EquivalenceReport eq = [&] {
            if constexpr (std::is_same_v<M, HmcModel<Rational>>) return theorem_3_5_suite(m, o.horizon, budget_limit);
            else return theorem_3_5_suite(space);
          }();
          report.append(eq.report, "theorem_3_5.");
          clauses = json{{"a", eq.a}, {"b", eq.b}, {"c", eq.c}, {"d", eq.d}, {"e", eq.e}};
          if (o.suite == "all") report.append(verify_output_properties(space), "output.");
          if constexpr (std::is_same_v<M, SigmaPModel<Rational>>)
            report.append(verify_sigma_p_membership(space), "membership.");
          if constexpr (std::is_same_v<M, SigmaSModel<Rational>>)
            report.append(verify_sigma_s_membership(enumerate_sigma_s(m, o.horizon + 1, budget_limit)),
                          "membership.");
        }
        if (want_lemma && o.horizon >= 1) report.append(lemma_suite(space));
      },
      any);

  json out = to_json(report);
  out["suite"] = o.suite;
  out["horizon"] = o.horizon;
  if (!clauses.is_null()) out["clauses"] = clauses;
  emit(out);
  return report.passed() ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite hidden Markov chains and stochastic systems: build, simulate, filter, verify."};
  app.require_subcommand(1);
  Options o;

  auto* build_cmd = app.add_subcommand("build", "Print Q, R, a converted model or the invariant vector");
  build_cmd->add_option("model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--what", o.what, "What to build")
      ->check(CLI::IsMember({"q", "r", "sigma-p", "sigma-s", "invariant"}));
  build_cmd->add_flag("--exact", o.exact, "Exact rational arithmetic");

  auto* sim_cmd = app.add_subcommand("simulate", "Sample trajectories as CSV (replicate,t,x,y)");
  sim_cmd->add_option("model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--steps", o.steps, "Horizon T (paths have T+1 states)")->required();
  sim_cmd->add_option("--seed", o.seed, "RNG seed");
  sim_cmd->add_option("--replicates", o.replicates, "Independent replicates (derived streams)");
  sim_cmd->add_option("--obs-out", o.obs_out, "Also write the outputs as a t,y observation file");

  auto* filter_cmd = app.add_subcommand("filter", "Run the recursive filter, NDJSON per time step");
  filter_cmd->add_option("model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("obs", o.obs, "Observation CSV (t,y)")->required()->check(CLI::ExistingFile);
  filter_cmd->add_flag("--exact", o.exact, "Exact rational arithmetic");
  filter_cmd->add_option("--route", o.route, "Recursion to use")
      ->check(CLI::IsMember({"native", "sigma-p", "sigma-s"}));
  filter_cmd->add_option("--on-impossible", o.on_impossible, "Zero-probability observation policy")
      ->check(CLI::IsMember({"error", "uniform-reset"}));

  auto* verify_cmd = app.add_subcommand("verify", "Check structural properties by exact enumeration");
  verify_cmd->add_option("model", o.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--horizon", o.horizon, "Horizon T");
  verify_cmd->add_option("--suite", o.suite, "Which checks")
      ->check(CLI::IsMember({"theorem-3-5", "lemma-a1", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    if (*build_cmd) return o.exact ? build<Rational>(o) : build<double>(o);
    if (*sim_cmd) return simulate(o);
    if (*filter_cmd) return o.exact ? filter<Rational>(o) : filter<double>(o);
    if (*verify_cmd) return verify(o);
  } catch (const ImpossibleObservation& e) {
    std::cerr << "hmcfs: " << e.what() << '\n';
    return impossible;
  } catch (const BudgetExceeded& e) {
    std::cerr << "hmcfs: " << e.what() << '\n';
    return budget;
  } catch (const Error& e) {
    std::cerr << "hmcfs: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "hmcfs: " << e.what() << '\n';
    return usage;
  }
  return usage;
}
