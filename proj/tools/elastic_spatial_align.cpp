#include "esa/error.hpp"
#include "esa/eval.hpp"
#include "esa/io.hpp"
#include "esa/simgen.hpp"
#include "esa/spatial_registration.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag value if given, else the config file's entry, else the default.
template <class T>
T resolve(const std::optional<T>& flag, const json& cfg, const char* key, const T& fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw esa::InvalidParameter(std::string("config entry '") + key + "': " + e.what());
    }
  }
  return fallback;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    json j = json::parse(esa::read_file(path));
    if (!j.is_object()) throw esa::InvalidInput("config file " + path + " must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw esa::InvalidInput("config file " + path + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { esa::write_file_atomic(path, j.dump(2) + "\n"); }

json number_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

// ---- simulate ----------------------------------------------------------------

struct SimOptions {
  std::string config;
  std::string out;
  std::optional<int> setting;
  std::optional<std::size_t> n, K, m;
  std::optional<double> Z, B, sigma_a, sigma_e, range_factor, presmooth;
  std::optional<std::uint64_t> seed;
};

void add_sim(CLI::App* app, SimOptions& o) {
  app->add_option("--config", o.config, "JSON config file (flags override it)");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--setting", o.setting, "Simulation setting (1 or 2)");
  app->add_option("--n", o.n, "Observations");
  app->add_option("--K", o.K, "Components (sites)");
  app->add_option("--m", o.m, "Grid size");
  app->add_option("--Z", o.Z, "Cross-observation phase scale");
  app->add_option("--B", o.B, "Cross-component phase scale");
  app->add_option("--sigma-a", o.sigma_a, "Template amplitude scale");
  app->add_option("--sigma-e", o.sigma_e, "Noise scale");
  app->add_option("--range-factor", o.range_factor, "Matern range as a fraction of d_max");
  app->add_option("--presmooth", o.presmooth, "Also write a smoothed copy with this strength");
  app->add_option("--seed", o.seed, "Random seed");
}

int cmd_simulate(const SimOptions& o) {
  const json cfg = load_config(o.config);
  const std::string out = resolve<std::string>(o.out.empty() ? std::nullopt : std::optional(o.out), cfg, "out", "");
  if (out.empty()) throw esa::InvalidParameter("simulate: --out is required");
  esa::SimConfig c = esa::SimConfig::defaults(resolve(o.setting, cfg, "setting", 1));
  c.n = resolve(o.n, cfg, "n", c.n);
  c.K = resolve(o.K, cfg, "K", c.K);
  c.m = resolve(o.m, cfg, "m", c.m);
  c.Z = resolve(o.Z, cfg, "Z", c.Z);
  c.B = resolve(o.B, cfg, "B", c.B);
  c.sigma_a = resolve(o.sigma_a, cfg, "sigma_a", c.sigma_a);
  c.sigma_e = resolve(o.sigma_e, cfg, "sigma_e", c.sigma_e);
  c.range_factor = resolve(o.range_factor, cfg, "range_factor", c.range_factor);
  c.presmooth = resolve(o.presmooth, cfg, "presmooth", c.presmooth);
  c.seed = resolve(o.seed, cfg, "seed", c.seed);

  const esa::SimTruth truth = esa::simulate(c);
  const fs::path dir(out);
  esa::write_file_atomic(dir / "sample.csv", esa::panel_csv(truth.sample.funcs));
  esa::write_file_atomic(dir / "sites.csv", esa::sites_csv(truth.sample.layout, truth.sample.labels));
  if (truth.smoothed) esa::write_file_atomic(dir / "sample_smoothed.csv", esa::panel_csv(truth.smoothed->funcs));
  esa::write_file_atomic(dir / "truth" / "templates.csv", esa::functions_csv(truth.templates));
  esa::write_file_atomic(dir / "truth" / "warps.csv", esa::warps_csv(truth.gamma));
  esa::write_file_atomic(dir / "truth" / "xi.csv", esa::warps_csv(truth.xi));
  esa::write_file_atomic(dir / "truth" / "alpha.csv", esa::observation_warps_csv(truth.alpha));
  esa::write_file_atomic(dir / "truth" / "noise.csv", esa::panel_csv(truth.noise));

  json eff = {{"command", "simulate"},     {"setting", c.setting}, {"n", c.n},
              {"K", c.K},                  {"m", c.m},             {"Z", c.Z},
              {"B", c.B},                  {"sigma_a", c.sigma_a}, {"sigma_e", c.sigma_e},
              {"range_factor", c.range_factor}, {"presmooth", c.presmooth}, {"seed", c.seed},
              {"range", truth.range},      {"low_snr", truth.low_snr}};
  write_json(dir / "config.json", eff);
  std::cout << "simulated setting " << c.setting << ": n=" << c.n << " K=" << c.K << " m=" << c.m
            << " seed=" << c.seed << " -> " << dir.string() << "\n";
  if (truth.low_snr && c.presmooth == 0.0)
    std::cout << "note: low signal-to-noise run; consider --presmooth 1e-5\n";
  return 0;
}

// ---- registration options shared by register and cv ----------------------------

struct RegOptions {
  std::string config;
  std::string out;
  std::string sample;
  std::string sites;
  std::optional<std::string> method;
  std::optional<double> lambda;
  bool cv = false;
  std::optional<std::vector<double>> lambda_grid;
  std::optional<std::size_t> folds;
  std::optional<std::uint64_t> seed;
  std::optional<double> presmooth;
  std::optional<int> max_outer, max_inner, max_slope;
  std::optional<double> outer_tol, inner_tol;
  bool no_stopping = false;
  std::optional<std::string> init_template;
};

void add_reg(CLI::App* app, RegOptions& o, bool with_lambda) {
  app->add_option("--config", o.config, "JSON config file (flags override it)");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--sample", o.sample, "Long-format panel CSV (i,j,t,value)");
  app->add_option("--sites", o.sites, "Site CSV (j,x,y[,z])");
  app->add_option("--method", o.method, "none | componentwise | universal | spatial");
  if (with_lambda) {
    app->add_option("--lambda", o.lambda, "Penalty weight");
    app->add_flag("--cv", o.cv, "Select lambda by cross-validation first");
  }
  app->add_option("--lambda-grid", o.lambda_grid, "Lambda values for cross-validation")->delimiter(',');
  app->add_option("--folds", o.folds, "Cross-validation folds");
  app->add_option("--seed", o.seed, "Fold assignment seed");
  app->add_option("--presmooth", o.presmooth, "Smooth the input with this strength before registering");
  app->add_option("--max-outer", o.max_outer, "Outer iteration cap (spatial)");
  app->add_option("--max-inner", o.max_inner, "Inner sweep cap (spatial)");
  app->add_option("--outer-tol", o.outer_tol, "Relative template tolerance (spatial)");
  app->add_option("--inner-tol", o.inner_tol, "Phase change tolerance (spatial)");
  app->add_flag("--no-stopping", o.no_stopping, "Run every outer and inner iteration (spatial)");
  app->add_option("--init-template", o.init_template, "aligned | raw_mean (spatial)");
  app->add_option("--max-slope", o.max_slope, "DP slopes: coprime pairs up to this step");
}

struct RegSetup {
  esa::MvSample sample;
  esa::Method method = esa::Method::kSpatial;
  double lambda = 1.0;
  bool cv = false;
  std::vector<double> grid;
  std::size_t folds = 4;
  std::uint64_t seed = 1;
  double presmooth = 0.0;
  esa::SpatialRegConfig cfg;
  fs::path out;
  json effective;
};

RegSetup setup_registration(const RegOptions& o, const char* command) {
  const json cfg = load_config(o.config);
  auto str = [&](const std::string& flag, const char* key) {
    return resolve<std::string>(flag.empty() ? std::nullopt : std::optional(flag), cfg, key, "");
  };
  RegSetup s;
  const std::string out = str(o.out, "out");
  const std::string sample = str(o.sample, "sample");
  const std::string sites = str(o.sites, "sites");
  if (out.empty()) throw esa::InvalidParameter(std::string(command) + ": --out is required");
  if (sample.empty() || sites.empty()) throw esa::InvalidParameter(std::string(command) + ": --sample and --sites are required");
  s.out = out;
  const std::string method = resolve<std::string>(o.method, cfg, "method", "spatial");
  s.method = esa::parse_method(method);
  s.lambda = resolve(o.lambda, cfg, "lambda", 1.0);
  s.cv = o.cv || (cfg.contains("cv") && cfg.at("cv").get<bool>());
  s.grid = resolve(o.lambda_grid, cfg, "lambda_grid", esa::default_lambda_grid());
  s.folds = resolve(o.folds, cfg, "folds", std::size_t{4});
  s.seed = resolve(o.seed, cfg, "seed", std::uint64_t{1});
  s.presmooth = resolve(o.presmooth, cfg, "presmooth", 0.0);
  s.cfg.max_outer = resolve(o.max_outer, cfg, "max_outer", s.cfg.max_outer);
  s.cfg.max_inner = resolve(o.max_inner, cfg, "max_inner", s.cfg.max_inner);
  s.cfg.outer_tol = resolve(o.outer_tol, cfg, "outer_tol", s.cfg.outer_tol);
  s.cfg.inner_tol = resolve(o.inner_tol, cfg, "inner_tol", s.cfg.inner_tol);
  s.cfg.stopping_rules = !(o.no_stopping || (cfg.contains("no_stopping") && cfg.at("no_stopping").get<bool>()));
  const std::string init = resolve<std::string>(o.init_template, cfg, "init_template", "aligned");
  if (init == "aligned") {
    s.cfg.init_template = esa::InitTemplate::kAligned;
  } else if (init == "raw_mean") {
    s.cfg.init_template = esa::InitTemplate::kRawMean;
  } else {
    throw esa::InvalidParameter("--init-template must be aligned or raw_mean");
  }
  const int slope = resolve(o.max_slope, cfg, "max_slope", 4);
  if (slope < 1 || slope > 12) throw esa::InvalidParameter("--max-slope must lie in 1..12");
  s.cfg.dp.slopes = esa::DpConfig::coprime_slopes(slope);
  s.cfg.lambda = s.lambda;
  s.cfg.validate();

  s.sample = esa::read_sample(sample, sites);
  if (s.presmooth > 0.0) s.sample = esa::presmooth(s.sample, s.presmooth);

  s.effective = {{"command", command},
                 {"sample", sample},
                 {"sites", sites},
                 {"method", esa::method_name(s.method)},
                 {"lambda", s.lambda},
                 {"cv", s.cv},
                 {"lambda_grid", s.grid},
                 {"folds", s.folds},
                 {"seed", s.seed},
                 {"presmooth", s.presmooth},
                 {"max_outer", s.cfg.max_outer},
                 {"max_inner", s.cfg.max_inner},
                 {"outer_tol", s.cfg.outer_tol},
                 {"inner_tol", s.cfg.inner_tol},
                 {"no_stopping", !s.cfg.stopping_rules},
                 {"init_template", init},
                 {"max_slope", slope}};
  return s;
}

json cv_json(const esa::CvReport& r) {
  json per = json::array();
  for (const auto& row : r.per_fold) per.push_back(number_array(row));
  return {{"method", r.method},          {"lambdas", number_array(r.lambdas)}, {"criterion", number_array(r.criterion)},
          {"per_fold", per},             {"selected_lambda", r.selected},       {"selected_index", r.selected_index},
          {"fold_of", r.fold_of},        {"seed", r.seed}};
}

std::string cv_csv(const esa::CvReport& r) {
  std::string s = "lambda,fold,value\n";
  for (std::size_t l = 0; l < r.lambdas.size(); ++l) {
    for (std::size_t f = 0; f < r.per_fold[l].size(); ++f)
      s += esa::format_double(r.lambdas[l]) + ',' + std::to_string(f) + ',' + esa::format_double(r.per_fold[l][f]) + '\n';
    s += esa::format_double(r.lambdas[l]) + ",total," + esa::format_double(r.criterion[l]) + '\n';
  }
  return s;
}

json kriging_json(const esa::SpatialRegResult& res, const esa::SpatialInit* init) {
  json out = json::array();
  for (std::size_t i = 0; i < res.weights.size(); ++i) {
    json rows = json::array();
    for (const auto& row : res.weights[i].rows) {
      rows.push_back({{"target", row.target}, {"neighbors", row.neighbors}, {"weights", number_array(row.weights)}});
    }
    json entry = {{"i", i}, {"rows", rows}};
    if (init != nullptr) {
      const auto& m = init->models[i];
      entry["uniform_fallback"] = static_cast<bool>(init->uniform_fallback[i]);
      entry["model"] = {{"family", "exponential"}, {"nugget", m.nugget}, {"sill", m.sill}, {"range", m.range},
                        {"degenerate", m.degenerate}};
    }
    out.push_back(entry);
  }
  return out;
}

int cmd_register(const RegOptions& o) {
  RegSetup s = setup_registration(o, "register");
  std::optional<esa::SpatialInit> init;
  json diag = json::object();
  if (s.method == esa::Method::kSpatial) init = esa::initialize_spatial(s.sample, s.cfg);
  if (s.cv) {
    const esa::CvReport rep = esa::cross_validate_lambda(s.sample, s.grid, s.method, s.folds, s.seed, s.cfg);
    s.lambda = rep.selected;
    write_json(s.out / "cv_report.json", cv_json(rep));
    esa::write_file_atomic(s.out / "cv.csv", cv_csv(rep));
    diag["cv"] = cv_json(rep);
  }
  s.effective["lambda"] = s.lambda;
  const esa::MethodOutput out = esa::run_method(s.sample, s.method, s.lambda, s.cfg, init ? &*init : nullptr);

  esa::write_file_atomic(s.out / "templates.csv", esa::functions_csv(out.templates));
  esa::write_file_atomic(s.out / "template_srsf.csv", [&] {
    std::vector<esa::SampledFunction> q;
    for (const auto& t : out.template_srsf) q.emplace_back(t.grid(), t.values());
    return esa::functions_csv(q);
  }());
  if (s.method == esa::Method::kUniversal) {
    std::vector<esa::Warp> w;
    for (const auto& row : out.warps) w.push_back(row.front());
    esa::write_file_atomic(s.out / "warps.csv", esa::observation_warps_csv(w));
  } else {
    esa::write_file_atomic(s.out / "warps.csv", esa::warps_csv(out.warps));
  }
  esa::write_file_atomic(s.out / "aligned.csv", esa::panel_csv(out.aligned));

  diag["method"] = esa::method_name(s.method);
  diag["lambda"] = s.lambda;
  diag["n"] = s.sample.n();
  diag["K"] = s.sample.components();
  diag["m"] = s.sample.grid().size();
  diag["iterations"] = out.iterations;
  json conv = json::array();
  for (bool c : out.converged) conv.push_back(c);
  diag["converged"] = conv;
  json traces = json::array();
  for (const auto& t : out.cost_traces) traces.push_back(number_array(t));
  diag["cost_traces"] = traces;
  if (out.spatial) {
    const auto& r = *out.spatial;
    diag["spatial"] = {{"cost_trace", number_array(r.cost_trace)},
                       {"inner_cost_trace", number_array(r.inner_cost_trace)},
                       {"delta_trace", number_array(r.delta_trace)},
                       {"update_iterations", r.update_iterations},
                       {"template_change", number_array(r.template_change)},
                       {"outer_iterations", r.outer_iterations},
                       {"inner_iterations", r.inner_iterations},
                       {"converged", r.converged},
                       {"kriging", kriging_json(r, init ? &*init : nullptr)}};
  }
  diag["warnings"] = out.warnings;
  write_json(s.out / "diagnostics.json", diag);
  write_json(s.out / "config.json", s.effective);
  std::cout << "registered " << s.sample.n() << " x " << s.sample.components() << " functions with "
            << esa::method_name(s.method) << " (lambda=" << esa::format_double(s.lambda) << ") -> " << s.out.string()
            << "\n";
  return 0;
}

int cmd_cv(const RegOptions& o) {
  RegSetup s = setup_registration(o, "cv");
  const esa::CvReport rep = esa::cross_validate_lambda(s.sample, s.grid, s.method, s.folds, s.seed, s.cfg);
  write_json(s.out / "cv_report.json", cv_json(rep));
  esa::write_file_atomic(s.out / "cv.csv", cv_csv(rep));
  s.effective.erase("lambda");
  s.effective.erase("cv");
  write_json(s.out / "config.json", s.effective);
  std::cout << "selected lambda " << esa::format_double(rep.selected) << " -> " << s.out.string() << "\n";
  return 0;
}

// ---- evaluate ------------------------------------------------------------------

struct EvalOptions {
  std::string config;
  std::string out;
  std::string run;
  std::string truth;
  std::string sites;
};

int cmd_evaluate(const EvalOptions& o) {
  const json cfg = load_config(o.config);
  auto str = [&](const std::string& flag, const char* key) {
    return resolve<std::string>(flag.empty() ? std::nullopt : std::optional(flag), cfg, key, "");
  };
  const std::string out = str(o.out, "out");
  const std::string run = str(o.run, "run");
  const std::string truth = str(o.truth, "truth");
  std::string sites = str(o.sites, "sites");
  if (out.empty() || run.empty()) throw esa::InvalidParameter("evaluate: --run and --out are required");
  const fs::path run_dir(run);
  const std::vector<esa::SampledFunction> templates = esa::read_functions_csv(run_dir / "templates.csv");

  json metrics = json::object();
  if (fs::exists(run_dir / "config.json")) {
    const json rc = json::parse(esa::read_file(run_dir / "config.json"));
    if (rc.contains("method")) metrics["method"] = rc["method"];
    if (rc.contains("lambda")) metrics["lambda"] = rc["lambda"];
  }
  if (!truth.empty()) {
    const fs::path tdir(truth);
    if (!fs::exists(tdir / "truth" / "templates.csv"))
      throw esa::InvalidInput("evaluate: no truth/templates.csv under " + truth);
    const std::vector<esa::SampledFunction> mu = esa::read_functions_csv(tdir / "truth" / "templates.csv");
    if (mu.size() != templates.size()) throw esa::InvalidInput("evaluate: template count differs from truth");
    esa::MethodOutput mo;
    mo.templates = templates;
    if (fs::exists(run_dir / "template_srsf.csv")) {
      for (const auto& q : esa::read_functions_csv(run_dir / "template_srsf.csv")) mo.template_srsf.emplace_back(q.grid(), q.values());
    } else {
      for (const auto& t : templates) mo.template_srsf.push_back(esa::srsf_transform(t));
    }
    const esa::MetricReport r = esa::evaluate_templates(mo, mu);
    metrics["mse"] = r.mse;
    metrics["qmse"] = r.qmse;
    metrics["mse_by_component"] = number_array(r.mse_by_component);
    metrics["qmse_by_component"] = number_array(r.qmse_by_component);
    if (sites.empty()) sites = (tdir / "sites.csv").string();
  } else {
    metrics["mse"] = nullptr;
    metrics["qmse"] = nullptr;
    metrics["note"] = "no --truth given; MSE and QMSE need the true templates";
  }
  if (sites.empty()) throw esa::InvalidParameter("evaluate: --sites is required without --truth");
  const esa::SiteTable st = esa::read_sites_csv(sites);
  const esa::VariogramBins bins = esa::VariogramBins::standard(st.layout);
  const esa::EmpiricalVariogram emp = esa::template_trace_variogram(templates, st.layout, bins);
  std::optional<esa::VariogramModel> model;
  try {
    model = esa::fit_variogram(emp);
  } catch (const esa::InvalidInput&) {
    model.reset();
  }
  esa::write_file_atomic(fs::path(out) / "variogram.csv", esa::variogram_csv(emp, model));
  metrics["variogram_bins"] = emp.size();
  write_json(fs::path(out) / "metrics.json", metrics);
  write_json(fs::path(out) / "config.json",
             {{"command", "evaluate"}, {"run", run}, {"truth", truth}, {"sites", sites}});
  if (metrics["mse"].is_number()) {
    std::cout << "MSE " << esa::format_double(metrics["mse"].get<double>()) << "  QMSE "
              << esa::format_double(metrics["qmse"].get<double>()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elastic registration of multivariate functional data with spatially correlated phase"};
  app.require_subcommand(1);
  SimOptions sim;
  RegOptions reg;
  RegOptions cv;
  EvalOptions ev;
  add_sim(app.add_subcommand("simulate", "Generate a seeded simulation run"), sim);
  add_reg(app.add_subcommand("register", "Register a sample"), reg, true);
  add_reg(app.add_subcommand("cv", "Cross-validate lambda"), cv, false);
  CLI::App* eva = app.add_subcommand("evaluate", "Score estimated templates");
  eva->add_option("--config", ev.config, "JSON config file (flags override it)");
  eva->add_option("--out", ev.out, "Output directory");
  eva->add_option("--run", ev.run, "Directory written by register");
  eva->add_option("--truth", ev.truth, "Directory written by simulate");
  eva->add_option("--sites", ev.sites, "Site CSV (defaults to the truth directory's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(sim);
    if (app.got_subcommand("register")) return cmd_register(reg);
    if (app.got_subcommand("cv")) return cmd_cv(cv);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(ev);
  } catch (const esa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
