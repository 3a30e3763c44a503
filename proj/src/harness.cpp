#include "magss/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "magss/errors.hpp"

namespace magss::harness {

namespace fs = std::filesystem;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
  if (!obj.is_object())
    throw ConfigError(context + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

double get_num(const json& p, const char* key, double def) {
  if (!p.contains(key)) return def;
  if (!p[key].is_number())
    throw ConfigError(std::string("field '") + key + "' must be a number");
  return p[key].get<double>();
}

long get_int(const json& p, const char* key, long def) {
  if (!p.contains(key)) return def;
  if (!p[key].is_number_integer())
    throw ConfigError(std::string("field '") + key + "' must be an integer");
  return p[key].get<long>();
}

std::string get_str(const json& p, const char* key, const std::string& def) {
  if (!p.contains(key)) return def;
  if (!p[key].is_string())
    throw ConfigError(std::string("field '") + key + "' must be a string");
  return p[key].get<std::string>();
}

Eigen::VectorXd get_vec(const json& p, const char* key,
                        const Eigen::VectorXd& def) {
  if (!p.contains(key)) return def;
  if (!p[key].is_array())
    throw ConfigError(std::string("field '") + key + "' must be an array");
  Eigen::VectorXd v(p[key].size());
  Eigen::Index i = 0;
  for (const auto& e : p[key]) {
    if (!e.is_number())
      throw ConfigError(std::string("field '") + key + "' must hold numbers");
    v[i++] = e.get<double>();
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ----------------------------------------------------------------- config

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc,
             {"schema_version", "target", "sampler", "metric", "integrator",
              "slice", "n_chains", "n_samples", "burn_in", "thinning", "seed",
              "init", "output_dir", "workers", "ksd_max_samples"},
             "config");
  ExperimentConfig cfg;
  const long version = get_int(doc, "schema_version", -1);
  if (version != 1)
    throw ConfigError("config field 'schema_version' must be present and equal to 1");
  if (!doc.contains("seed"))
    throw ConfigError("config field 'seed' is required (no wall-clock seeding)");
  if (!doc["seed"].is_number_integer())
    throw ConfigError("field 'seed' must be an integer");
  cfg.seed = doc["seed"].get<std::uint64_t>();

  if (!doc.contains("target")) throw ConfigError("config field 'target' is required");
  check_keys(doc["target"], {"name", "params"}, "target");
  cfg.target_name = get_str(doc["target"], "name", "");
  if (cfg.target_name.empty()) throw ConfigError("target.name is required");
  if (doc["target"].contains("params")) cfg.target_params = doc["target"]["params"];

  if (doc.contains("sampler")) {
    check_keys(doc["sampler"], {"name", "params"}, "sampler");
    cfg.sampler_name = get_str(doc["sampler"], "name", "magss");
    if (doc["sampler"].contains("params")) cfg.sampler_params = doc["sampler"]["params"];
  }
  if (doc.contains("metric")) {
    check_keys(doc["metric"], {"name", "params"}, "metric");
    cfg.metric_name = get_str(doc["metric"], "name", "euclidean");
    if (doc["metric"].contains("params")) cfg.metric_params = doc["metric"]["params"];
  }
  if (doc.contains("integrator")) {
    const json& ij = doc["integrator"];
    check_keys(ij,
               {"kind", "h", "rtol", "atol", "h_max", "max_steps_per_unit", "t_max",
                "state_cap"},
               "integrator");
    cfg.integrator.kind =
        geo::integrator_kind_from_name(get_str(ij, "kind", "dopri5_adaptive"));
    cfg.integrator.h = get_num(ij, "h", cfg.integrator.h);
    cfg.integrator.rtol = get_num(ij, "rtol", cfg.integrator.rtol);
    cfg.integrator.atol = get_num(ij, "atol", cfg.integrator.atol);
    cfg.integrator.h_max = get_num(ij, "h_max", cfg.integrator.h_max);
    cfg.integrator.max_steps_per_unit =
        get_int(ij, "max_steps_per_unit", cfg.integrator.max_steps_per_unit);
    cfg.integrator.t_max = get_num(ij, "t_max", cfg.integrator.t_max);
    cfg.integrator.state_cap = get_num(ij, "state_cap", cfg.integrator.state_cap);
    cfg.integrator.validate();
  }
  if (doc.contains("slice")) {
    const json& sj = doc["slice"];
    check_keys(sj, {"w", "m", "max_shrink_iters"}, "slice");
    cfg.slice_params.w = get_num(sj, "w", cfg.slice_params.w);
    cfg.slice_params.m = static_cast<int>(get_int(sj, "m", cfg.slice_params.m));
    cfg.slice_params.max_shrink_iters = static_cast<int>(
        get_int(sj, "max_shrink_iters", cfg.slice_params.max_shrink_iters));
    cfg.slice_params.validate();
  }
  cfg.n_chains = get_int(doc, "n_chains", cfg.n_chains);
  cfg.n_samples = get_int(doc, "n_samples", cfg.n_samples);
  cfg.burn_in = get_int(doc, "burn_in", cfg.burn_in);
  cfg.thinning = get_int(doc, "thinning", cfg.thinning);
  if (cfg.n_chains < 1) throw ConfigError("n_chains must be >= 1");
  if (cfg.n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (cfg.thinning < 1) throw ConfigError("thinning must be >= 1");

  if (doc.contains("init")) {
    const json& in = doc["init"];
    check_keys(in, {"kind", "point"}, "init");
    const std::string kind = get_str(in, "kind", "standard_normal");
    if (kind == "standard_normal") {
      cfg.init.kind = InitSpec::Kind::standard_normal;
    } else if (kind == "fixed") {
      cfg.init.kind = InitSpec::Kind::fixed;
      cfg.init.point = get_vec(in, "point", Eigen::VectorXd());
      if (cfg.init.point.size() == 0)
        throw ConfigError("init.kind 'fixed' requires init.point");
    } else if (kind == "reference") {
      cfg.init.kind = InitSpec::Kind::reference;
    } else {
      throw ConfigError("unknown init.kind '" + kind + "'");
    }
  }
  cfg.output_dir = get_str(doc, "output_dir", cfg.output_dir);
  cfg.workers = get_int(doc, "workers", cfg.workers);
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  cfg.ksd_max_samples = get_int(doc, "ksd_max_samples", cfg.ksd_max_samples);
  if (cfg.ksd_max_samples < 1) throw ConfigError("ksd_max_samples must be >= 1");
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(doc);
}

json ExperimentConfig::canonical() const {
  json init_j;
  switch (init.kind) {
    case InitSpec::Kind::standard_normal: init_j = {{"kind", "standard_normal"}}; break;
    case InitSpec::Kind::reference: init_j = {{"kind", "reference"}}; break;
    case InitSpec::Kind::fixed: {
      init_j = {{"kind", "fixed"},
                {"point", std::vector<double>(init.point.data(),
                                              init.point.data() + init.point.size())}};
      break;
    }
  }
  return json{
      {"schema_version", 1},
      {"target", {{"name", target_name}, {"params", target_params}}},
      {"sampler", {{"name", sampler_name}, {"params", sampler_params}}},
      {"metric", {{"name", metric_name}, {"params", metric_params}}},
      {"integrator",
       {{"kind", geo::integrator_kind_name(integrator.kind)},
        {"h", integrator.h},
        {"rtol", integrator.rtol},
        {"atol", integrator.atol},
        {"h_max", integrator.h_max},
        {"max_steps_per_unit", integrator.max_steps_per_unit},
        {"t_max", integrator.t_max},
        {"state_cap", integrator.state_cap}}},
      {"slice",
       {{"w", slice_params.w},
        {"m", slice_params.m},
        {"max_shrink_iters", slice_params.max_shrink_iters}}},
      {"n_chains", n_chains},
      {"n_samples", n_samples},
      {"burn_in", effective_burn_in()},
      {"thinning", thinning},
      {"seed", seed},
      {"init", init_j},
      {"ksd_max_samples", ksd_max_samples}};
}

std::string ExperimentConfig::hash() const {
  const std::string dump = canonical().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- targets

std::shared_ptr<targets::TargetDensity> make_target(
    const std::string& name, const json& params, std::vector<std::string>* warnings) {
  const json& p = params.is_null() ? json::object() : params;
  if (name == "gaussian") {
    check_keys(p, {"dim", "sigma", "mean"}, "target.params");
    const long dim = get_int(p, "dim", 2);
    const double sigma = get_num(p, "sigma", 1.0);
    const double mean = get_num(p, "mean", 0.0);
    return std::make_shared<targets::GaussianMixtureTarget>(
        std::vector<Eigen::VectorXd>{Eigen::VectorXd::Constant(dim, mean)},
        std::vector<double>{sigma}, std::vector<double>{1.0});
  }
  if (name == "funnel") {
    check_keys(p, {"dim", "sigma", "mu"}, "target.params");
    return std::make_shared<targets::FunnelTarget>(
        get_int(p, "dim", 2), get_num(p, "sigma", 3.0), get_num(p, "mu", 0.0));
  }
  if (name == "rosenbrock") {
    check_keys(p, {"dim", "a", "b", "block_size"}, "target.params");
    return std::make_shared<targets::HybridRosenbrockTarget>(
        get_int(p, "dim", 2), get_num(p, "a", 1.0), get_num(p, "b", 100.0),
        static_cast<int>(get_int(p, "block_size", 3)));
  }
  if (name == "squiggle") {
    check_keys(p, {"dim", "a"}, "target.params");
    return std::make_shared<targets::SquiggleTarget>(get_int(p, "dim", 2),
                                                     get_num(p, "a", 1.5));
  }
  if (name == "mixture") {
    check_keys(p, {"means", "scales", "weights"}, "target.params");
    if (!p.contains("means") || !p["means"].is_array())
      throw ConfigError("mixture requires 'means' as an array of points");
    std::vector<Eigen::VectorXd> means;
    for (const auto& m : p["means"]) {
      Eigen::VectorXd v(m.size());
      Eigen::Index i = 0;
      for (const auto& e : m) v[i++] = e.get<double>();
      means.push_back(std::move(v));
    }
    std::vector<double> scales = p.contains("scales")
                                     ? p["scales"].get<std::vector<double>>()
                                     : std::vector<double>(means.size(), 1.0);
    std::vector<double> weights =
        p.contains("weights")
            ? p["weights"].get<std::vector<double>>()
            : std::vector<double>(means.size(), 1.0 / static_cast<double>(means.size()));
    return std::make_shared<targets::GaussianMixtureTarget>(means, scales, weights);
  }
  if (name == "two_gaussian") {
    check_keys(p, {"dim", "sigma", "weight_low"}, "target.params");
    const long dim = get_int(p, "dim", 2);
    const double sigma = get_num(p, "sigma", 0.1);
    const double w = get_num(p, "weight_low", 0.2);
    return std::make_shared<targets::GaussianMixtureTarget>(
        std::vector<Eigen::VectorXd>{Eigen::VectorXd::Constant(dim, -1.0),
                                     Eigen::VectorXd::Constant(dim, 1.0)},
        std::vector<double>{sigma, sigma}, std::vector<double>{w, 1.0 - w});
  }
  if (name == "gmm40") {
    check_keys(p, {"n_modes", "sigma", "box", "means_seed"}, "target.params");
    const long n_modes = get_int(p, "n_modes", 40);
    const double sigma = get_num(p, "sigma", 0.1);
    const double box = get_num(p, "box", 40.0);
    // The realization of the mode layout is pinned by this seed so runs are
    // reproducible across machines.
    const std::uint64_t means_seed =
        static_cast<std::uint64_t>(get_int(p, "means_seed", 20240601));
    RngStream rng(means_seed);
    std::vector<Eigen::VectorXd> means;
    for (long k = 0; k < n_modes; ++k) {
      Eigen::VectorXd m(2);
      m[0] = rng.uniform(-box, box);
      m[1] = rng.uniform(-box, box);
      means.push_back(std::move(m));
    }
    return std::make_shared<targets::GaussianMixtureTarget>(
        means, std::vector<double>(n_modes, sigma),
        std::vector<double>(n_modes, 1.0 / static_cast<double>(n_modes)));
  }
  if (name == "field_system") {
    check_keys(p, {"dim", "beta"}, "target.params");
    return std::make_shared<targets::FieldSystemTarget>(get_int(p, "dim", 16),
                                                        get_num(p, "beta", 1.0));
  }
  if (name == "narrow_mix") {
    check_keys(p,
               {"rosenbrock_loc", "squiggle_loc", "rosenbrock_scale",
                "squiggle_scale", "weights", "b"},
               "target.params");
    const Eigen::VectorXd ones2 = Eigen::VectorXd::Ones(2);
    Eigen::VectorXd rloc(2), sloc(2);
    rloc << 0.0, 2.0;
    sloc << 0.0, -5.0;
    targets::TransformedMixtureTarget::Component ros{
        std::make_shared<targets::HybridRosenbrockTarget>(2, 1.0, get_num(p, "b", 100.0), 1),
        get_vec(p, "rosenbrock_loc", rloc), get_vec(p, "rosenbrock_scale", ones2)};
    targets::TransformedMixtureTarget::Component sq{
        std::make_shared<targets::SquiggleTarget>(2, 1.5),
        get_vec(p, "squiggle_loc", sloc), get_vec(p, "squiggle_scale", ones2)};
    std::vector<double> weights = p.contains("weights")
                                      ? p["weights"].get<std::vector<double>>()
                                      : std::vector<double>{0.5, 0.5};
    return std::make_shared<targets::TransformedMixtureTarget>(
        std::vector<targets::TransformedMixtureTarget::Component>{ros, sq}, weights);
  }
  if (name == "logistic") {
    check_keys(p, {"csv", "n_data", "dim", "data_seed", "prior_scale"}, "target.params");
    const double prior = get_num(p, "prior_scale", 100.0);
    if (p.contains("csv")) {
      targets::LogisticData data =
          targets::load_logistic_data(p["csv"].get<std::string>());
      if (warnings)
        for (const auto& w : data.warnings) warnings->push_back(w);
      return std::make_shared<targets::LogisticRegressionTarget>(data.covariates,
                                                                 data.labels, prior);
    }
    const long n = get_int(p, "n_data", 100);
    const long d = get_int(p, "dim", 4);
    const std::uint64_t data_seed = static_cast<std::uint64_t>(get_int(p, "data_seed", 7));
    RngStream rng(data_seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    const Eigen::VectorXd theta_true = rng.normal_vector(d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x.row(i).dot(theta_true)));
      y[i] = rng.uniform() < s ? 1.0 : 0.0;
    }
    return std::make_shared<targets::LogisticRegressionTarget>(x, y, prior);
  }
  throw ConfigError("unknown target '" + name + "'");
}

std::shared_ptr<metrics::MetricField> make_metric(
    const std::string& name, const json& params,
    const std::shared_ptr<targets::TargetDensity>& target,
    std::vector<std::string>* warnings) {
  const json& p = params.is_null() ? json::object() : params;
  if (name == "euclidean") {
    check_keys(p, {}, "metric.params");
    return std::make_shared<metrics::EuclideanMetric>(target->dim());
  }
  if (name == "monge") {
    check_keys(p, {"alpha2"}, "metric.params");
    return std::make_shared<metrics::MongeMetric>(target, get_num(p, "alpha2", 1.0));
  }
  if (name == "inverse_monge") {
    check_keys(p, {"alpha2"}, "metric.params");
    return std::make_shared<metrics::InverseMongeMetric>(target,
                                                         get_num(p, "alpha2", 0.1));
  }
  if (name == "generative" || name == "inverse_generative") {
    check_keys(p, {"lambda", "p0"}, "metric.params");
    const double lambda = get_num(p, "lambda", 1.0);
    const double p0 = get_num(p, "p0", 1.0);
    if (lambda == 0.0 && warnings)
      warnings->push_back(
          "lambda = 0 assumes a strictly positive target density; evaluation "
          "fails wherever the density underflows");
    if (name == "generative")
      return std::make_shared<metrics::GenerativeMetric>(target, lambda, p0);
    return std::make_shared<metrics::InverseGenerativeMetric>(target, lambda, p0);
  }
  if (name == "fisher_logistic") {
    check_keys(p, {}, "metric.params");
    auto logistic =
        std::dynamic_pointer_cast<const targets::LogisticRegressionTarget>(target);
    if (!logistic)
      throw ConfigError("fisher_logistic metric requires the 'logistic' target");
    return std::make_shared<metrics::FisherLogisticMetric>(logistic);
  }
  throw ConfigError("unknown metric '" + name + "'");
}

// ---------------------------------------------------------------- runners

namespace {

class MagssRunner : public ChainRunner {
 public:
  MagssRunner(std::shared_ptr<targets::TargetDensity> target,
              std::shared_ptr<metrics::MetricField> metric,
              const geo::IntegratorConfig& icfg, const slice::SliceParams& sp,
              Eigen::VectorXd x0, std::uint64_t seed)
      : target_(std::move(target)), metric_(std::move(metric)),
        state_(std::move(x0), seed) {
    cfg_.metric = metric_.get();
    cfg_.integrator = icfg;
    cfg_.slice = sp;
  }
  void step() override { samplers::magss_step(state_, *target_, cfg_); }
  const Eigen::VectorXd& position() const override { return state_.x; }
  slice::SliceStats last_stats() const override { return state_.last; }

 private:
  std::shared_ptr<targets::TargetDensity> target_;
  std::shared_ptr<metrics::MetricField> metric_;
  samplers::ChainState state_;
  samplers::MagssConfig cfg_;
};

class HitAndRunRunner : public ChainRunner {
 public:
  HitAndRunRunner(std::shared_ptr<targets::TargetDensity> target,
                  const slice::SliceParams& sp, Eigen::VectorXd x0,
                  std::uint64_t seed)
      : target_(std::move(target)), params_(sp), state_(std::move(x0), seed) {}
  void step() override { samplers::hit_and_run_step(state_, *target_, params_); }
  const Eigen::VectorXd& position() const override { return state_.x; }
  slice::SliceStats last_stats() const override { return state_.last; }

 private:
  std::shared_ptr<targets::TargetDensity> target_;
  slice::SliceParams params_;
  samplers::ChainState state_;
};

class MetaRunner : public ChainRunner {
 public:
  MetaRunner(std::shared_ptr<targets::TargetDensity> target,
             std::shared_ptr<metrics::MetricField> metric,
             const geo::IntegratorConfig& icfg, const slice::SliceParams& sp,
             int k, int l, double step_size, Eigen::VectorXd x0, std::uint64_t seed)
      : target_(std::move(target)), metric_(std::move(metric)),
        state_(std::move(x0), seed) {
    cfg_.magss.metric = metric_.get();
    cfg_.magss.integrator = icfg;
    cfg_.magss.slice = sp;
    cfg_.k_global = k;
    cfg_.l_local = l;
    cfg_.step_size = step_size;
  }
  void step() override { samplers::meta_magss_step(state_, *target_, cfg_); }
  const Eigen::VectorXd& position() const override { return state_.x; }
  slice::SliceStats last_stats() const override { return state_.last; }

 private:
  std::shared_ptr<targets::TargetDensity> target_;
  std::shared_ptr<metrics::MetricField> metric_;
  samplers::ChainState state_;
  samplers::MetaConfig cfg_;
};

class MalaRunner : public ChainRunner {
 public:
  MalaRunner(std::shared_ptr<targets::TargetDensity> target, double step_size,
             Eigen::VectorXd x0, std::uint64_t seed)
      : target_(std::move(target)), step_size_(step_size),
        state_(std::move(x0), seed) {}
  void step() override { samplers::mala_step(state_, *target_, step_size_); }
  const Eigen::VectorXd& position() const override { return state_.x; }

 private:
  std::shared_ptr<targets::TargetDensity> target_;
  double step_size_;
  samplers::ChainState state_;
};

class PtRunner : public ChainRunner {
 public:
  PtRunner(std::shared_ptr<targets::TargetDensity> target, samplers::PtConfig cfg,
           const Eigen::VectorXd& x0, std::uint64_t seed)
      : target_(std::move(target)), cfg_(std::move(cfg)),
        state_(x0, cfg_.ladder.size(), seed) {}
  void step() override { samplers::pt_step(state_, *target_, cfg_); }
  const Eigen::VectorXd& position() const override { return state_.xs[0]; }

 private:
  std::shared_ptr<targets::TargetDensity> target_;
  samplers::PtConfig cfg_;
  samplers::PtState state_;
};

class DigsRunner : public ChainRunner {
 public:
  DigsRunner(std::shared_ptr<targets::TargetDensity> target, samplers::DigsConfig cfg,
             Eigen::VectorXd x0, std::uint64_t seed)
      : target_(std::move(target)), cfg_(std::move(cfg)), state_(std::move(x0), seed) {}
  void step() override { samplers::digs_step(state_, *target_, cfg_); }
  const Eigen::VectorXd& position() const override { return state_.x; }

 private:
  std::shared_ptr<targets::TargetDensity> target_;
  samplers::DigsConfig cfg_;
  samplers::ChainState state_;
};

}  // namespace

std::unique_ptr<ChainRunner> make_runner(
    const ExperimentConfig& config, std::shared_ptr<targets::TargetDensity> target,
    std::shared_ptr<metrics::MetricField> metric, const Eigen::VectorXd& x0,
    std::uint64_t seed) {
  const std::string& name = config.sampler_name;
  const json& p = config.sampler_params.is_null() ? json::object() : config.sampler_params;
  if (name == "magss") {
    check_keys(p, {}, "sampler.params");
    return std::make_unique<MagssRunner>(std::move(target), std::move(metric),
                                         config.integrator, config.slice_params, x0, seed);
  }
  if (name == "hit_and_run") {
    check_keys(p, {}, "sampler.params");
    return std::make_unique<HitAndRunRunner>(std::move(target), config.slice_params,
                                             x0, seed);
  }
  if (name == "meta_magss") {
    check_keys(p, {"k", "l", "step_size"}, "sampler.params");
    const long k = get_int(p, "k", 1);
    const long l = get_int(p, "l", 10);
    if (k < 0 || l < 0) throw ConfigError("meta_magss k and l must be >= 0");
    return std::make_unique<MetaRunner>(std::move(target), std::move(metric),
                                        config.integrator, config.slice_params,
                                        static_cast<int>(k), static_cast<int>(l),
                                        get_num(p, "step_size", 0.1), x0, seed);
  }
  if (name == "mala") {
    check_keys(p, {"step_size"}, "sampler.params");
    return std::make_unique<MalaRunner>(std::move(target), get_num(p, "step_size", 0.1),
                                        x0, seed);
  }
  if (name == "pt") {
    check_keys(p, {"ladder", "step_size"}, "sampler.params");
    samplers::PtConfig cfg;
    cfg.ladder = p.contains("ladder") ? p["ladder"].get<std::vector<double>>()
                                      : std::vector<double>{1.0, 5.62, 31.62, 177.83, 1000.0};
    cfg.step_size = get_num(p, "step_size", 0.1);
    cfg.validate();
    return std::make_unique<PtRunner>(std::move(target), std::move(cfg), x0, seed);
  }
  if (name == "digs") {
    check_keys(p, {"alphas", "n_levels", "alpha_min", "alpha_max", "mala_steps", "step_size"},
               "sampler.params");
    samplers::DigsConfig cfg;
    if (p.contains("alphas")) {
      cfg.alphas = p["alphas"].get<std::vector<double>>();
    } else {
      const long n = get_int(p, "n_levels", 5);
      const double lo = get_num(p, "alpha_min", 0.1);
      const double hi = get_num(p, "alpha_max", 0.9);
      if (n < 1) throw ConfigError("digs n_levels must be >= 1");
      for (long i = 0; i < n; ++i)
        cfg.alphas.push_back(
            n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    cfg.mala_steps = static_cast<int>(get_int(p, "mala_steps", 10));
    cfg.step_size = get_num(p, "step_size", 0.1);
    cfg.validate();
    return std::make_unique<DigsRunner>(std::move(target), std::move(cfg), x0, seed);
  }
  throw ConfigError("unknown sampler '" + name + "'");
}

// ------------------------------------------------------------- experiment

namespace {

Eigen::VectorXd initial_position(const InitSpec& init,
                                 const targets::TargetDensity& target,
                                 RngStream& rng) {
  switch (init.kind) {
    case InitSpec::Kind::fixed:
      if (init.point.size() != target.dim())
        throw ConfigError("init.point has wrong dimension");
      return init.point;
    case InitSpec::Kind::reference:
      return target.reference_sample(1, rng).row(0).transpose();
    case InitSpec::Kind::standard_normal:
    default:
      return rng.normal_vector(target.dim());
  }
}

ChainResult run_one_chain(const ExperimentConfig& cfg,
                          const std::shared_ptr<targets::TargetDensity>& target,
                          const std::shared_ptr<metrics::MetricField>& metric,
                          long index) {
  ChainResult res;
  res.index = index;
  res.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
  const auto start = std::chrono::steady_clock::now();
  try {
    RngStream init_rng(derive_seed(res.seed, 1));
    const Eigen::VectorXd x0 = initial_position(cfg.init, *target, init_rng);
    auto runner = make_runner(cfg, target, metric, x0, derive_seed(res.seed, 2));

    for (long i = 0; i < cfg.effective_burn_in(); ++i) runner->step();
    res.samples.resize(cfg.n_samples, target->dim());
    double stepout_sum = 0.0, shrink_sum = 0.0;
    for (long s = 0; s < cfg.n_samples; ++s) {
      for (long t = 0; t < cfg.thinning; ++t) runner->step();
      res.samples.row(s) = runner->position().transpose();
      const slice::SliceStats st = runner->last_stats();
      stepout_sum += st.expansions;
      shrink_sum += st.shrink_iters;
      if (st.fallback) ++res.fallbacks;
    }
    res.avg_stepout = stepout_sum / static_cast<double>(cfg.n_samples);
    res.avg_shrink = shrink_sum / static_cast<double>(cfg.n_samples);
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
    res.samples.resize(0, 0);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// Deterministic even subsample of row indices.
std::vector<Eigen::Index> even_subsample(Eigen::Index n, Eigen::Index cap) {
  std::vector<Eigen::Index> idx;
  if (n <= cap) {
    for (Eigen::Index i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (Eigen::Index i = 0; i < cap; ++i) idx.push_back(i * n / cap);
  }
  return idx;
}

DiagnosticReport compute_diagnostics(const ExperimentConfig& cfg,
                                     const targets::TargetDensity& target,
                                     const std::vector<const ChainResult*>& ok_chains,
                                     double wall_clock) {
  DiagnosticReport rep;
  rep.wall_clock_seconds = wall_clock;
  const Eigen::Index d = target.dim();
  Eigen::Index total = 0;
  for (const auto* c : ok_chains) total += c->samples.rows();
  rep.sample_count = total;
  if (total == 0) return rep;

  diag::SampleSet set;
  set.samples.resize(total, d);
  set.offsets.push_back(0);
  for (const auto* c : ok_chains) {
    set.samples.middleRows(set.offsets.back(), c->samples.rows()) = c->samples;
    set.offsets.push_back(set.offsets.back() + c->samples.rows());
  }

  if (target.has_reference_sampler()) {
    RngStream ref_rng(derive_seed(cfg.seed, 0x5245464ULL));
    const Eigen::MatrixXd ref = target.reference_sample(total, ref_rng);
    const diag::MarginalW1 w1 = diag::marginal_w1(set.samples, ref);
    rep.w1_per_dimension = w1.per_dimension;
    rep.w1_mean = w1.mean;
  }

  const auto grad = [&](const Eigen::VectorXd& x) { return target.grad_log_density(x); };
  {
    const auto idx = even_subsample(total, cfg.ksd_max_samples);
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t i = 0; i < idx.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = set.samples.row(idx[i]);
    rep.ksd = diag::ksd_vstat(sub, grad);
  }
  if (ok_chains.size() > 1) {
    std::vector<double> per_chain;
    const Eigen::Index per_cap =
        std::max<Eigen::Index>(1, cfg.ksd_max_samples / static_cast<Eigen::Index>(ok_chains.size()));
    for (const auto* c : ok_chains) {
      const auto idx = even_subsample(c->samples.rows(), per_cap);
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), d);
      for (std::size_t i = 0; i < idx.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = c->samples.row(idx[i]);
      per_chain.push_back(diag::ksd_vstat(sub, grad));
    }
    double mean = 0.0, var = 0.0;
    for (double v : per_chain) mean += v;
    mean /= static_cast<double>(per_chain.size());
    for (double v : per_chain) var += (v - mean) * (v - mean);
    rep.ksd_spread_chains = std::sqrt(var / static_cast<double>(per_chain.size()));
  }

  // ESS per dimension: sum over chains (independent chains add information),
  // then min / mean across dimensions.
  if (ok_chains[0]->samples.rows() >= 10) {
    Eigen::VectorXd ess_d = Eigen::VectorXd::Zero(d);
    for (const auto* c : ok_chains) {
      for (Eigen::Index j = 0; j < d; ++j) {
        std::vector<double> series(c->samples.rows());
        for (Eigen::Index i = 0; i < c->samples.rows(); ++i) series[static_cast<std::size_t>(i)] = c->samples(i, j);
        ess_d[j] += diag::effective_sample_size(series);
      }
    }
    rep.min_ess = ess_d.minCoeff();
    rep.avg_ess = ess_d.mean();
  }

  if (target.has_mode_classifier()) {
    rep.jump_rate_percent = diag::jump_rate(
        set, [&](const Eigen::VectorXd& x) { return target.classify_mode(x); });
  }
  return rep;
}

void write_summary_csv(const std::string& path, const ExperimentConfig& cfg,
                       const DiagnosticReport& d) {
  std::ofstream out(path);
  out << "sampler,metric,jump_percent,ksd_vstat,w1_mean,min_ess,avg_ess,"
         "avg_stepout,avg_shrink,t_seconds,sample_count\n";
  out << cfg.sampler_name << ',' << cfg.metric_name << ','
      << (d.jump_rate_percent >= 0 ? format_double(d.jump_rate_percent) : "") << ','
      << (d.ksd >= 0 ? format_double(d.ksd) : "") << ','
      << (d.w1_mean >= 0 ? format_double(d.w1_mean) : "") << ','
      << format_double(d.min_ess) << ',' << format_double(d.avg_ess) << ','
      << "" << ',' << "" << ','  // per-run step stats live in report.json
      << format_double(d.wall_clock_seconds) << ',' << d.sample_count << "\n";
}

}  // namespace

json DiagnosticReport::to_json() const {
  json j;
  j["sample_count"] = sample_count;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["min_ess"] = min_ess;
  j["avg_ess"] = avg_ess;
  if (w1_mean >= 0) {
    j["w1_mean"] = w1_mean;
    j["w1_per_dimension"] = std::vector<double>(
        w1_per_dimension.data(), w1_per_dimension.data() + w1_per_dimension.size());
  }
  if (ksd >= 0) j["ksd_vstat"] = ksd;
  // Spread across chains of one run; spread across seeds comes from
  // aggregating repeated runs of the same config with different seeds.
  if (ksd_spread_chains >= 0) j["ksd_vstat_spread_chains"] = ksd_spread_chains;
  if (jump_rate_percent >= 0) j["jump_rate_percent"] = jump_rate_percent;
  return j;
}

void write_chain_csv(const std::string& path, long chain_id,
                     const Eigen::MatrixXd& samples) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << "chain_id,iteration";
  for (Eigen::Index j = 0; j < samples.cols(); ++j) out << ",x_" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    out << chain_id << ',' << i;
    for (Eigen::Index j = 0; j < samples.cols(); ++j)
      out << ',' << format_double(samples(i, j));
    out << "\n";
  }
}

Eigen::MatrixXd read_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty chain file " + path);
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() < 3)
      throw IngestionError("chain row too short in " + path, lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestionError("no samples in " + path);
  const Eigen::Index d = static_cast<Eigen::Index>(rows[0].size()) - 2;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), d);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 2];
  return out;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  RunReport report;
  report.config_hash = cfg.hash();

  auto target = make_target(cfg.target_name, cfg.target_params, &report.warnings);
  auto metric = make_metric(cfg.metric_name, cfg.metric_params, target, &report.warnings);
  // Fail fast on bad sampler configs before spawning chains.
  make_runner(cfg, target, metric, Eigen::VectorXd::Zero(target->dim()),
              derive_seed(cfg.seed, 0));

  const auto t0 = std::chrono::steady_clock::now();
  report.chains.resize(static_cast<std::size_t>(cfg.n_chains));
  std::atomic<long> next{0};
  const long n_workers = std::max(1L, std::min(cfg.workers, cfg.n_chains));
  std::vector<std::thread> pool;
  for (long w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const long c = next.fetch_add(1);
        if (c >= cfg.n_chains) return;
        report.chains[static_cast<std::size_t>(c)] =
            run_one_chain(cfg, target, metric, c);
      }
    });
  }
  for (auto& t : pool) t.join();
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir / "chains");

  std::vector<const ChainResult*> ok;
  for (auto& c : report.chains) {
    char name[64];
    std::snprintf(name, sizeof(name), "chain_%03ld.csv", c.index);
    const fs::path chain_path = out_dir / "chains" / name;
    if (!c.failed) {
      write_chain_csv(chain_path.string(), c.index, c.samples);
      report.chain_files.push_back(chain_path.string());
      ok.push_back(&c);
    } else {
      ++report.n_failed;
    }
    json meta{{"chain_id", c.index},       {"seed", c.seed},
              {"config_hash", report.config_hash}, {"failed", c.failed},
              {"error", c.error},          {"avg_stepout", c.avg_stepout},
              {"avg_shrink", c.avg_shrink}, {"fallbacks", c.fallbacks},
              {"wall_clock_seconds", c.seconds}};
    std::ofstream meta_out(out_dir / "chains" /
                           (std::string(name).substr(0, std::string(name).size() - 4) +
                            ".meta.json"));
    meta_out << meta.dump(2) << "\n";
  }

  report.diagnostics = compute_diagnostics(cfg, *target, ok, wall);

  json chains_j = json::array();
  for (const auto& c : report.chains) {
    char name[64];
    std::snprintf(name, sizeof(name), "chains/chain_%03ld.csv", c.index);
    chains_j.push_back(json{{"index", c.index},
                            {"file", c.failed ? "" : name},
                            {"seed", c.seed},
                            {"failed", c.failed},
                            {"error", c.error},
                            {"avg_stepout", c.avg_stepout},
                            {"avg_shrink", c.avg_shrink},
                            {"fallbacks", c.fallbacks},
                            {"wall_clock_seconds", c.seconds}});
  }
  json report_j{{"schema_version", 1},
                {"config_hash", report.config_hash},
                {"seed", cfg.seed},
                {"chains", chains_j},
                {"n_failed", report.n_failed},
                {"diagnostics", report.diagnostics.to_json()},
                {"warnings", report.warnings}};
  {
    std::ofstream out(out_dir / "report.json");
    out << report_j.dump(2) << "\n";
  }
  {
    json full = cfg.canonical();
    full["output_dir"] = cfg.output_dir;
    full["workers"] = cfg.workers;
    std::ofstream out(out_dir / "config.json");
    out << full.dump(2) << "\n";
  }
  write_summary_csv((out_dir / "summary.csv").string(), cfg, report.diagnostics);

  // Free per-chain sample storage now that everything is persisted.
  for (auto& c : report.chains) c.samples.resize(0, 0);
  return report;
}

RunReport recompute_report(const std::string& output_dir) {
  const fs::path dir(output_dir);
  ExperimentConfig cfg = load_config_file((dir / "config.json").string());
  std::ifstream rin(dir / "report.json");
  if (!rin) throw ConfigError("no report.json under " + output_dir);
  json old;
  rin >> old;

  RunReport report;
  report.config_hash = cfg.hash();
  auto target = make_target(cfg.target_name, cfg.target_params, &report.warnings);
  for (const auto& cj : old["chains"]) {
    ChainResult c;
    c.index = cj["index"].get<long>();
    c.seed = cj["seed"].get<std::uint64_t>();
    c.failed = cj["failed"].get<bool>();
    c.avg_stepout = cj["avg_stepout"].get<double>();
    c.avg_shrink = cj["avg_shrink"].get<double>();
    c.fallbacks = cj["fallbacks"].get<long>();
    c.seconds = cj["wall_clock_seconds"].get<double>();
    if (!c.failed) {
      c.samples = read_chain_csv((dir / cj["file"].get<std::string>()).string());
      report.chain_files.push_back((dir / cj["file"].get<std::string>()).string());
    } else {
      ++report.n_failed;
    }
    report.chains.push_back(std::move(c));
  }
  std::vector<const ChainResult*> ok;
  for (const auto& c : report.chains)
    if (!c.failed) ok.push_back(&c);
  report.diagnostics =
      compute_diagnostics(cfg, *target, ok, old["diagnostics"]["wall_clock_seconds"].get<double>());

  old["diagnostics"] = report.diagnostics.to_json();
  old["config_hash"] = report.config_hash;
  std::ofstream out(dir / "report.json");
  out << old.dump(2) << "\n";
  write_summary_csv((dir / "summary.csv").string(), cfg, report.diagnostics);
  for (auto& c : report.chains) c.samples.resize(0, 0);
  return report;
}

// ------------------------------------------------------------- grid search

namespace {

void apply_override(ExperimentConfig& cfg, const std::string& path, double value) {
  const auto dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("grid parameter '" + path + "' must look like 'metric.alpha2'");
  const std::string group = path.substr(0, dot);
  const std::string key = path.substr(dot + 1);
  if (group == "metric")
    cfg.metric_params[key] = value;
  else if (group == "sampler")
    cfg.sampler_params[key] = value;
  else if (group == "target")
    cfg.target_params[key] = value;
  else
    throw ConfigError("grid parameter group '" + group +
                      "' must be metric, sampler, or target");
}

}  // namespace

GridResult grid_search(const ExperimentConfig& base, const json& grid_spec) {
  check_keys(grid_spec, {"param1", "values1", "param2", "values2", "n_samples"},
             "grid");
  if (!grid_spec.contains("param1") || !grid_spec.contains("values1"))
    throw ConfigError("grid requires param1 and values1");
  const std::string param1 = grid_spec["param1"].get<std::string>();
  const std::vector<double> values1 = grid_spec["values1"].get<std::vector<double>>();
  std::string param2;
  std::vector<double> values2{0.0};
  const bool has2 = grid_spec.contains("param2");
  if (has2) {
    if (!grid_spec.contains("values2")) throw ConfigError("param2 requires values2");
    param2 = grid_spec["param2"].get<std::string>();
    values2 = grid_spec["values2"].get<std::vector<double>>();
  }
  if (values1.empty() || values2.empty()) throw ConfigError("empty grid axis");
  const long budget = grid_spec.contains("n_samples")
                          ? grid_spec["n_samples"].get<long>()
                          : std::max(200L, base.n_samples / 10);

  GridResult result;
  long cell_id = 0;
  for (double v1 : values1) {
    for (double v2 : values2) {
      GridCell cell;
      cell.overrides[param1] = v1;
      if (has2) cell.overrides[param2] = v2;
      ExperimentConfig cfg = base;
      cfg.n_samples = budget;
      cfg.burn_in = base.burn_in >= 0 ? std::min(base.burn_in, budget / 10) : -1;
      cfg.output_dir =
          (fs::path(base.output_dir) / "grid" / ("cell_" + std::to_string(cell_id))).string();
      try {
        apply_override(cfg, param1, v1);
        if (has2) apply_override(cfg, param2, v2);
        const RunReport rep = run_experiment(cfg);
        if (rep.n_failed < cfg.n_chains) {
          cell.w1_mean = rep.diagnostics.w1_mean;
          cell.jump_rate = rep.diagnostics.jump_rate_percent;
          cell.score = cell.w1_mean >= 0 ? cell.w1_mean : -cell.jump_rate;
          cell.valid = true;
        }
      } catch (const std::exception&) {
        cell.valid = false;
      }
      result.cells.push_back(std::move(cell));
      ++cell_id;
    }
  }

  std::stable_sort(result.cells.begin(), result.cells.end(),
                   [](const GridCell& a, const GridCell& b) {
                     if (a.valid != b.valid) return a.valid;
                     return a.score < b.score;
                   });
  if (result.cells.empty() || !result.cells.front().valid)
    throw ConfigError("grid search produced no valid cells");

  fs::create_directories(base.output_dir);
  std::ofstream out(fs::path(base.output_dir) / "grid.csv");
  out << param1 << (has2 ? "," + param2 : std::string()) << ",w1_mean,jump_percent,score,valid\n";
  for (const auto& cell : result.cells) {
    out << format_double(cell.overrides[param1].get<double>());
    if (has2) out << ',' << format_double(cell.overrides[param2].get<double>());
    out << ',' << (cell.w1_mean >= 0 ? format_double(cell.w1_mean) : "") << ','
        << (cell.jump_rate >= 0 ? format_double(cell.jump_rate) : "") << ','
        << format_double(cell.score) << ',' << (cell.valid ? 1 : 0) << "\n";
  }

  result.best = base;
  apply_override(result.best, param1, result.cells.front().overrides[param1].get<double>());
  if (has2)
    apply_override(result.best, param2, result.cells.front().overrides[param2].get<double>());
  return result;
}

// ------------------------------------------------------------------ trace

void trace_geodesics(const targets::TargetDensity& target,
                     const metrics::MetricField& metric,
                     const geo::IntegratorConfig& icfg, const TraceConfig& tc,
                     std::uint64_t seed, const std::string& csv_path) {
  if (tc.origin.size() != target.dim())
    throw ConfigError("trace origin has wrong dimension");
  if (tc.n_directions < 1 || tc.t_steps < 1 || tc.t_max <= 0)
    throw ConfigError("trace requires n_directions >= 1, t_steps >= 1, t_max > 0");
  fs::create_directories(fs::path(csv_path).parent_path().empty()
                             ? "."
                             : fs::path(csv_path).parent_path().string());
  std::ofstream out(csv_path);
  if (!out) throw IngestionError("cannot write " + csv_path);
  out << "direction_id,t";
  for (Eigen::Index j = 0; j < target.dim(); ++j) out << ",x_" << (j + 1);
  out << ",euclidean_speed,riemannian_speed,truncated\n";

  RngStream rng(seed);
  for (int dir = 0; dir < tc.n_directions; ++dir) {
    const Eigen::VectorXd v = metrics::sample_unit_tangent(metric, tc.origin, rng);
    geo::GeodesicCurve curve(metric, tc.origin, v, icfg);
    for (int k = 0; k <= tc.t_steps; ++k) {
      const double t = tc.t_max * static_cast<double>(k) / static_cast<double>(tc.t_steps);
      bool truncated = false;
      Eigen::VectorXd x, vel;
      try {
        std::tie(x, vel) = curve.eval_with_velocity(t);
      } catch (const std::exception&) {
        truncated = true;
      }
      if (truncated) {
        out << dir << ',' << format_double(t);
        for (Eigen::Index j = 0; j < target.dim(); ++j) out << ",";
        out << ",,1\n";
        break;
      }
      const double espeed = vel.norm();
      const double rspeed = std::sqrt(metric.quadratic_form(x, vel));
      out << dir << ',' << format_double(t);
      for (Eigen::Index j = 0; j < target.dim(); ++j) out << ',' << format_double(x[j]);
      out << ',' << format_double(espeed) << ',' << format_double(rspeed) << ",0\n";
    }
  }
}

// ------------------------------------------------------------------- tune

TuneResult mala_tune(const targets::TargetDensity& target, double target_rate,
                     double bracket_lo, double bracket_hi, long pilot_steps,
                     std::uint64_t seed) {
  if (!(target_rate > 0.0 && target_rate < 1.0))
    throw ConfigError("target acceptance rate must lie in (0, 1)");
  if (!(bracket_lo > 0.0 && bracket_lo < bracket_hi))
    throw ConfigError("need 0 < bracket_lo < bracket_hi");
  if (pilot_steps < 10) throw ConfigError("pilot_steps must be >= 10");

  RngStream init_rng(derive_seed(seed, 1));
  const Eigen::VectorXd x0 = init_rng.normal_vector(target.dim());
  const auto acceptance = [&](double eps) {
    samplers::ChainState state(x0, derive_seed(seed, 2));
    long accepted = 0;
    for (long i = 0; i < pilot_steps; ++i)
      if (samplers::mala_step(state, target, eps)) ++accepted;
    return static_cast<double>(accepted) / static_cast<double>(pilot_steps);
  };

  double lo = bracket_lo, hi = bracket_hi;
  const double a_hi = acceptance(hi);
  if (a_hi >= target_rate) return {hi, a_hi, true};  // even the largest step accepts
  const double a_lo = acceptance(lo);
  if (a_lo <= target_rate) return {lo, a_lo, true};

  TuneResult best{lo, a_lo, true};
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const double a = acceptance(mid);
    if (std::abs(a - target_rate) < std::abs(best.acceptance - target_rate))
      best = {mid, a, true};
    if (std::abs(a - target_rate) <= 0.05) return {mid, a, false};
    if (a > target_rate)
      lo = mid;
    else
      hi = mid;
  }
  return best;
}

}  // namespace magss::harness
