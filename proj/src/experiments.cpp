#include "poclab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "poclab/csv.hpp"
#include "poclab/util.hpp"

namespace poclab {

using nlohmann::json;

namespace {

[[noreturn]] void vfail(const std::string& path, const std::string& msg) {
  throw ConfigValidationError(path + ": " + msg);
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void expect_object(const json& v, const std::string& path) {
  if (!v.is_object()) vfail(path, "expected an object");
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) vfail(path + "." + key, "unknown field");
  }
}

double get_double(const json& v, const std::string& path) {
  if (!v.is_number()) vfail(path, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) vfail(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    vfail(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) vfail(path, "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) vfail(path, "expected a string");
  return v.get<std::string>();
}

// Scalar entries broadcast to length N.
std::vector<double> get_double_vec(const json& v, int N,
                                   const std::string& path) {
  if (v.is_number()) return std::vector<double>(N, v.get<double>());
  if (!v.is_array()) vfail(path, "expected a number or an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(get_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::int64_t> get_int_vec(const json& v, int N,
                                      const std::string& path) {
  if (v.is_number_integer())
    return std::vector<std::int64_t>(N, v.get<std::int64_t>());
  if (!v.is_array()) vfail(path, "expected an integer or an array");
  std::vector<std::int64_t> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(get_int(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

ServiceLaw parse_service_law(const json& v, const std::string& path) {
  expect_object(v, path);
  reject_unknown_keys(v, path, {"family", "k", "cv"});
  const json* fam = find(v, "family");
  if (fam == nullptr) vfail(path + ".family", "missing");
  const std::string family = get_string(*fam, path + ".family");
  try {
    if (family == "exponential") return ServiceLaw::exponential();
    if (family == "erlang") {
      const json* k = find(v, "k");
      if (k == nullptr) vfail(path + ".k", "missing for erlang");
      return ServiceLaw::erlang(static_cast<int>(get_int(*k, path + ".k")));
    }
    if (family == "hyperexp2" || family == "lognormal") {
      const json* cv = find(v, "cv");
      if (cv == nullptr) vfail(path + ".cv", "missing for " + family);
      const double c = get_double(*cv, path + ".cv");
      return family == "hyperexp2" ? ServiceLaw::hyperexp2(c)
                                   : ServiceLaw::lognormal(c);
    }
  } catch (const std::invalid_argument& e) {
    vfail(path, e.what());
  }
  vfail(path + ".family",
        "unknown service family (expected exponential, erlang, hyperexp2 or "
        "lognormal)");
}

json service_law_to_json(const ServiceLaw& law) {
  json j;
  switch (law.family) {
    case ServiceLaw::Family::exponential:
      j["family"] = "exponential";
      break;
    case ServiceLaw::Family::erlang:
      j["family"] = "erlang";
      j["k"] = law.shape;
      break;
    case ServiceLaw::Family::hyperexp2:
      j["family"] = "hyperexp2";
      j["cv"] = law.cv;
      break;
    case ServiceLaw::Family::lognormal:
      j["family"] = "lognormal";
      j["cv"] = law.cv;
      break;
  }
  return j;
}

ModelParams parse_model(const json& v, const std::string& path) {
  expect_object(v, path);
  reject_unknown_keys(v, path,
                      {"N", "n", "lambda", "lambda_hat", "mu", "mu_hat",
                       "lambda0_hat", "service", "sigma_ser", "routing", "ic"});
  ModelParams mp;
  const json* jN = find(v, "N");
  if (jN == nullptr) vfail(path + ".N", "missing");
  mp.N = static_cast<int>(get_int(*jN, path + ".N"));
  if (mp.N < 1) vfail(path + ".N", "must be a positive integer");
  const json* jn = find(v, "n");
  if (jn == nullptr) vfail(path + ".n", "missing");
  mp.n = get_int(*jn, path + ".n");

  const json* jlam = find(v, "lambda");
  if (jlam == nullptr) vfail(path + ".lambda", "missing");
  mp.lambda = get_double_vec(*jlam, mp.N, path + ".lambda");
  const json* jmu = find(v, "mu");
  if (jmu == nullptr) vfail(path + ".mu", "missing");
  mp.mu = get_double_vec(*jmu, mp.N, path + ".mu");
  mp.lambda_hat = find(v, "lambda_hat") != nullptr
                      ? get_double_vec(*find(v, "lambda_hat"), mp.N,
                                       path + ".lambda_hat")
                      : std::vector<double>(mp.N, 0.0);
  mp.mu_hat =
      find(v, "mu_hat") != nullptr
          ? get_double_vec(*find(v, "mu_hat"), mp.N, path + ".mu_hat")
          : std::vector<double>(mp.N, 0.0);
  const json* jl0 = find(v, "lambda0_hat");
  if (jl0 == nullptr) vfail(path + ".lambda0_hat", "missing");
  mp.lambda0_hat = get_double(*jl0, path + ".lambda0_hat");

  if (const json* svc = find(v, "service"); svc != nullptr) {
    if (svc->is_array()) {
      if (static_cast<int>(svc->size()) != mp.N)
        vfail(path + ".service",
              "expected " + std::to_string(mp.N) + " entries");
      for (std::size_t i = 0; i < svc->size(); ++i)
        mp.service.push_back(parse_service_law(
            (*svc)[i], path + ".service[" + std::to_string(i) + "]"));
    } else {
      mp.service.assign(mp.N, parse_service_law(*svc, path + ".service"));
    }
  } else {
    mp.service.assign(mp.N, ServiceLaw::exponential());
  }

  if (const json* ss = find(v, "sigma_ser"); ss != nullptr) {
    mp.sigma_ser = get_double_vec(*ss, mp.N, path + ".sigma_ser");
  } else {
    mp.sigma_ser.resize(mp.N);
    for (int i = 0; i < mp.N; ++i)
      mp.sigma_ser[i] = mp.service[i].coeff_variation();
  }

  const json* rt = find(v, "routing");
  if (rt == nullptr) vfail(path + ".routing", "missing");
  expect_object(*rt, path + ".routing");
  reject_unknown_keys(*rt, path + ".routing", {"p", "ell", "with_replacement"});
  if (const json* jp = find(*rt, "p"); jp != nullptr) {
    mp.p = get_double_vec(*jp, mp.N, path + ".routing.p");
  } else {
    const json* jell = find(*rt, "ell");
    if (jell == nullptr) vfail(path + ".routing", "needs either p or ell");
    const int ell = static_cast<int>(get_int(*jell, path + ".routing.ell"));
    bool with_replacement = true;
    if (const json* wr = find(*rt, "with_replacement"); wr != nullptr)
      with_replacement = get_bool(*wr, path + ".routing.with_replacement");
    if (ell < 1 || ell > mp.N)
      vfail(path + ".routing.ell", "must lie in [1, N]");
    try {
      mp.p = poc_probabilities(mp.N, ell, with_replacement);
    } catch (const std::invalid_argument& e) {
      vfail(path + ".routing", e.what());
    }
  }

  if (const json* jic = find(v, "ic"); jic != nullptr) {
    expect_object(*jic, path + ".ic");
    reject_unknown_keys(*jic, path + ".ic",
                        {"regime", "x0", "alpha", "residual"});
    if (const json* rg = find(*jic, "regime"); rg != nullptr) {
      const std::string regime = get_string(*rg, path + ".ic.regime");
      if (regime == "ic0")
        mp.ic.regime = IcSpec::Regime::ic0;
      else if (regime == "ic_alpha")
        mp.ic.regime = IcSpec::Regime::ic_alpha;
      else
        vfail(path + ".ic.regime", "expected ic0 or ic_alpha");
    }
    if (const json* ja = find(*jic, "alpha"); ja != nullptr)
      mp.ic.alpha = get_int(*ja, path + ".ic.alpha");
    if (const json* jx = find(*jic, "x0"); jx != nullptr) {
      if (jx->is_string()) {
        if (jx->get<std::string>() != "alpha")
          vfail(path + ".ic.x0", "expected an array, an integer or \"alpha\"");
        mp.ic.x0_at_alpha = true;
      } else {
        mp.ic.x0 = get_int_vec(*jx, mp.N, path + ".ic.x0");
      }
    } else {
      mp.ic.x0.assign(mp.N, 0);
    }
    if (const json* jr = find(*jic, "residual"); jr != nullptr) {
      expect_object(*jr, path + ".ic.residual");
      reject_unknown_keys(*jr, path + ".ic.residual", {"policy", "scale", "z0"});
      const json* pol = find(*jr, "policy");
      if (pol == nullptr) vfail(path + ".ic.residual.policy", "missing");
      const std::string policy = get_string(*pol, path + ".ic.residual.policy");
      if (policy == "scaled") {
        mp.ic.residual = IcSpec::ResidualPolicy::scaled;
        if (const json* sc = find(*jr, "scale"); sc != nullptr)
          mp.ic.residual_scale =
              get_double(*sc, path + ".ic.residual.scale");
      } else if (policy == "explicit") {
        mp.ic.residual = IcSpec::ResidualPolicy::explicit_values;
        const json* z0 = find(*jr, "z0");
        if (z0 == nullptr) vfail(path + ".ic.residual.z0", "missing");
        mp.ic.z0 = get_double_vec(*z0, mp.N, path + ".ic.residual.z0");
      } else {
        vfail(path + ".ic.residual.policy", "expected scaled or explicit");
      }
    }
  } else {
    mp.ic.x0.assign(mp.N, 0);
  }
  return mp;
}

json model_to_json(const ModelParams& mp) {
  json j;
  j["N"] = mp.N;
  j["n"] = mp.n;
  j["lambda"] = mp.lambda;
  j["lambda_hat"] = mp.lambda_hat;
  j["mu"] = mp.mu;
  j["mu_hat"] = mp.mu_hat;
  j["lambda0_hat"] = mp.lambda0_hat;
  json svc = json::array();
  for (const auto& law : mp.service) svc.push_back(service_law_to_json(law));
  j["service"] = svc;
  j["sigma_ser"] = mp.sigma_ser;
  j["routing"] = json{{"p", mp.p}};
  json ic;
  ic["regime"] = mp.ic.regime == IcSpec::Regime::ic0 ? "ic0" : "ic_alpha";
  if (mp.ic.x0_at_alpha)
    ic["x0"] = "alpha";
  else
    ic["x0"] = mp.ic.x0;
  ic["alpha"] = mp.ic.alpha;
  if (mp.ic.residual == IcSpec::ResidualPolicy::scaled) {
    ic["residual"] = json{{"policy", "scaled"}, {"scale", mp.ic.residual_scale}};
  } else {
    ic["residual"] = json{{"policy", "explicit"}, {"z0", mp.ic.z0}};
  }
  j["ic"] = ic;
  return j;
}

DiffusionParams parse_diffusion(const json& v, const std::string& path) {
  expect_object(v, path);
  reject_unknown_keys(v, path, {"b", "m", "sigma", "x0"});
  DiffusionParams dp;
  const json* jb = find(v, "b");
  if (jb == nullptr) vfail(path + ".b", "missing");
  if (!jb->is_array()) vfail(path + ".b", "expected an array");
  dp.b = get_double_vec(*jb, static_cast<int>(jb->size()), path + ".b");
  const int N = static_cast<int>(dp.b.size());
  dp.m = find(v, "m") != nullptr ? get_double_vec(*find(v, "m"), N, path + ".m")
                                 : std::vector<double>(N, 0.0);
  const json* js = find(v, "sigma");
  if (js == nullptr) vfail(path + ".sigma", "missing");
  dp.sigma = get_double_vec(*js, N, path + ".sigma");
  dp.x0 = find(v, "x0") != nullptr
              ? get_double_vec(*find(v, "x0"), N, path + ".x0")
              : std::vector<double>(N, 0.0);
  return dp;
}

json diffusion_to_json(const DiffusionParams& dp) {
  return json{{"b", dp.b}, {"m", dp.m}, {"sigma", dp.sigma}, {"x0", dp.x0}};
}

EmitPaths parse_emit(const std::string& s, const std::string& path) {
  if (s == "none") return EmitPaths::none;
  if (s == "first") return EmitPaths::first;
  if (s == "all") return EmitPaths::all;
  vfail(path, "expected none, first or all");
}

std::string emit_name(EmitPaths e) {
  switch (e) {
    case EmitPaths::none:
      return "none";
    case EmitPaths::first:
      return "first";
    case EmitPaths::all:
      return "all";
  }
  return "?";
}

json check_to_json(const CheckResult& c) {
  json j;
  j["name"] = c.name;
  j["value"] = c.value;
  j["threshold"] = c.threshold;
  j["comparison"] = c.comparison;
  j["pass"] = c.pass;
  j["sample_sizes"] = c.sample_sizes;
  j["seeds"] = c.seeds;
  return j;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string rep_name(const char* stem, std::size_t rep, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_rep%04zu.%s", stem, rep, ext);
  return buf;
}

}  // namespace

std::string experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::queue:
      return "queue";
    case ExperimentKind::sde:
      return "sde";
    case ExperimentKind::convergence:
      return "convergence";
    case ExperimentKind::uniqueness:
      return "uniqueness";
    case ExperimentKind::occupation:
      return "occupation";
    case ExperimentKind::idle:
      return "idle";
  }
  return "?";
}

ExperimentKind experiment_kind_from_name(const std::string& name) {
  if (name == "queue") return ExperimentKind::queue;
  if (name == "sde") return ExperimentKind::sde;
  if (name == "convergence") return ExperimentKind::convergence;
  if (name == "uniqueness") return ExperimentKind::uniqueness;
  if (name == "occupation") return ExperimentKind::occupation;
  if (name == "idle") return ExperimentKind::idle;
  throw ConfigValidationError(
      "experiment: unknown kind \"" + name +
      "\" (expected queue, sde, convergence, uniqueness, occupation or idle)");
}

DiffusionParams ExperimentConfig::effective_diffusion() const {
  if (has_diffusion) return diffusion;
  if (!has_model)
    throw ConfigValidationError(
        "diffusion: missing (provide a diffusion or a model section)");
  return diffusion_params(model);
}

ModelParams ExperimentConfig::model_at(std::int64_t n_value) const {
  ModelParams mp = model;
  mp.n = n_value;
  return mp;
}

void ExperimentConfig::validate() const {
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw ConfigValidationError("horizon: must be a nonnegative real");
  if (replications < 1)
    throw ConfigValidationError("replications: must be a positive integer");

  const bool needs_model = kind == ExperimentKind::queue ||
                           kind == ExperimentKind::convergence ||
                           kind == ExperimentKind::idle;
  if (needs_model && !has_model)
    throw ConfigValidationError("model: required for this experiment kind");
  const bool needs_sde = kind != ExperimentKind::queue;
  if (needs_sde && !has_model && !has_diffusion)
    throw ConfigValidationError(
        "diffusion: required (directly or derived from a model section)");
  try {
    if (has_model) model.validate();
    if (has_diffusion) diffusion.validate();
    if (needs_sde) effective_diffusion().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigValidationError(e.what());
  }

  if (needs_sde && !(horizon > 0.0))
    throw ConfigValidationError("horizon: must be positive");
  if (!(sde.dt > 0.0)) throw ConfigValidationError("sde.dt: must be positive");

  const auto check_divides = [&](double dt, const std::string& field) {
    const double steps = std::round(horizon / dt);
    if (steps < 1.0 || std::abs(steps * dt - horizon) > 1e-9 * std::max(horizon, 1.0))
      throw ConfigValidationError(field + ": must divide the horizon");
  };
  if (needs_sde && kind != ExperimentKind::uniqueness)
    check_divides(sde.dt, "sde.dt");

  if (n_ladder.empty()) throw ConfigValidationError("n_ladder: must be nonempty");
  for (std::size_t k = 0; k < n_ladder.size(); ++k) {
    if (n_ladder[k] < 1)
      throw ConfigValidationError("n_ladder[" + std::to_string(k) +
                                  "]: must be a positive integer");
    if (k > 0 && n_ladder[k] <= n_ladder[k - 1])
      throw ConfigValidationError("n_ladder: must be strictly increasing");
  }
  if (dt_ladder.empty())
    throw ConfigValidationError("dt_ladder: must be nonempty");
  for (std::size_t k = 0; k < dt_ladder.size(); ++k) {
    if (!(dt_ladder[k] > 0.0))
      throw ConfigValidationError("dt_ladder[" + std::to_string(k) +
                                  "]: must be positive");
    if (k > 0 && dt_ladder[k] <= dt_ladder[k - 1])
      throw ConfigValidationError("dt_ladder: must be strictly increasing");
    if (kind == ExperimentKind::uniqueness)
      check_divides(dt_ladder[k], "dt_ladder[" + std::to_string(k) + "]");
  }
  if (eps_ladder.empty())
    throw ConfigValidationError("eps_ladder: must be nonempty");
  for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
    if (!(eps_ladder[k] > 0.0))
      throw ConfigValidationError("eps_ladder[" + std::to_string(k) +
                                  "]: must be positive");
    if (k > 0 && eps_ladder[k] <= eps_ladder[k - 1])
      throw ConfigValidationError("eps_ladder: must be strictly increasing");
  }
  if (!(thresholds.ks > 0.0))
    throw ConfigValidationError("thresholds.ks: must be positive");
  if (!(thresholds.idle >= 0.0))
    throw ConfigValidationError("thresholds.idle: must be nonnegative");
  if (!(thresholds.gap > 0.0))
    throw ConfigValidationError("thresholds.gap: must be positive");
  if (!(thresholds.occupation > 0.0))
    throw ConfigValidationError("thresholds.occupation: must be positive");

  if (kind == ExperimentKind::convergence) {
    if (model.ic.regime != IcSpec::Regime::ic0)
      throw ConfigValidationError(
          "model.ic.regime: convergence experiments use the ic0 regime");
    try {
      for (std::int64_t n_value : n_ladder) model_at(n_value).validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigValidationError(std::string(e.what()) +
                                  " (along the n_ladder)");
    }
  }
  if (kind == ExperimentKind::idle &&
      model.ic.regime != IcSpec::Regime::ic_alpha)
    throw ConfigValidationError(
        "model.ic.regime: idle experiments use the ic_alpha regime");
  if (kind == ExperimentKind::occupation) {
    const int N = static_cast<int>(effective_diffusion().b.size());
    if (pair[0] < 1 || pair[0] > N || pair[1] < 1 || pair[1] > N ||
        pair[0] == pair[1])
      throw ConfigValidationError("pair: expected two distinct 1-based "
                                  "coordinates within [1, N]");
  }
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigParseError("config root must be an object");
  reject_unknown_keys(j, "config",
                      {"experiment", "horizon", "replications", "seed", "model",
                       "diffusion", "sde", "n_ladder", "dt_ladder",
                       "eps_ladder", "thresholds", "emit", "pair"});

  ExperimentConfig cfg;
  const json* kind = find(j, "experiment");
  if (kind == nullptr) vfail("experiment", "missing");
  cfg.kind = experiment_kind_from_name(get_string(*kind, "experiment"));

  if (const json* h = find(j, "horizon"); h != nullptr)
    cfg.horizon = get_double(*h, "horizon");
  const json* reps = find(j, "replications");
  if (reps == nullptr) vfail("replications", "missing");
  const std::int64_t r = get_int(*reps, "replications");
  if (r < 1) vfail("replications", "must be a positive integer");
  cfg.replications = static_cast<std::size_t>(r);
  if (const json* s = find(j, "seed"); s != nullptr)
    cfg.seed = get_u64(*s, "seed");

  if (const json* m = find(j, "model"); m != nullptr) {
    cfg.has_model = true;
    cfg.model = parse_model(*m, "model");
  }
  if (const json* d = find(j, "diffusion"); d != nullptr) {
    cfg.has_diffusion = true;
    cfg.diffusion = parse_diffusion(*d, "diffusion");
  }
  if (const json* s = find(j, "sde"); s != nullptr) {
    expect_object(*s, "sde");
    reject_unknown_keys(*s, "sde", {"dt", "reflected", "tie_rule", "tie_rule_b"});
    if (const json* dt = find(*s, "dt"); dt != nullptr)
      cfg.sde.dt = get_double(*dt, "sde.dt");
    if (const json* rf = find(*s, "reflected"); rf != nullptr)
      cfg.sde.reflected = get_bool(*rf, "sde.reflected");
    try {
      if (const json* tr = find(*s, "tie_rule"); tr != nullptr)
        cfg.sde.rule = tie_rule_from_name(get_string(*tr, "sde.tie_rule"));
      if (const json* tb = find(*s, "tie_rule_b"); tb != nullptr)
        cfg.sde.rule_b = tie_rule_from_name(get_string(*tb, "sde.tie_rule_b"));
    } catch (const std::invalid_argument& e) {
      vfail("sde.tie_rule", e.what());
    }
  }

  if (const json* nl = find(j, "n_ladder"); nl != nullptr) {
    cfg.n_ladder = get_int_vec(*nl, -1, "n_ladder");
  } else if (cfg.has_model) {
    cfg.n_ladder = {cfg.model.n};
  } else {
    cfg.n_ladder = {1};
  }
  if (const json* dl = find(j, "dt_ladder"); dl != nullptr) {
    if (!dl->is_array()) vfail("dt_ladder", "expected an array");
    cfg.dt_ladder = get_double_vec(*dl, -1, "dt_ladder");
  } else {
    cfg.dt_ladder = {cfg.sde.dt};
  }
  if (const json* el = find(j, "eps_ladder"); el != nullptr) {
    if (!el->is_array()) vfail("eps_ladder", "expected an array");
    cfg.eps_ladder = get_double_vec(*el, -1, "eps_ladder");
  } else {
    cfg.eps_ladder = {0.003, 0.01, 0.03, 0.1};
  }
  if (const json* th = find(j, "thresholds"); th != nullptr) {
    expect_object(*th, "thresholds");
    reject_unknown_keys(*th, "thresholds", {"ks", "idle", "gap", "occupation"});
    if (const json* v = find(*th, "ks"); v != nullptr)
      cfg.thresholds.ks = get_double(*v, "thresholds.ks");
    if (const json* v = find(*th, "idle"); v != nullptr)
      cfg.thresholds.idle = get_double(*v, "thresholds.idle");
    if (const json* v = find(*th, "gap"); v != nullptr)
      cfg.thresholds.gap = get_double(*v, "thresholds.gap");
    if (const json* v = find(*th, "occupation"); v != nullptr)
      cfg.thresholds.occupation = get_double(*v, "thresholds.occupation");
  }
  if (const json* e = find(j, "emit"); e != nullptr) {
    cfg.emit = parse_emit(get_string(*e, "emit"), "emit");
  } else {
    cfg.emit = (cfg.kind == ExperimentKind::queue ||
                cfg.kind == ExperimentKind::sde)
                   ? EmitPaths::first
                   : EmitPaths::none;
  }
  if (const json* p = find(j, "pair"); p != nullptr) {
    const auto v = get_int_vec(*p, -1, "pair");
    if (v.size() != 2) vfail("pair", "expected two 1-based coordinates");
    cfg.pair = {static_cast<int>(v[0]), static_cast<int>(v[1])};
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigParseError(e.what());
  }
  return config_from_json_text(text);
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = experiment_kind_name(cfg.kind);
  j["horizon"] = cfg.horizon;
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  if (cfg.has_model) j["model"] = model_to_json(cfg.model);
  if (cfg.has_diffusion) j["diffusion"] = diffusion_to_json(cfg.diffusion);
  j["sde"] = json{{"dt", cfg.sde.dt},
                  {"reflected", cfg.sde.reflected},
                  {"tie_rule", tie_rule_name(cfg.sde.rule)},
                  {"tie_rule_b", tie_rule_name(cfg.sde.rule_b)}};
  j["n_ladder"] = cfg.n_ladder;
  j["dt_ladder"] = cfg.dt_ladder;
  j["eps_ladder"] = cfg.eps_ladder;
  j["thresholds"] = json{{"ks", cfg.thresholds.ks},
                         {"idle", cfg.thresholds.idle},
                         {"gap", cfg.thresholds.gap},
                         {"occupation", cfg.thresholds.occupation}};
  j["emit"] = emit_name(cfg.emit);
  j["pair"] = cfg.pair;
  return j.dump(2) + "\n";
}

bool ExperimentOutcome::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

QueueTerminal queue_terminal(const ModelParams& mp, double horizon,
                             std::uint64_t seed) {
  const EventLog log = simulate(mp, horizon, seed);
  const double s = 1.0 / mp.sqrt_n();
  const double lambda0_hat_n = s * log.lambda0_n;
  const double alpha = mp.ic.regime == IcSpec::Regime::ic_alpha
                           ? static_cast<double>(mp.alpha_n())
                           : 0.0;
  QueueTerminal out;
  out.xhat.resize(mp.N);
  out.xs.resize(mp.N);
  out.lhat.resize(mp.N);
  out.mhat.resize(mp.N);
  for (int i = 0; i < mp.N; ++i) {
    out.xhat[i] = s * static_cast<double>(log.x_T[i]);
    out.xs[i] = s * (static_cast<double>(log.x_T[i]) - alpha);
    out.lhat[i] = s * log.mu_n[i] * log.idle_T[i];
    out.mhat[i] = s * static_cast<double>(log.a_T[i]) -
                  lambda0_hat_n * log.p_integral_T[i];
  }
  return out;
}

QueueMonteCarlo queue_monte_carlo(const ModelParams& mp, double horizon,
                                  std::size_t replications,
                                  std::uint64_t master_seed, unsigned jobs) {
  mp.validate();
  QueueMonteCarlo mc;
  mc.xs.resize(replications);
  mc.lhat.resize(replications);
  mc.mhat.resize(replications);
  mc.lhat_max.resize(replications);
  parallel_for(replications, jobs, [&](std::size_t rep) {
    const QueueTerminal term = queue_terminal(
        mp, horizon, derive_seed(master_seed, kSeedDomainQueue, rep));
    mc.xs[rep] = term.xs;
    mc.lhat[rep] = term.lhat;
    mc.mhat[rep] = term.mhat;
    mc.lhat_max[rep] =
        *std::max_element(term.lhat.begin(), term.lhat.end());
  });
  return mc;
}

SdeMonteCarlo sde_monte_carlo(const DiffusionParams& dp, double T, double dt,
                              bool reflected, TieRule rule,
                              std::span<const double> x0,
                              std::size_t replications,
                              std::uint64_t master_seed, unsigned jobs) {
  dp.validate();
  SdeMonteCarlo mc;
  mc.x.resize(replications);
  mc.l.resize(replications);
  const std::vector<double> x0v(x0.begin(), x0.end());
  parallel_for(replications, jobs, [&](std::size_t rep) {
    const SdePath path =
        integrate(dp, T, dt, derive_seed(master_seed, kSeedDomainSde, rep),
                  reflected, rule, x0v);
    const std::size_t last = path.t.size() - 1;
    std::vector<double> x(path.N), l(path.N);
    for (int i = 0; i < path.N; ++i) {
      x[i] = path.x[i][last];
      l[i] = path.l[i][last];
    }
    mc.x[rep] = std::move(x);
    mc.l[rep] = std::move(l);
  });
  return mc;
}

std::vector<CheckResult> ranked_ks_checks(
    const std::vector<std::vector<double>>& a,
    const std::vector<std::vector<double>>& b, double threshold,
    const std::string& name_prefix) {
  const auto ra = ranked_marginals(a);
  const auto rb = ranked_marginals(b);
  if (ra.size() != rb.size())
    throw std::invalid_argument("ranked_ks_checks: dimension mismatch");
  std::vector<CheckResult> checks;
  for (std::size_t r = 0; r < ra.size(); ++r) {
    CheckResult c;
    c.name = name_prefix + ".rank" + std::to_string(r + 1);
    c.value = ks_statistic(ra[r], rb[r]);
    c.threshold = threshold;
    c.comparison = "<=";
    c.pass = c.value <= threshold;
    c.sample_sizes = {a.size(), b.size()};
    checks.push_back(std::move(c));
  }
  return checks;
}

namespace {

struct DriverResult {
  std::vector<CheckResult> checks;
  json summary;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
};

json mean_std_json(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return json::object();
  const std::size_t N = rows.front().size();
  std::vector<double> mean(N, 0.0), var(N, 0.0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < N; ++i) mean[i] += row[i];
  }
  for (std::size_t i = 0; i < N; ++i)
    mean[i] /= static_cast<double>(rows.size());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < N; ++i) {
      const double d = row[i] - mean[i];
      var[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < N; ++i)
    var[i] = rows.size() > 1 ? var[i] / static_cast<double>(rows.size() - 1)
                             : 0.0;
  std::vector<double> sd(N);
  for (std::size_t i = 0; i < N; ++i) sd[i] = std::sqrt(var[i]);
  return json{{"mean", mean}, {"stddev", sd}, {"replications", rows.size()}};
}

json queue_sidecar(const ModelParams& mp, const EventLog& log) {
  json j;
  j["kind"] = "queue";
  j["seed"] = log.seed;
  j["n"] = log.n;
  j["N"] = log.N;
  j["horizon"] = log.horizon;
  j["regime"] = mp.ic.regime == IcSpec::Regime::ic0 ? "ic0" : "ic_alpha";
  j["alpha_n"] =
      mp.ic.regime == IcSpec::Regime::ic_alpha ? mp.alpha_n() : 0;
  j["lambda_n"] = log.lambda_n;
  j["mu_n"] = log.mu_n;
  j["lambda0_n"] = log.lambda0_n;
  j["p"] = mp.p;
  j["events"] = log.events.size();
  return j;
}

json sde_sidecar(const DiffusionParams& dp, const SdePath& path) {
  json j;
  j["kind"] = "sde";
  j["seed"] = path.seed;
  j["dt"] = path.dt;
  j["horizon"] = path.horizon;
  j["reflected"] = path.reflected;
  j["tie_rule"] = tie_rule_name(path.rule);
  j["b"] = dp.b;
  j["m"] = dp.m;
  j["sigma"] = dp.sigma;
  j["x0"] = dp.x0;
  return j;
}

DriverResult run_queue_driver(const ExperimentConfig& cfg, unsigned jobs) {
  DriverResult out;
  const QueueMonteCarlo mc = queue_monte_carlo(cfg.model, cfg.horizon,
                                               cfg.replications, cfg.seed, jobs);
  out.summary["terminal_xs"] = mean_std_json(mc.xs);
  out.summary["terminal_lhat"] = mean_std_json(mc.lhat);
  out.summary["terminal_mhat"] = mean_std_json(mc.mhat);
  out.summary["idle_fraction"] = idle_fraction(mc.lhat_max);

  const std::size_t emit_count = cfg.emit == EmitPaths::none ? 0
                                 : cfg.emit == EmitPaths::first
                                     ? 1
                                     : cfg.replications;
  for (std::size_t rep = 0; rep < emit_count; ++rep) {
    const EventLog log = simulate(
        cfg.model, cfg.horizon, derive_seed(cfg.seed, kSeedDomainQueue, rep));
    const ScaledPath sp = scaled_path(log, cfg.model, cfg.model.ic.regime);
    out.files.emplace_back(rep_name("queue", rep, "csv"), scaled_path_csv(sp));
    out.files.emplace_back(rep_name("queue", rep, "json"),
                           queue_sidecar(cfg.model, log).dump(2) + "\n");
  }
  return out;
}

DriverResult run_sde_driver(const ExperimentConfig& cfg, unsigned jobs) {
  DriverResult out;
  const DiffusionParams dp = cfg.effective_diffusion();
  const SdeMonteCarlo mc =
      sde_monte_carlo(dp, cfg.horizon, cfg.sde.dt, cfg.sde.reflected,
                      cfg.sde.rule, dp.x0, cfg.replications, cfg.seed, jobs);
  out.summary["terminal_x"] = mean_std_json(mc.x);
  out.summary["terminal_l"] = mean_std_json(mc.l);
  const std::size_t emit_count = cfg.emit == EmitPaths::none ? 0
                                 : cfg.emit == EmitPaths::first
                                     ? 1
                                     : cfg.replications;
  for (std::size_t rep = 0; rep < emit_count; ++rep) {
    const SdePath path = integrate(dp, cfg.horizon, cfg.sde.dt,
                                   derive_seed(cfg.seed, kSeedDomainSde, rep),
                                   cfg.sde.reflected, cfg.sde.rule, dp.x0);
    out.files.emplace_back(rep_name("sde", rep, "csv"), sde_path_csv(path));
    out.files.emplace_back(rep_name("sde", rep, "json"),
                           sde_sidecar(dp, path).dump(2) + "\n");
  }
  return out;
}

DriverResult run_convergence_driver(const ExperimentConfig& cfg, unsigned jobs) {
  DriverResult out;
  const DiffusionParams dp = cfg.effective_diffusion();
  const SdeMonteCarlo smc =
      sde_monte_carlo(dp, cfg.horizon, cfg.sde.dt, cfg.sde.reflected,
                      cfg.sde.rule, dp.x0, cfg.replications, cfg.seed, jobs);
  json per_n = json::object();
  for (const std::int64_t n_value : cfg.n_ladder) {
    const ModelParams mp = cfg.model_at(n_value);
    const QueueMonteCarlo qmc =
        queue_monte_carlo(mp, cfg.horizon, cfg.replications, cfg.seed, jobs);
    const std::string tag = "n=" + std::to_string(n_value);
    auto x_checks =
        ranked_ks_checks(qmc.xs, smc.x, cfg.thresholds.ks, "ks.x." + tag);
    auto l_checks =
        ranked_ks_checks(qmc.lhat, smc.l, cfg.thresholds.ks, "ks.lhat." + tag);
    json ks = json::object();
    for (const auto& c : x_checks) ks[c.name] = c.value;
    for (const auto& c : l_checks) ks[c.name] = c.value;
    per_n[tag] = ks;
    for (auto& c : x_checks) out.checks.push_back(std::move(c));
    for (auto& c : l_checks) out.checks.push_back(std::move(c));
  }
  out.summary["ks"] = per_n;
  out.summary["sde_terminal_x"] = mean_std_json(smc.x);
  return out;
}

DriverResult run_uniqueness_driver(const ExperimentConfig& cfg, unsigned jobs) {
  DriverResult out;
  const DiffusionParams dp = cfg.effective_diffusion();
  std::vector<double> medians(cfg.dt_ladder.size());
  for (std::size_t d = 0; d < cfg.dt_ladder.size(); ++d) {
    std::vector<double> gaps(cfg.replications);
    parallel_for(cfg.replications, jobs, [&](std::size_t rep) {
      const CoupledPaths pair = integrate_coupled(
          dp, cfg.horizon, cfg.dt_ladder[d],
          derive_seed(cfg.seed, kSeedDomainCoupled, rep), cfg.sde.reflected,
          cfg.sde.rule, cfg.sde.rule_b, dp.x0);
      gaps[rep] = pair.gap;
    });
    medians[d] = median(gaps);
  }
  json med = json::object();
  for (std::size_t d = 0; d < cfg.dt_ladder.size(); ++d)
    med["dt=" + format_double(cfg.dt_ladder[d])] = medians[d];
  out.summary["median_gap"] = med;

  // Walking the ladder downward, the median sup-gap must shrink.
  for (std::size_t d = cfg.dt_ladder.size(); d-- > 1;) {
    CheckResult c;
    c.name = "gap.median.decreasing.dt=" + format_double(cfg.dt_ladder[d - 1]);
    c.value = medians[d - 1];
    c.threshold = medians[d];
    c.comparison = "<";
    c.pass = medians[d - 1] < medians[d];
    c.sample_sizes = {cfg.replications};
    out.checks.push_back(std::move(c));
  }
  CheckResult final_check;
  final_check.name = "gap.median.final.dt=" + format_double(cfg.dt_ladder.front());
  final_check.value = medians.front();
  final_check.threshold = cfg.thresholds.gap;
  final_check.pass = medians.front() <= cfg.thresholds.gap;
  final_check.sample_sizes = {cfg.replications};
  out.checks.push_back(std::move(final_check));
  return out;
}

DriverResult run_occupation_driver(const ExperimentConfig& cfg, unsigned jobs) {
  DriverResult out;
  const DiffusionParams dp = cfg.effective_diffusion();
  const int i = cfg.pair[0] - 1;
  const int j = cfg.pair[1] - 1;
  const std::size_t E = cfg.eps_ladder.size();
  std::vector<std::vector<double>> occ(cfg.replications,
                                       std::vector<double>(E, 0.0));
  parallel_for(cfg.replications, jobs, [&](std::size_t rep) {
    const SdePath path = integrate(dp, cfg.horizon, cfg.sde.dt,
                                   derive_seed(cfg.seed, kSeedDomainSde, rep),
                                   cfg.sde.reflected, cfg.sde.rule, dp.x0);
    for (std::size_t e = 0; e < E; ++e)
      occ[rep][e] = occupation_near_tie(path, i, j, cfg.eps_ladder[e]);
  });
  std::vector<double> means(E, 0.0);
  for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
    for (std::size_t e = 0; e < E; ++e) means[e] += occ[rep][e];
  }
  for (std::size_t e = 0; e < E; ++e)
    means[e] /= static_cast<double>(cfg.replications);

  json mj = json::object();
  for (std::size_t e = 0; e < E; ++e)
    mj["eps=" + format_double(cfg.eps_ladder[e])] = means[e];
  out.summary["mean_occupation"] = mj;

  for (std::size_t e = 0; e + 1 < E; ++e) {
    CheckResult c;
    c.name = "occupation.monotone.eps=" + format_double(cfg.eps_ladder[e]);
    c.value = means[e];
    c.threshold = means[e + 1];
    c.comparison = "<=";
    c.pass = means[e] <= means[e + 1];
    c.sample_sizes = {cfg.replications};
    out.checks.push_back(std::move(c));
  }
  CheckResult small_eps;
  small_eps.name =
      "occupation.mean.eps=" + format_double(cfg.eps_ladder.front());
  small_eps.value = means.front();
  small_eps.threshold = cfg.thresholds.occupation * cfg.horizon;
  small_eps.pass = means.front() <= small_eps.threshold;
  small_eps.sample_sizes = {cfg.replications};
  out.checks.push_back(std::move(small_eps));
  return out;
}

DriverResult run_idle_driver(const ExperimentConfig& cfg, unsigned jobs) {
  DriverResult out;
  const QueueMonteCarlo qmc = queue_monte_carlo(cfg.model, cfg.horizon,
                                                cfg.replications, cfg.seed, jobs);
  const double frac = idle_fraction(qmc.lhat_max);
  CheckResult idle_check;
  idle_check.name = "idle_fraction";
  idle_check.value = frac;
  idle_check.threshold = cfg.thresholds.idle;
  idle_check.pass = frac <= cfg.thresholds.idle;
  idle_check.sample_sizes = {cfg.replications};
  out.checks.push_back(std::move(idle_check));

  const DiffusionParams dp = cfg.effective_diffusion();
  const SdeMonteCarlo smc = sde_monte_carlo(
      dp, cfg.horizon, cfg.sde.dt, /*reflected=*/false, cfg.sde.rule, dp.x0,
      cfg.replications, cfg.seed, jobs);
  auto ks_checks =
      ranked_ks_checks(qmc.xs, smc.x, cfg.thresholds.ks, "ks.xcheck");
  json ks = json::object();
  for (const auto& c : ks_checks) ks[c.name] = c.value;
  out.summary["ks"] = ks;
  out.summary["idle_fraction"] = frac;
  for (auto& c : ks_checks) out.checks.push_back(std::move(c));
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg,
                                 const std::string& out_dir, unsigned jobs) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  DriverResult result;
  switch (cfg.kind) {
    case ExperimentKind::queue:
      result = run_queue_driver(cfg, jobs);
      break;
    case ExperimentKind::sde:
      result = run_sde_driver(cfg, jobs);
      break;
    case ExperimentKind::convergence:
      result = run_convergence_driver(cfg, jobs);
      break;
    case ExperimentKind::uniqueness:
      result = run_uniqueness_driver(cfg, jobs);
      break;
    case ExperimentKind::occupation:
      result = run_occupation_driver(cfg, jobs);
      break;
    case ExperimentKind::idle:
      result = run_idle_driver(cfg, jobs);
      break;
  }

  ExperimentOutcome outcome;
  outcome.checks = result.checks;
  for (auto& check : outcome.checks) {
    if (check.seeds.empty()) check.seeds = {cfg.seed};
  }

  const auto emit = [&](const std::string& name, const std::string& contents) {
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    write_file(path, contents);
    outcome.files_written.push_back(path);
  };

  emit("manifest.json", config_to_json_text(cfg));
  json report;
  report["experiment"] = experiment_kind_name(cfg.kind);
  report["seed"] = cfg.seed;
  report["replications"] = cfg.replications;
  json checks = json::array();
  for (const auto& c : outcome.checks) checks.push_back(check_to_json(c));
  report["checks"] = checks;
  report["summary"] = result.summary;
  report["pass"] = outcome.all_pass();
  emit("report.json", report.dump(2) + "\n");
  for (const auto& [name, contents] : result.files) emit(name, contents);
  return outcome;
}

}  // namespace poclab
