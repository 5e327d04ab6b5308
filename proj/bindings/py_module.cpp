#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poclab/experiments.hpp"
#include "poclab/model.hpp"
#include "poclab/queue_sim.hpp"
#include "poclab/reflect.hpp"
#include "poclab/sde_sim.hpp"
#include "poclab/stats.hpp"

namespace py = pybind11;
using namespace poclab;

namespace {

IcSpec::Regime regime_from_name(const std::string& name) {
  if (name == "ic0") return IcSpec::Regime::ic0;
  if (name == "ic_alpha") return IcSpec::Regime::ic_alpha;
  throw std::invalid_argument("regime must be \"ic0\" or \"ic_alpha\"");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Power-of-choice load balancing queues, their rank-based diffusion "
      "limits, and the statistical harness comparing the two.";

  py::class_<ServiceLaw>(m, "ServiceLaw")
      .def_static("exponential", &ServiceLaw::exponential)
      .def_static("erlang", &ServiceLaw::erlang, py::arg("k"))
      .def_static("hyperexp2", &ServiceLaw::hyperexp2, py::arg("cv"))
      .def_static("lognormal", &ServiceLaw::lognormal, py::arg("cv"))
      .def_property_readonly("cv", &ServiceLaw::coeff_variation)
      .def("__repr__", [](const ServiceLaw& s) { return s.name(); });

  py::class_<IcSpec>(m, "IcSpec")
      .def(py::init<>())
      .def_property(
          "regime",
          [](const IcSpec& ic) {
            return ic.regime == IcSpec::Regime::ic0 ? "ic0" : "ic_alpha";
          },
          [](IcSpec& ic, const std::string& r) {
            ic.regime = regime_from_name(r);
          })
      .def_readwrite("x0", &IcSpec::x0)
      .def_readwrite("x0_at_alpha", &IcSpec::x0_at_alpha)
      .def_readwrite("alpha", &IcSpec::alpha);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("N", &ModelParams::N)
      .def_readwrite("n", &ModelParams::n)
      .def_readwrite("lambda_", &ModelParams::lambda)
      .def_readwrite("lambda_hat", &ModelParams::lambda_hat)
      .def_readwrite("lambda0_hat", &ModelParams::lambda0_hat)
      .def_readwrite("mu", &ModelParams::mu)
      .def_readwrite("mu_hat", &ModelParams::mu_hat)
      .def_readwrite("sigma_ser", &ModelParams::sigma_ser)
      .def_readwrite("p", &ModelParams::p)
      .def_readwrite("service", &ModelParams::service)
      .def_readwrite("ic", &ModelParams::ic)
      .def("validate", &ModelParams::validate)
      .def("alpha_n", &ModelParams::alpha_n);

  py::class_<DiffusionParams>(m, "DiffusionParams")
      .def(py::init<>())
      .def_readwrite("b", &DiffusionParams::b)
      .def_readwrite("m", &DiffusionParams::m)
      .def_readwrite("sigma", &DiffusionParams::sigma)
      .def_readwrite("x0", &DiffusionParams::x0)
      .def("validate", &DiffusionParams::validate);

  m.def("diffusion_params", &diffusion_params, py::arg("model"));
  m.def(
      "rank_vector",
      [](const std::vector<double>& x) {
        return rank_vector(std::span<const double>(x));
      },
      py::arg("x"));
  m.def("poc_probabilities", &poc_probabilities, py::arg("n_servers"),
        py::arg("ell"), py::arg("with_replacement") = true);
  m.def(
      "permissible_permutations",
      [](const std::vector<double>& x) {
        return permissible_permutations(std::span<const double>(x));
      },
      py::arg("x"));
  m.def(
      "in_drift_hull",
      [](const std::vector<double>& beta, const std::vector<double>& x,
         const std::vector<double>& b, double tol) {
        if (tol < 0.0) tol = default_hull_tol(b);
        return in_drift_hull(beta, x, b, tol);
      },
      py::arg("beta"), py::arg("x"), py::arg("b"), py::arg("tol") = -1.0);

  m.def(
      "skorokhod_map",
      [](const std::vector<double>& t, const std::vector<double>& y) {
        const ReflectedPair pair = skorokhod_map(t, y);
        return py::make_tuple(pair.x, pair.z);
      },
      py::arg("t"), py::arg("y"),
      "Returns (x, z) with x = y + z >= 0 and z the running supremum of "
      "the negative part of y.");
  m.def("reflect_step", &reflect_step, py::arg("x_prev"), py::arg("increment"));

  py::class_<EventLog>(m, "EventLog")
      .def_readonly("N", &EventLog::N)
      .def_readonly("n", &EventLog::n)
      .def_readonly("seed", &EventLog::seed)
      .def_readonly("horizon", &EventLog::horizon)
      .def_property_readonly(
          "num_events",
          [](const EventLog& log) { return log.events.size(); })
      .def_readonly("x_T", &EventLog::x_T)
      .def_readonly("e_T", &EventLog::e_T)
      .def_readonly("a_T", &EventLog::a_T)
      .def_readonly("d_T", &EventLog::d_T)
      .def_readonly("a0_T", &EventLog::a0_T)
      .def_readonly("busy_T", &EventLog::busy_T)
      .def_readonly("idle_T", &EventLog::idle_T)
      .def(
          "event",
          [](const EventLog& log, std::size_t k) {
            const Event& e = log.events.at(k);
            return py::make_tuple(e.t, static_cast<int>(e.kind),
                                  static_cast<int>(e.server),
                                  static_cast<int>(e.theta));
          },
          py::arg("k"), "(t, kind, server, theta); kind 0=dep 1=ded 2=lbs");

  m.def("simulate", &simulate, py::arg("model"), py::arg("horizon"),
        py::arg("seed"));
  m.def("verify_event_log", &verify_event_log, py::arg("log"),
        py::arg("model"));

  py::class_<ScaledPath>(m, "ScaledPath")
      .def_readonly("t", &ScaledPath::t)
      .def_readonly("xhat", &ScaledPath::xhat)
      .def_readonly("xs", &ScaledPath::xs)
      .def_readonly("lhat", &ScaledPath::lhat)
      .def_readonly("u", &ScaledPath::u)
      .def_readonly("u_pre", &ScaledPath::u_pre)
      .def_readonly("mhat", &ScaledPath::mhat)
      .def_readonly("a0hat", &ScaledPath::a0hat);

  m.def(
      "scaled_path",
      [](const EventLog& log, const ModelParams& mp, const std::string& regime) {
        return scaled_path(log, mp, regime_from_name(regime));
      },
      py::arg("log"), py::arg("model"), py::arg("regime"));

  m.def(
      "martingale_residual",
      [](const EventLog& log, const ModelParams& mp) {
        const MartingalePath path = martingale_residual(log, mp);
        return py::make_tuple(path.t, path.m, path.qv);
      },
      py::arg("log"), py::arg("model"));

  py::class_<SdePath>(m, "SdePath")
      .def_readonly("N", &SdePath::N)
      .def_readonly("dt", &SdePath::dt)
      .def_readonly("t", &SdePath::t)
      .def_readonly("x", &SdePath::x)
      .def_readonly("l", &SdePath::l)
      .def_readonly("beta", &SdePath::beta)
      .def_readonly("db", &SdePath::db);

  m.def(
      "integrate",
      [](const DiffusionParams& dp, double T, double dt, std::uint64_t seed,
         bool reflected, const std::string& tie_rule,
         const std::vector<double>& x0) {
        return integrate(dp, T, dt, seed, reflected,
                         tie_rule_from_name(tie_rule), x0);
      },
      py::arg("diffusion"), py::arg("T"), py::arg("dt"), py::arg("seed"),
      py::arg("reflected") = true, py::arg("tie_rule") = "block-average",
      py::arg("x0"));
  m.def(
      "integrate_coupled",
      [](const DiffusionParams& dp, double T, double dt, std::uint64_t seed,
         bool reflected, const std::string& rule_a, const std::string& rule_b,
         const std::vector<double>& x0) {
        CoupledPaths pair =
            integrate_coupled(dp, T, dt, seed, reflected,
                              tie_rule_from_name(rule_a),
                              tie_rule_from_name(rule_b), x0);
        return py::make_tuple(std::move(pair.a), std::move(pair.b), pair.gap);
      },
      py::arg("diffusion"), py::arg("T"), py::arg("dt"), py::arg("seed"),
      py::arg("reflected"), py::arg("rule_a"), py::arg("rule_b"),
      py::arg("x0"));

  m.def(
      "occupation_near_tie",
      [](const SdePath& path, int i, int j, double eps) {
        return occupation_near_tie(path, i, j, eps);
      },
      py::arg("path"), py::arg("i"), py::arg("j"), py::arg("eps"));
  m.def(
      "occupation_near_tie_knots",
      [](const std::vector<double>& t, const std::vector<double>& xi,
         const std::vector<double>& xj, double eps) {
        return occupation_near_tie(std::span<const double>(t),
                                   std::span<const double>(xi),
                                   std::span<const double>(xj), eps);
      },
      py::arg("t"), py::arg("xi"), py::arg("xj"), py::arg("eps"),
      "Exact occupation for paths piecewise linear between knots.");

  m.def(
      "ks_statistic",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return ks_statistic(std::span<const double>(a),
                            std::span<const double>(b));
      },
      py::arg("a"), py::arg("b"));
  m.def("ks_critical_5pct", &ks_critical_5pct, py::arg("m1"), py::arg("m2"));
  m.def(
      "ranked_marginals",
      [](const std::vector<std::vector<double>>& terminals) {
        std::vector<std::vector<double>> out;
        for (const SampleSet& s : ranked_marginals(terminals))
          out.push_back(s.as_scalars());
        return out;
      },
      py::arg("terminals"));
  m.def(
      "idle_fraction",
      [](const std::vector<double>& lhat_max) {
        return idle_fraction(std::span<const double>(lhat_max));
      },
      py::arg("max_terminal_lhat"));
  m.def(
      "modulus_of_continuity",
      [](const std::vector<double>& t, const std::vector<double>& f,
         double delta) {
        return modulus_of_continuity(std::span<const double>(t),
                                     std::span<const double>(f), delta);
      },
      py::arg("t"), py::arg("f"), py::arg("delta"));

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& out_dir,
         unsigned jobs) {
        const ExperimentConfig cfg = config_from_json_text(config_json);
        const ExperimentOutcome outcome = run_experiment(cfg, out_dir, jobs);
        py::list checks;
        for (const CheckResult& c : outcome.checks) {
          py::dict d;
          d["name"] = c.name;
          d["value"] = c.value;
          d["threshold"] = c.threshold;
          d["pass"] = c.pass;
          checks.append(d);
        }
        return checks;
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("jobs") = 1,
      "Run an experiment config (JSON text); returns the check list.");
}
