#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rating_forge/inefficiency_bound.hpp"
#include "rating_forge/mechanism_design.hpp"
#include "rating_forge/stationary_baseline.hpp"
#include "rating_forge/strategy_engine.hpp"

namespace py = pybind11;
using namespace rf;

PYBIND11_MODULE(_core, m) {
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<EngineError>(m, "EngineError", PyExc_RuntimeError);

  py::class_<GameParams>(m, "GameParams")
      .def(py::init([](int n, double b, double c, double eps, double delta) {
             GameParams p;
             p.n_users = n;
             p.benefit = b;
             p.cost = c;
             p.report_error = eps;
             p.discount = delta;
             p.validate();
             return p;
           }),
           py::arg("n_users") = 5, py::arg("benefit") = 3.0, py::arg("cost") = 1.0, py::arg("report_error") = 0.1,
           py::arg("discount") = 0.99)
      .def_readwrite("n_users", &GameParams::n_users)
      .def_readwrite("benefit", &GameParams::benefit)
      .def_readwrite("cost", &GameParams::cost)
      .def_readwrite("report_error", &GameParams::report_error)
      .def_readwrite("discount", &GameParams::discount)
      .def("validate", &GameParams::validate);

  py::class_<RatingUpdateRule>(m, "RatingUpdateRule")
      .def(py::init(&RatingUpdateRule::make), py::arg("beta1_up"), py::arg("beta1_down"), py::arg("beta0_up"),
           py::arg("beta0_down"))
      .def_property_readonly("beta_up", [](const RatingUpdateRule& r) { return r.beta_up; })
      .def_property_readonly("beta_down", [](const RatingUpdateRule& r) { return r.beta_down; });

  py::class_<Plan>(m, "Plan")
      .def_static("parse", &Plan::parse)
      .def_static("from_id", &Plan::from_id)
      .def("id", &Plan::id)
      .def("name", &Plan::name)
      .def("quality", &Plan::quality)
      .def("__eq__", [](const Plan& a, const Plan& b) { return a == b; })
      .def("__repr__", [](const Plan& p) { return "Plan(" + p.name() + ")"; });

  py::class_<RatingDistribution>(m, "RatingDistribution")
      .def(py::init([](int s0, int s1) { return RatingDistribution{s0, s1}; }))
      .def_readonly("s0", &RatingDistribution::s0)
      .def_readonly("s1", &RatingDistribution::s1);

  m.def("stage_payoff", &stage_payoff);
  m.def("x1_plus", &x1_plus);
  m.def("x0_plus", &x0_plus);
  m.def(
      "distribution_transition",
      [](const RatingDistribution& s, const Plan& p, const RatingUpdateRule& r, double eps) {
        return distribution_transition(s, p, r, eps, KernelMode::Exact);
      },
      py::arg("s"), py::arg("plan"), py::arg("rule"), py::arg("eps"));

  py::class_<ConditionReport>(m, "ConditionReport")
      .def_readonly("ordering", &ConditionReport::ordering)
      .def_readonly("high_retention", &ConditionReport::high_retention)
      .def_readonly("low_promotion", &ConditionReport::low_promotion)
      .def_readonly("ordering_slack", &ConditionReport::ordering_slack)
      .def_readonly("high_retention_slack", &ConditionReport::high_retention_slack)
      .def_readonly("low_promotion_slack", &ConditionReport::low_promotion_slack)
      .def("all", &ConditionReport::all);
  m.def("check_conditions", &check_conditions);

  py::class_<PayoffPair>(m, "PayoffPair")
      .def(py::init([](double v0, double v1) { return PayoffPair{v0, v1}; }))
      .def_readwrite("v0", &PayoffPair::v0)
      .def_readwrite("v1", &PayoffPair::v1);

  py::enum_<Z3Source>(m, "Z3Source")
      .value("lifted", Z3Source::Lifted)
      .value("literal", Z3Source::Literal)
      .value("alternate", Z3Source::AlternateForm);

  py::class_<Geometry>(m, "Geometry")
      .def_readonly("kappa1", &Geometry::kappa1)
      .def_readonly("kappa2", &Geometry::kappa2)
      .def_readonly("eps0", &Geometry::eps0)
      .def_readonly("eps1", &Geometry::eps1)
      .def_readonly("z2", &Geometry::z2)
      .def_readonly("z3", &Geometry::z3)
      .def_readonly("target", &Geometry::target)
      .def("nonempty", &Geometry::nonempty);
  m.def("build_geometry", &build_geometry, py::arg("params"), py::arg("xi"), py::arg("source") = Z3Source::Lifted,
        py::arg("z3_slack") = 1.0);
  m.def("membership", &membership, py::arg("v"), py::arg("s"), py::arg("geo"), py::arg("tol") = 0.0);
  m.def("decompose", &decompose, py::arg("v"), py::arg("s"), py::arg("plan"), py::arg("rule"), py::arg("params"),
        py::arg("spread") = 0.0);
  m.def("ic_margin", &ic_margin);

  py::class_<DeltaBound>(m, "DeltaBound")
      .def_readonly("ic", &DeltaBound::ic)
      .def_readonly("fair", &DeltaBound::fair)
      .def_readonly("uniform", &DeltaBound::uniform)
      .def_readonly("bound", &DeltaBound::bound)
      .def_readonly("feasible", &DeltaBound::feasible);
  m.def("delta_lower_bound", &delta_lower_bound, py::arg("rule"), py::arg("params"), py::arg("xi"),
        py::arg("source") = Z3Source::Lifted, py::arg("z3_slack") = 1.0);
  m.def("whitewash_benefit", &whitewash_benefit);

  py::class_<BoundResult>(m, "BoundResult")
      .def_readonly("zeta", &BoundResult::zeta)
      .def_readonly("normalized_bound", &BoundResult::normalized_bound)
      .def_readonly("found", &BoundResult::found);
  m.def("zeta", [](const GameParams& p, const RatingUpdateRule& r) { return zeta(p, r); });

  py::class_<SearchResult>(m, "SearchResult")
      .def_readonly("found", &SearchResult::found)
      .def_readonly("welfare", &SearchResult::welfare)
      .def_readonly("normalized", &SearchResult::normalized)
      .def_readonly("rule", &SearchResult::rule)
      .def_property_readonly("strategy", [](const SearchResult& r) { return r.strategy.encode(); });
  m.def(
      "search_stationary",
      [](const GameParams& p, const std::string& subset, double grid_step, bool threshold) {
        SearchOptions o;
        o.subset = parse_subset(subset);
        o.grid_step = grid_step;
        o.space = threshold ? StrategySpace::Threshold : StrategySpace::Full;
        py::gil_scoped_release nogil;
        return search(p, o);
      },
      py::arg("params"), py::arg("subset") = "afs", py::arg("grid_step") = 0.1, py::arg("threshold") = false);
}
