#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <vector>

#include "mlemsparse/certify.hpp"
#include "mlemsparse/divergence.hpp"
#include "mlemsparse/mlem.hpp"
#include "mlemsparse/model.hpp"
#include "mlemsparse/stats.hpp"

namespace py = pybind11;
using namespace mlemsparse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vector to_vector(const Array& a) {
  if (a.ndim() != 1) throw DimensionError("expected a one-dimensional array");
  return Vector(a.data(), a.data() + a.size());
}

py::array_t<double> to_array(const Vector& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Column-normalized operator together with the scale that was divided out.
struct PyOperator {
  ForwardOperator op;
  Vector scale;
};

PyOperator from_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("operator must be a two-dimensional array");
  const auto m = static_cast<std::size_t>(a.shape(0));
  const auto r = static_cast<std::size_t>(a.shape(1));
  std::vector<Vector> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i].assign(a.data() + i * r, a.data() + (i + 1) * r);
  NormalizedOperator n = normalize_operator(ForwardOperator(Grid::line(static_cast<int>(r)), rows));
  return {std::move(n.op), std::move(n.scale)};
}

DataVector to_data(const py::array& y) {
  if (py::isinstance<py::array_t<std::uint64_t>>(y) || py::isinstance<py::array_t<std::int64_t>>(y)) {
    const auto counts = y.cast<std::vector<std::uint64_t>>();
    return DataVector::from_counts(counts);
  }
  return DataVector::from_frequencies(to_vector(y.cast<Array>()));
}

Measure to_measure(const PyOperator& p, const Array& w) {
  return Measure(p.op.grid(), to_vector(w));
}

py::dict trace_dict(const std::vector<IterateDiagnostics>& trace) {
  std::vector<int> k;
  std::vector<double> loss_v, kl, mass, pct, sup, res;
  std::vector<std::size_t> supp;
  for (const auto& d : trace) {
    k.push_back(d.k);
    loss_v.push_back(d.loss);
    kl.push_back(d.kl_to_data);
    mass.push_back(d.mass);
    pct.push_back(d.percentile_value);
    supp.push_back(d.support_size);
    sup.push_back(d.kkt_sup);
    res.push_back(d.kkt_residual_on_support);
  }
  py::dict out;
  out["k"] = py::array(py::cast(k));
  out["loss"] = py::array(py::cast(loss_v));
  out["kl_to_data"] = py::array(py::cast(kl));
  out["mass"] = py::array(py::cast(mass));
  out["percentile_value"] = py::array(py::cast(pct));
  out["support_size"] = py::array(py::cast(supp));
  out["kkt_sup"] = py::array(py::cast(sup));
  out["kkt_residual_on_support"] = py::array(py::cast(res));
  return out;
}

py::dict bound_dict(const BoundPair& b) {
  py::dict d;
  d["sanov"] = b.sanov;
  d["alt"] = b.alt;
  d["sanov_vacuous"] = b.sanov_vacuous;
  d["alt_vacuous"] = b.alt_vacuous;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Poisson ML-EM, dual certificates and concentration bounds";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ConditionError>(m, "ConditionError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());

  py::class_<PyOperator>(m, "Operator")
      .def(py::init(&from_matrix), py::arg("matrix"),
           "Column-normalizes a nonnegative m x r matrix; zero columns leave the field of view.")
      .def_static(
          "parallel_beam",
          [](int nx, int ny, int n_views, int n_tangential, double spacing,
             std::optional<double> strip_width, int supersampling) {
            const auto grid = std::make_shared<const Grid>(nx, ny, std::array{spacing, spacing});
            NormalizedOperator n = build_parallel_beam(
                grid, ParallelBeamGeometry{n_views, n_tangential, strip_width, supersampling});
            return PyOperator{std::move(n.op), std::move(n.scale)};
          },
          py::arg("nx"), py::arg("ny"), py::arg("n_views") = 30, py::arg("n_tangential") = 32,
          py::arg("spacing") = 1.0, py::arg("strip_width") = py::none(),
          py::arg("supersampling") = 4)
      .def_property_readonly("shape",
                             [](const PyOperator& p) { return py::make_tuple(p.op.rows(), p.op.cols()); })
      .def_property_readonly("column_scale", [](const PyOperator& p) { return to_array(p.scale); })
      .def_property_readonly("fov", [](const PyOperator& p) {
        const auto& mask = p.op.grid()->fov_mask();
        return py::array(py::cast(std::vector<bool>(mask.begin(), mask.end())));
      })
      .def("dense", [](const PyOperator& p) {
        py::array_t<double> out({p.op.rows(), p.op.cols()});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < p.op.rows(); ++i) {
          for (std::size_t j = 0; j < p.op.cols(); ++j) v(i, j) = p.op.at(i, j);
        }
        return out;
      })
      .def("apply", [](const PyOperator& p, const Array& mu) {
        return to_array(apply(p.op, std::span<const double>(to_vector(mu))));
      }, py::arg("mu"))
      .def("adjoint", [](const PyOperator& p, const Array& w) {
        return to_array(adjoint_apply(p.op, to_vector(w)));
      }, py::arg("w"));

  m.def("kl", [](const Array& u, const Array& v) { return kl_vec(to_vector(u), to_vector(v)); },
        py::arg("u"), py::arg("v"), "sum(v - u - u log(v/u)).");
  m.def("loss", [](const PyOperator& p, const py::array& y, const Array& mu) {
    const LossValue l = loss(p.op, to_data(y), to_measure(p, mu));
    return l.value;
  }, py::arg("op"), py::arg("y"), py::arg("mu"));
  m.def("loss_gradient", [](const PyOperator& p, const py::array& y, const Array& mu) {
    return to_array(loss_gradient(p.op, to_data(y), to_measure(p, mu)));
  }, py::arg("op"), py::arg("y"), py::arg("mu"));
  m.def("dual_value", [](const py::array& y, const Array& lam) {
    return dual_value(to_data(y), DualVector{to_vector(lam), DualVector::Origin::from_iterate});
  }, py::arg("y"), py::arg("lam"));

  m.def("mlem", [](const PyOperator& p, const py::array& y, int iterations,
                   std::optional<Array> mu0, int record_every, double percentile) {
    SolveConfig cfg;
    cfg.max_iters = iterations;
    cfg.record_every = record_every;
    cfg.percentile = percentile;
    const Measure start = mu0 ? to_measure(p, *mu0) : Measure::uniform(p.op.grid());
    const DataVector data = to_data(y);
    std::optional<SolveResult> res;
    {
      py::gil_scoped_release release;
      res.emplace(solve(p.op, data, start, cfg));
    }
    return py::make_tuple(to_array(res->mu.weights()), trace_dict(res->trace));
  }, py::arg("op"), py::arg("y"), py::arg("iterations") = 400, py::arg("mu0") = py::none(),
     py::arg("record_every") = 1, py::arg("percentile") = 0.95,
     "Runs ML-EM; returns (mu, diagnostics).");

  m.def("certify", [](const PyOperator& p, const py::array& y, int iterations, int check_every) {
    const DataVector data = to_data(y);
    SolveConfig cfg;
    cfg.max_iters = iterations;
    cfg.record_every = iterations;
    cfg.projection_every = check_every;
    const SolveResult res = solve(p.op, data, Measure::uniform(p.op.grid()), cfg);
    const CertificateReport rep = certify_outside(p.op, data, res.projections, check_every);
    py::dict d;
    d["certified_outside"] = rep.certified_outside;
    d["dual_value"] = rep.dual_value;
    d["shift_c"] = rep.shift_c;
    d["iterate_index"] = rep.iterate_index;
    d["min_adjoint_value"] = rep.min_adjoint_value;
    d["kl_at_iterate"] = rep.kl_at_iterate;
    d["lambda"] = to_array(rep.lambda_lifted.lambda);
    d["locus"] = rep.certified_outside ? sparsity_locus(p.op, rep) : std::vector<std::size_t>{};
    d["mu"] = to_array(res.mu.weights());
    return d;
  }, py::arg("op"), py::arg("y"), py::arg("iterations") = 500, py::arg("check_every") = 10);

  m.def("cone_membership", [](const PyOperator& p, const Array& y) {
    const ConeVerdict v = cone_membership_oracle(p.op, to_vector(y));
    py::dict d;
    d["status"] = to_string(v.status);
    d["inside"] = v.inside();
    d["witness"] = to_array(v.witness_mu);
    d["farkas"] = to_array(v.farkas);
    d["residual"] = v.residual;
    return d;
  }, py::arg("op"), py::arg("y"));

  m.def("single_detector_iterate", [](const PyOperator& p, std::size_t detector,
                                      const Array& mu0, long long k) {
    return to_array(single_detector_iterate(p.op, detector, to_measure(p, mu0), k).weights());
  }, py::arg("op"), py::arg("detector"), py::arg("mu0"), py::arg("k"));

  m.def("bounds", [](int m_, double epsilon, std::optional<double> n, std::optional<double> t,
                     std::optional<double> gamma) {
    return bound_dict(bounds(BoundInputs{m_, epsilon, n, t, gamma}));
  }, py::arg("m"), py::arg("epsilon"), py::arg("n") = py::none(), py::arg("t") = py::none(),
     py::arg("gamma") = py::none());
  m.def("bell_number", &bell_number, py::arg("n"));

  m.def("sample_counts", [](const PyOperator& p, const Array& mu_real, double t,
                            std::uint64_t seed, std::uint64_t stream) {
    const DoseModel model = make_dose_model(p.op, to_measure(p, mu_real));
    return py::array(py::cast(sample_counts(model, t, seed, stream)));
  }, py::arg("op"), py::arg("mu_real"), py::arg("t"), py::arg("seed"), py::arg("stream") = 0);

  m.def("epsilon_by_search", [](const PyOperator& p, const Array& y_real, double resolution) {
    return epsilon_by_search(p.op, to_vector(y_real), resolution);
  }, py::arg("op"), py::arg("y_real"), py::arg("resolution") = 0.01);

  m.def("escape_probability", [](const PyOperator& p, const Array& mu_real,
                                 const std::vector<double>& doses, std::uint64_t trials,
                                 std::uint64_t seed, std::optional<double> epsilon, int threads) {
    const DoseModel model = make_dose_model(p.op, to_measure(p, mu_real));
    std::vector<EscapeRecord> records;
    {
      py::gil_scoped_release release;
      records = estimate_escape_probability(p.op, model, doses, trials, seed, epsilon, threads);
    }
    py::list out;
    for (const auto& r : records) {
      py::dict d;
      d["t"] = r.t;
      d["trials"] = r.trials;
      d["outside"] = r.outside;
      d["p_hat"] = r.p_hat;
      d["wilson"] = py::make_tuple(r.wilson.lo, r.wilson.hi);
      d["bounds"] = bound_dict(r.bounds);
      d["all_zero_fraction"] = r.all_zero_fraction;
      out.append(d);
    }
    return out;
  }, py::arg("op"), py::arg("mu_real"), py::arg("doses"), py::arg("trials"), py::arg("seed"),
     py::arg("epsilon") = py::none(), py::arg("threads") = 1);
}
