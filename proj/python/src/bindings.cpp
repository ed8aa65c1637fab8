#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ovcost/cli.hpp"
#include "ovcost/coder.hpp"
#include "ovcost/cost_model.hpp"
#include "ovcost/errors.hpp"
#include "ovcost/overflow.hpp"
#include "ovcost/sources.hpp"
#include "ovcost/spectrum.hpp"

namespace py = pybind11;
using namespace ovc;

namespace {

// Exact rational from int, str (decimal literal), fractions.Fraction or float
// (read through its shortest repr, so 0.1 means 1/10).
Rational to_rational(const py::handle& h) {
  if (py::isinstance<py::bool_>(h)) throw InvalidInput("booleans are not numbers");
  if (py::isinstance<py::int_>(h)) return Rational(mpz_class(py::str(h).cast<std::string>(), 10));
  if (py::isinstance<py::str>(h)) return parse_decimal(h.cast<std::string>());
  if (py::hasattr(h, "numerator") && py::hasattr(h, "denominator") && !py::isinstance<py::float_>(h)) {
    Rational q(mpz_class(py::str(h.attr("numerator")).cast<std::string>(), 10),
               mpz_class(py::str(h.attr("denominator")).cast<std::string>(), 10));
    q.canonicalize();
    return q;
  }
  if (py::isinstance<py::float_>(h)) return parse_decimal(py::repr(h).cast<std::string>());
  throw InvalidInput("expected an int, str, Fraction or float");
}

std::vector<Rational> to_rationals(const py::iterable& items) {
  std::vector<Rational> out;
  for (const auto& h : items) out.push_back(to_rational(h));
  return out;
}

py::object to_fraction(const Rational& q) {
  const py::object fraction = py::module_::import("fractions").attr("Fraction");
  return fraction(py::int_(py::str(q.get_num().get_str())), py::int_(py::str(q.get_den().get_str())));
}

py::dict report_dict(const BoundReport& r) {
  py::dict d;
  d["n"] = r.n;
  d["eta"] = r.eta;
  d["measured"] = r.measured;
  d["ci95"] = r.ci95;
  d["lemma1_rhs"] = r.lemma1_rhs;
  d["lemma1_rhs_tight"] = r.lemma1_rhs_tight;
  d["lemma2_rhs"] = r.lemma2_rhs;
  d["z"] = r.z;
  d["pass1"] = r.pass1;
  d["pass2"] = r.pass2;
  d["exact"] = r.exact;
  d["ties"] = r.ties;
  d["cost_bound_certified"] = r.cost_bound_certified;
  d["trials"] = r.trials;
  d["seed"] = r.seed;
  return d;
}

py::dict curve_dict(const SpectrumCurve& c) {
  py::dict d;
  d["n"] = c.n;
  d["kind"] = c.kind == SpectrumKind::FirstOrder ? "first" : "second";
  d["a"] = c.a;
  d["grid"] = c.grid;
  d["values"] = c.values;
  d["method"] = method_name(c.method);
  d["trials"] = c.trials;
  d["seed"] = c.seed;
  return d;
}

py::dict threshold_dict(const ThresholdEstimate& t) {
  py::dict d;
  d["epsilon"] = t.epsilon;
  d["kind"] = t.kind == SpectrumKind::FirstOrder ? "first" : "second";
  d["a"] = t.a;
  d["lower"] = t.lower;
  d["upper"] = t.upper;
  d["value"] = t.value;
  d["n"] = t.n;
  d["analytic"] = t.analytic ? py::object(py::float_(*t.analytic)) : py::object(py::none());
  return d;
}

SpectrumOptions spectrum_options(const std::string& method, std::uint64_t trials, std::uint64_t seed,
                                 std::uint64_t budget) {
  SpectrumOptions o;
  if (method == "auto") {
    o.method = SpectrumMethod::Auto;
  } else if (method == "exact") {
    o.method = SpectrumMethod::Exact;
  } else if (method == "binomial") {
    o.method = SpectrumMethod::Binomial;
  } else if (method == "mc") {
    o.method = SpectrumMethod::MonteCarlo;
  } else {
    throw InvalidInput("method must be auto, exact, binomial or mc");
  }
  o.trials = trials;
  o.seed = seed;
  o.budget = budget;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variable-length coding under unequal symbol costs";
  m.attr("__version__") = cli::version();

  auto base = py::register_exception<Error>(m, "OvcostError", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base);
  py::register_exception<CapacityNotUniform>(m, "CapacityNotUniform", base);
  py::register_exception<EnumerationTooLarge>(m, "EnumerationTooLarge", base);
  py::register_exception<UnencodableInput>(m, "UnencodableInput", base);
  py::register_exception<DecodeFailure>(m, "DecodeFailure", base);
  py::register_exception<ConstructionBug>(m, "ConstructionBug", base);
  py::register_exception<BoundViolation>(m, "BoundViolation", base);
  py::register_exception<DegenerateSource>(m, "DegenerateSource", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<BracketNotFound>(m, "BracketNotFound", base);

  py::class_<CostFunction>(m, "CostFunction")
      .def_static("unit", &CostFunction::unit, py::arg("K"))
      .def_static(
          "memoryless", [](const py::iterable& costs) { return CostFunction::memoryless(to_rationals(costs)); },
          py::arg("costs"))
      .def_static(
          "table",
          [](int K, int depth, const py::dict& table) {
            std::map<Word, std::vector<Rational>> t;
            for (const auto& [key, costs] : table) {
              t.emplace(digits_to_word(key.cast<std::string>()), to_rationals(costs.cast<py::iterable>()));
            }
            return CostFunction(K, depth, t);
          },
          py::arg("K"), py::arg("depth"), py::arg("table"),
          "Context-dependent costs keyed by context digit strings ('' is the empty context).")
      .def_property_readonly("K", &CostFunction::alphabet_size)
      .def_property_readonly("depth", &CostFunction::depth)
      .def_property_readonly("c_max", &CostFunction::c_max)
      .def(
          "cost", [](const CostFunction& c, const Word& context, int u) { return c.cost(context, u); },
          py::arg("context"), py::arg("symbol"))
      .def(
          "string_cost", [](const CostFunction& c, const Word& u) { return string_cost(c, u); }, py::arg("word"))
      .def(
          "string_cost_exact", [](const CostFunction& c, const Word& u) { return to_fraction(string_cost_exact(c, u)); },
          py::arg("word"));

  py::class_<CostCapacity>(m, "CostCapacity")
      .def_readonly("alpha_c", &CostCapacity::alpha_c)
      .def_property_readonly("per_context_roots", [](const CostCapacity& c) {
        py::dict d;
        for (const auto& [ctx, root] : c.per_context_roots) d[py::str(context_label(ctx))] = root;
        return d;
      });
  m.def("solve_cost_capacity", &solve_cost_capacity, py::arg("cost"),
        py::arg("uniformity_tol") = kDefaultUniformityTolerance);
  m.def(
      "capacity_residual",
      [](const CostFunction& c, const Word& context, double alpha) { return capacity_residual(c, context, alpha); },
      py::arg("cost"), py::arg("context"), py::arg("alpha"));

  py::class_<SourceModel>(m, "SourceModel")
      .def_static(
          "bernoulli", [](const py::handle& p) { return SourceModel::bernoulli(to_rational(p)); }, py::arg("p"))
      .def_static(
          "iid", [](const py::iterable& pmf) { return SourceModel::iid(to_rationals(pmf)); }, py::arg("pmf"))
      .def_static(
          "markov",
          [](const py::iterable& initial, const py::iterable& transition) {
            std::vector<std::vector<Rational>> rows;
            for (const auto& row : transition) rows.push_back(to_rationals(row.cast<py::iterable>()));
            return SourceModel::markov(to_rationals(initial), std::move(rows));
          },
          py::arg("initial"), py::arg("transition"))
      .def_static(
          "mixture",
          [](const std::vector<std::pair<py::object, SourceModel>>& parts) {
            std::vector<std::pair<Rational, SourceModel>> c;
            for (const auto& [w, s] : parts) c.emplace_back(to_rational(w), s);
            return SourceModel::mixture(std::move(c));
          },
          py::arg("components"), "Components as a list of (weight, source) pairs.")
      .def_property_readonly("alphabet_size", &SourceModel::alphabet_size)
      .def_property_readonly("kind",
                             [](const SourceModel& s) {
                               switch (s.kind()) {
                                 case SourceModel::Kind::Iid:
                                   return "iid";
                                 case SourceModel::Kind::Markov:
                                   return "markov";
                                 default:
                                   return "mixture";
                               }
                             })
      .def(
          "probability", [](const SourceModel& s, const Word& x) { return s.probability(x); }, py::arg("x"))
      .def(
          "probability_exact", [](const SourceModel& s, const Word& x) { return to_fraction(s.probability_exact(x)); },
          py::arg("x"))
      .def(
          "self_information", [](const SourceModel& s, const Word& x, int K) { return s.self_information(x, K); },
          py::arg("x"), py::arg("K") = 2)
      .def("sample", &SourceModel::sample, py::arg("n"), py::arg("seed"));

  py::class_<IntervalEncoder>(m, "IntervalEncoder")
      .def(py::init([](const SourceModel& src, int n, const CostFunction& cost, const CostCapacity& cap,
                       std::uint64_t budget, bool allow_streaming) {
             EncoderOptions o;
             o.materialize_budget = budget;
             o.allow_streaming = allow_streaming;
             return IntervalEncoder(src, n, cost, cap, o);
           }),
           py::arg("source"), py::arg("n"), py::arg("cost"), py::arg("capacity"),
           py::arg("budget") = std::uint64_t{1} << 16, py::arg("allow_streaming") = true)
      .def_property_readonly("n", &IntervalEncoder::block_length)
      .def_property_readonly("materialized", &IntervalEncoder::materialized)
      .def_property_readonly("alpha_c", &IntervalEncoder::alpha_c)
      .def_property_readonly("cost_bound_slack", &IntervalEncoder::cost_bound_slack)
      .def(
          "encode",
          [](const IntervalEncoder& e, const Word& x) {
            const Codeword cw = e.encode(x);
            return py::make_tuple(cw.symbols, to_fraction(cw.cost));
          },
          py::arg("x"), "Returns (code symbols, exact cost as a Fraction).")
      .def(
          "decode", [](const IntervalEncoder& e, const Word& w) { return e.decode(w); }, py::arg("codeword"))
      .def(
          "decode_prefix", [](const IntervalEncoder& e, const Word& w) { return e.decode_prefix(w); },
          py::arg("stream"), "Returns (x, code symbols consumed).")
      .def("kraft_sum", [](const IntervalEncoder& e) { return kraft_sum(e); })
      .def("certify_cost_bound",
           [](const IntervalEncoder& e) {
             const auto r = certify_cost_bound(e);
             py::dict d;
             d["max_slack"] = r.max_slack;
             d["bound"] = r.bound;
             d["violations"] = r.violations;
             d["ok"] = r.ok;
             return d;
           })
      .def("export_codebook", [](const IntervalEncoder& e) {
        std::ostringstream os;
        export_codebook(os, e.codebook());
        return os.str();
      });

  m.def("pack_bits", [](const Word& w) {
    const auto bytes = pack_bits(w);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def(
      "unpack_bits",
      [](const py::bytes& b, std::size_t bits) {
        const std::string s = b;
        const std::vector<std::uint8_t> bytes(s.begin(), s.end());
        return unpack_bits(bytes, bits);
      },
      py::arg("data"), py::arg("bit_count"));

  m.def(
      "overflow_exact",
      [](const IntervalEncoder& e, const SourceModel& s, double eta) {
        return to_fraction(overflow_exact_rational(e.codebook(), s, eta));
      },
      py::arg("encoder"), py::arg("source"), py::arg("eta"), "Exact overflow probability as a Fraction.");
  m.def(
      "overflow_mc",
      [](const IntervalEncoder& e, const SourceModel& s, double eta, std::uint64_t trials, std::uint64_t seed) {
        const auto r = overflow_mc(e, s, eta, trials, seed);
        py::dict d;
        d["estimate"] = r.estimate;
        d["ci95"] = r.ci95;
        d["trials"] = r.trials;
        d["seed"] = r.seed;
        return d;
      },
      py::arg("encoder"), py::arg("source"), py::arg("eta"), py::arg("trials") = 100000, py::arg("seed") = 1);
  m.def("lemma1_rhs", &lemma1_rhs, py::arg("source"), py::arg("eta"), py::arg("z"), py::arg("alpha_c"),
        py::arg("c_max"), py::arg("n"), py::arg("K"));
  m.def("lemma2_rhs", &lemma2_rhs, py::arg("source"), py::arg("eta"), py::arg("z"), py::arg("alpha_c"), py::arg("n"),
        py::arg("K"));

  m.def(
      "verify_bounds",
      [](const SourceModel& src, const CostFunction& cost, const CostCapacity& cap, const std::vector<int>& n_list,
         std::optional<double> R, std::optional<double> a, std::optional<double> L, const std::string& z_rule,
         double z_value, const std::string& method, std::uint64_t trials, std::uint64_t seed) {
        ThresholdSchedule schedule;
        if (R) {
          schedule = ThresholdSchedule::first_order(*R);
        } else if (a && L) {
          schedule = ThresholdSchedule::second_order(*a, *L);
        } else {
          throw InvalidInput("give R, or both a and L");
        }
        ZRule z;
        z.value = z_value;
        if (z_rule == "direct") {
          z.kind = ZRule::Kind::Direct;
        } else if (z_rule == "converse") {
          z.kind = ZRule::Kind::Converse;
        } else if (z_rule == "fixed") {
          z.kind = ZRule::Kind::Fixed;
        } else {
          throw InvalidInput("z_rule must be direct, converse or fixed");
        }
        VerifyOptions o;
        o.method = method == "exact" ? Method::Exact : method == "mc" ? Method::MonteCarlo : Method::Auto;
        o.trials = trials;
        o.seed = seed;
        py::list out;
        for (const auto& r : verify_bounds(src, cost, cap, schedule, n_list, z, o)) out.append(report_dict(r));
        return out;
      },
      py::arg("source"), py::arg("cost"), py::arg("capacity"), py::arg("n_list"), py::arg("R") = py::none(),
      py::arg("a") = py::none(), py::arg("L") = py::none(), py::arg("z_rule") = "direct", py::arg("z_value") = 0.1,
      py::arg("method") = "auto", py::arg("trials") = 100000, py::arg("seed") = 1);

  m.def("gaussian_cdf", &gaussian_cdf, py::arg("t"));
  m.def("gaussian_quantile", &gaussian_quantile, py::arg("p"));
  m.def(
      "spectrum",
      [](const SourceModel& src, double alpha, int K, int n, const std::vector<double>& grid, std::optional<double> a,
         const std::string& method, std::uint64_t trials, std::uint64_t seed, std::uint64_t budget) {
        const auto o = spectrum_options(method, trials, seed, budget);
        return curve_dict(a ? spectrum_second_order(src, alpha, K, *a, n, grid, o)
                            : spectrum_first_order(src, alpha, K, n, grid, o));
      },
      py::arg("source"), py::arg("alpha_c"), py::arg("K"), py::arg("n"), py::arg("grid"), py::arg("a") = py::none(),
      py::arg("method") = "auto", py::arg("trials") = 100000, py::arg("seed") = 1,
      py::arg("budget") = std::uint64_t{1} << 16,
      "First-order curve Pr{iota/(n alpha) >= R}, or the second-order curve around rate a when a is given.");
  m.def(
      "threshold",
      [](const SourceModel& src, double alpha, int K, double eps, const std::vector<int>& n_schedule,
         const std::vector<double>& grid, std::optional<double> a, const std::string& method, std::uint64_t trials,
         std::uint64_t seed, std::uint64_t budget) {
        const auto o = spectrum_options(method, trials, seed, budget);
        return threshold_dict(a ? threshold_second_order(src, alpha, K, *a, eps, n_schedule, grid, o)
                                : threshold_first_order(src, alpha, K, eps, n_schedule, grid, o));
      },
      py::arg("source"), py::arg("alpha_c"), py::arg("K"), py::arg("epsilon"), py::arg("n_schedule"), py::arg("grid"),
      py::arg("a") = py::none(), py::arg("method") = "auto", py::arg("trials") = 100000, py::arg("seed") = 1,
      py::arg("budget") = std::uint64_t{1} << 16);
  m.def(
      "threshold_second_order_iid",
      [](const std::vector<double>& pmf, double alpha, int K, double eps) {
        return threshold_second_order_iid(pmf, alpha, K, eps);
      },
      py::arg("pmf"), py::arg("alpha_c"), py::arg("K"),
        py::arg("epsilon"));
  m.def("make_grid", &make_grid, py::arg("lo"), py::arg("hi"), py::arg("step"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI command line; returns (exit code, stdout, stderr).");
}
