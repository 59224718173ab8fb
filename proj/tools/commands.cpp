#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlemsparse/io.hpp"
#include "mlemsparse/stats.hpp"

namespace mlemsparse::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ordered_json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

// Files produced by one command. Nothing is written until commit(); a
// failed commit removes whatever it had already written.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }

  void add_pgm(const std::string& name, const Grid& grid, std::span<const double> values) {
    io::PgmMeta meta;
    add(name, io::encode_pgm(grid, values, io::PgmEncoding::binary, &meta));
    add(name + ".meta", io::meta_json(meta));
  }

  void add_pgm(const std::string& name, const Grid& grid, std::span<const double> values,
               io::PgmEncoding enc) {
    io::PgmMeta meta;
    add(name, io::encode_pgm(grid, values, enc, &meta));
    add(name + ".meta", io::meta_json(meta));
  }

  void commit() {
    const bool existed = fs::exists(dir_);
    std::vector<fs::path> written;
    try {
      fs::create_directories(dir_);
      for (const auto& [name, content] : files_) {
        const fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        written.push_back(p);
        os << content;
        os.close();
        if (!os) throw std::runtime_error("failed writing " + p.string());
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      if (!existed) fs::remove(dir_, ec);
      throw;
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

class Log {
 public:
  Log(std::ostream& os, bool quiet, std::string tag)
      : os_(os), quiet_(quiet), tag_(std::move(tag)) {}
  void line(const std::string& msg) const {
    if (!quiet_) os_ << "[" << tag_ << "] " << msg << std::endl;
  }

 private:
  std::ostream& os_;
  bool quiet_;
  std::string tag_;
};

std::string dose_prefix(std::size_t d) { return "dose" + std::to_string(d); }

struct Instance {
  NormalizedOperator beam;
  Measure mu_real;
};

Instance build_instance(const ExperimentConfig& c) {
  const GridPtr grid = make_grid(c.grid);
  NormalizedOperator beam = build_parallel_beam(grid, c.projector);
  // Phantom weights are taken relative to the normalized operator.
  Measure mu_real = make_phantom(beam.op.grid(), c.phantom);
  return {std::move(beam), std::move(mu_real)};
}

std::vector<std::uint64_t> json_counts(const nlohmann::json& j) {
  return j.at("counts").get<std::vector<std::uint64_t>>();
}

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig c = g.config ? load_config(*g.config) : ExperimentConfig{};
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.output_dir = *g.out;
  if (g.threads < 1) throw ParameterError("--threads must be >= 1");
  c.validate();
  return c;
}

std::string diagnostics_csv(const std::vector<IterateDiagnostics>& trace) {
  std::string s =
      "k,loss,kl_to_data,mass,percentile_value,support_size,kkt_sup,"
      "kkt_residual_on_support,kl_to_reference\n";
  for (const auto& d : trace) {
    s += std::to_string(d.k) + ',' + fmt(d.loss) + ',' + fmt(d.kl_to_data) + ',' +
         fmt(d.mass) + ',' + fmt(d.percentile_value) + ',' +
         std::to_string(d.support_size) + ',' + fmt(d.kkt_sup) + ',' +
         fmt(d.kkt_residual_on_support) + ',' +
         (d.kl_to_reference ? fmt(*d.kl_to_reference) : std::string()) + '\n';
  }
  return s;
}

std::string certificate_json(const CertificateReport& r) {
  ordered_json j;
  j["certified_outside"] = r.certified_outside;
  j["dual_value"] = number_or_string(r.dual_value);
  j["shift_c"] = number_or_string(r.shift_c);
  j["iterate_index"] = r.iterate_index;
  j["min_adjoint_value"] = number_or_string(r.min_adjoint_value);
  j["lambda"] = r.lambda_lifted.lambda;
  return j.dump(2) + "\n";
}

Vector gaussian_smooth(const Grid& grid, std::span<const double> values, double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    total += kernel[d + radius] = std::exp(-0.5 * d * d / (sigma * sigma));
  }
  for (double& v : kernel) v /= total;
  const int nx = grid.nx(), ny = grid.ny();
  Vector tmp(values.size(), 0.0), out(values.size(), 0.0);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int x = ix + d;
        if (x >= 0 && x < nx) acc += kernel[d + radius] * values[grid.index(x, iy)];
      }
      tmp[grid.index(ix, iy)] = acc;
    }
  }
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int y = iy + d;
        if (y >= 0 && y < ny) acc += kernel[d + radius] * tmp[grid.index(ix, y)];
      }
      out[grid.index(ix, iy)] = acc;
    }
  }
  return out;
}

// ------------------------------------------------------------------ solve

int cmd_solve(const GlobalOptions& g, std::ostream& out, std::ostream& log) {
  const ExperimentConfig c = resolve_config(g);
  if (c.doses.empty()) throw ParameterError("the dose list is empty");
  const Instance inst = build_instance(c);
  const auto& op = inst.beam.op;
  const DoseModel model = make_dose_model(op, inst.mu_real);
  const Measure reference = inst.mu_real.normalized();
  const Grid& grid = *op.grid();

  struct DoseResult {
    std::vector<std::pair<std::string, std::string>> files;
    std::vector<std::string> log;
    std::string summary;
  };
  std::vector<DoseResult> results(c.doses.size());

  parallel_for(c.doses.size(), g.threads, [&](std::size_t d) {
    const double t = c.doses[d];
    DoseResult& res = results[d];
    const auto counts = sample_counts(model, t, c.seed, d);
    const DataVector y = DataVector::from_counts(counts);

    SolveConfig sc;
    sc.max_iters = c.iterations;
    sc.record_every = c.record_every;
    sc.percentile = c.percentile;
    sc.reference_measure = reference;
    sc.projection_every = c.check_every;
    const SolveResult sol = solve(op, y, Measure::uniform(op.grid()), sc);

    // Activity units: unit-mass iterate times N / t.
    const double scale = static_cast<double>(y.total_counts()) / t;
    Vector activity(sol.mu.weights());
    for (double& v : activity) v *= scale;
    Vector clipped(activity);
    for (double& v : clipped) v = std::clamp(v, 0.0, 1.0);
    const Vector smooth = gaussian_smooth(grid, activity, 3.0);

    const std::string p = dose_prefix(d);
    OutputSet tmp("");
    res.files.emplace_back(p + "_diagnostics.csv", diagnostics_csv(sol.trace));
    auto pgm = [&](const std::string& name, const Vector& v) {
      io::PgmMeta meta;
      res.files.emplace_back(name, io::encode_pgm(grid, v, io::PgmEncoding::binary, &meta));
      res.files.emplace_back(name + ".meta", io::meta_json(meta));
    };
    pgm(p + "_final.pgm", activity);
    pgm(p + "_smoothed.pgm", smooth);
    pgm(p + "_clipped.pgm", clipped);

    ordered_json trace;
    trace["dose_index"] = d;
    trace["t"] = t;
    trace["seed"] = c.seed;
    trace["counts"] = counts;
    trace["k"] = sol.projections.k;
    trace["a_mu"] = sol.projections.a_mu;
    res.files.emplace_back(p + "_trace.json", trace.dump() + "\n");

    const auto& last = sol.trace.back();
    res.log.push_back("t=" + short_fmt(t) + " counts=" + std::to_string(y.total_counts()) +
                      " iterations=" + std::to_string(sol.iterations) +
                      " kl_to_data=" + short_fmt(last.kl_to_data) +
                      " kkt_sup=" + short_fmt(last.kkt_sup));
    res.summary = "t=" + short_fmt(t) + " kl_to_data=" + short_fmt(last.kl_to_data) +
                  " percentile=" + short_fmt(last.percentile_value);
  });

  OutputSet files(c.output_dir);
  for (std::size_t d = 0; d < results.size(); ++d) {
    const Log lg(log, g.quiet, "solve " + dose_prefix(d));
    for (const auto& l : results[d].log) lg.line(l);
    for (auto& [name, content] : results[d].files) files.add(name, std::move(content));
  }
  files.commit();
  for (const auto& r : results) out << r.summary << "\n";
  return kOk;
}

// ---------------------------------------------------------------- certify

int cmd_certify(const GlobalOptions& g, std::ostream& out, std::ostream& log) {
  const ExperimentConfig c = resolve_config(g);
  if (c.doses.empty()) throw ParameterError("the dose list is empty");
  const Instance inst = build_instance(c);
  const auto& op = inst.beam.op;

  std::vector<nlohmann::json> traces;
  for (std::size_t d = 0; d < c.doses.size(); ++d) {
    const fs::path p = fs::path(c.output_dir) / (dose_prefix(d) + "_trace.json");
    std::ifstream in(p);
    if (!in) {
      throw StateError("missing trace " + p.string() + "; run `solve` with the same "
                       "configuration first");
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw StateError("unreadable trace " + p.string() + ": " + e.what());
    }
    if (j.at("t").get<double>() != c.doses[d]) {
      throw StateError("trace " + p.string() + " was produced for a different dose");
    }
    traces.push_back(std::move(j));
  }

  OutputSet files(c.output_dir);
  std::vector<std::string> summary;
  for (std::size_t d = 0; d < traces.size(); ++d) {
    const auto& j = traces[d];
    const DataVector y = DataVector::from_counts(json_counts(j));
    ProjectionTrace trace;
    trace.k = j.at("k").get<std::vector<int>>();
    trace.a_mu = j.at("a_mu").get<std::vector<Vector>>();
    if (trace.k.size() != trace.a_mu.size()) throw StateError("malformed trace");
    const CertificateReport rep = certify_outside(op, y, trace, c.check_every);
    files.add(dose_prefix(d) + "_certificate.json", certificate_json(rep));
    Log(log, g.quiet, "certify " + dose_prefix(d))
        .line("best iterate k=" + std::to_string(rep.iterate_index) +
              " shift_c=" + short_fmt(rep.shift_c) + " " + rep.note);
    summary.push_back("t=" + short_fmt(c.doses[d]) +
                      " certified=" + (rep.certified_outside ? "true" : "false") +
                      " g=" + short_fmt(rep.dual_value));
  }
  files.commit();
  for (const auto& s : summary) out << s << "\n";
  return kOk;
}

// ----------------------------------------------------------------- bounds

int cmd_bounds(const BoundsArgs& a, std::ostream& out) {
  if (a.n.empty() == a.t.empty()) {
    throw ParameterError("give either --n or --t with --gamma");
  }
  if (!a.t.empty() && !a.gamma) throw ParameterError("--t needs --gamma");
  if (!a.n.empty() && a.gamma) throw ParameterError("--gamma goes with --t, not --n");

  const BellConstant bell = bound_bell_constant(std::max(a.m, 1));
  struct Row {
    BoundInputs in;
    BoundPair b;
  };
  std::vector<Row> rows;
  for (double n : a.n) {
    BoundInputs in{a.m, a.epsilon, n, std::nullopt, std::nullopt};
    rows.push_back({in, bounds(in)});
  }
  for (double t : a.t) {
    BoundInputs in{a.m, a.epsilon, std::nullopt, t, a.gamma};
    rows.push_back({in, bounds(in)});
  }

  const std::string bell_text =
      bell.exact ? "B_" + std::to_string(a.m + 1) + " = " + std::to_string(bell.bell)
                 : "(0.792 (m+1) / log(m+2))^(m+1) = " + short_fmt(bell.value);
  if (a.csv) {
    out << "m,epsilon,n,t,gamma,bound_sanov,bound_alt,sanov_vacuous,alt_vacuous,"
           "bell_constant,bell_exact\n";
    for (const auto& r : rows) {
      out << a.m << ',' << fmt(a.epsilon) << ','
          << (r.in.n ? fmt(*r.in.n) : "") << ',' << (r.in.t ? fmt(*r.in.t) : "") << ','
          << (r.in.gamma_total ? fmt(*r.in.gamma_total) : "") << ',' << fmt(r.b.sanov)
          << ',' << fmt(r.b.alt) << ',' << (r.b.sanov_vacuous ? "true" : "false") << ','
          << (r.b.alt_vacuous ? "true" : "false") << ',' << fmt(bell.value) << ','
          << (bell.exact ? "true" : "false") << "\n";
    }
    return kOk;
  }
  out << "bell constant C(m): " << bell_text << (bell.exact ? " (exact)" : " (upper bound)")
      << "\n";
  for (const auto& r : rows) {
    if (r.in.n) {
      out << "m=" << a.m << " epsilon=" << short_fmt(a.epsilon) << " n=" << short_fmt(*r.in.n)
          << "\n";
    } else {
      out << "m=" << a.m << " epsilon=" << short_fmt(a.epsilon) << " t=" << short_fmt(*r.in.t)
          << " gamma=" << short_fmt(*r.in.gamma_total) << "\n";
    }
    out << "  sanov bound: " << short_fmt(r.b.sanov)
        << (r.b.sanov_vacuous ? " vacuous" : "") << "\n";
    out << "  alternative bound: " << short_fmt(r.b.alt)
        << (r.b.alt_vacuous ? " vacuous" : "") << "\n";
    out << "  vacuous: " << (r.b.sanov_vacuous && r.b.alt_vacuous ? "true" : "false")
        << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------- dirac-demo

int cmd_dirac_demo(const GlobalOptions& g, std::ostream& out, std::ostream& log) {
  const ExperimentConfig c = resolve_config(g);
  const auto& dc = c.dirac;
  if (dc.detector > 1) throw ParameterError("dirac.detector must be 0 or 1");
  const GridPtr grid = make_grid(c.grid);
  const Vector profile = make_phantom(grid, dc.profile).weights();
  for (double v : profile) {
    if (v > 1.0) throw ParameterError("dirac.profile exceeds 1; it must be a detector sensitivity");
  }
  Vector other(profile.size());
  for (std::size_t j = 0; j < profile.size(); ++j) other[j] = 1.0 - profile[j];
  std::vector<Vector> rows(2);
  rows[dc.detector] = profile;
  rows[1 - dc.detector] = other;
  const ForwardOperator op(grid, rows, true);
  const Measure mu0 = Measure::uniform(grid);

  // Declared maxima: the nodes closest to the bump centres.
  std::vector<ProfileMaximum> maxima;
  for (const auto& b : dc.profile.bumps) {
    std::size_t best = 0;
    double dist = 1e300;
    for (std::size_t j = 0; j < grid->size(); ++j) {
      const auto p = grid->point(j);
      const double d = std::hypot(p[0] - b.center[0], p[1] - b.center[1]);
      if (d < dist) {
        dist = d;
        best = j;
      }
    }
    maxima.push_back({best, two_bumps_hessian(dc.profile, grid->point(best))});
  }
  const Measure predicted = dirac_limit_prediction(profile, mu0, maxima);
  const double pred[2] = {predicted[maxima[0].node], predicted[maxima[1].node]};

  // Neighbourhood of a bump: within three standard deviations, nearer
  // (in those units) to it than to the other bump.
  std::vector<int> owner(grid->size(), -1);
  for (std::size_t j = 0; j < grid->size(); ++j) {
    const auto p = grid->point(j);
    double best = 3.0;
    for (int b = 0; b < 2; ++b) {
      const auto& bp = dc.profile.bumps[b];
      const double d = std::hypot((p[0] - bp.center[0]) / bp.sigma[0],
                                  (p[1] - bp.center[1]) / bp.sigma[1]);
      if (d <= best) {
        best = d;
        owner[j] = b;
      }
    }
  }

  std::string csv = "k,mass_bump1,mass_bump2,mass_other,predicted_bump1,predicted_bump2\n";
  double deviation = 0.0;
  Measure last = mu0;
  const Log lg(log, g.quiet, "dirac-demo");
  for (long long k : dc.k_schedule) {
    last = single_detector_iterate(op, dc.detector, mu0, k);
    double mass[3] = {0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < grid->size(); ++j) {
      mass[owner[j] < 0 ? 2 : owner[j]] += last[j];
    }
    csv += std::to_string(k) + ',' + fmt(mass[0]) + ',' + fmt(mass[1]) + ',' +
           fmt(mass[2]) + ',' + fmt(pred[0]) + ',' + fmt(pred[1]) + '\n';
    deviation = std::max(std::abs(mass[0] - pred[0]) / pred[0],
                         std::abs(mass[1] - pred[1]) / pred[1]);
    lg.line("k=" + std::to_string(k) + " masses=(" + short_fmt(mass[0]) + ", " +
            short_fmt(mass[1]) + ") other=" + short_fmt(mass[2]));
  }
  OutputSet files(c.output_dir);
  files.add("dirac_masses.csv", std::move(csv));
  files.add_pgm("dirac_final.pgm", *grid, last.weights());
  files.add_pgm("dirac_prediction.pgm", *grid, predicted.weights());
  files.commit();
  out << "predicted weights: (" << short_fmt(pred[0]) << ", " << short_fmt(pred[1]) << ")\n";
  out << "max relative deviation at k=" << (dc.k_schedule.empty() ? 0 : dc.k_schedule.back())
      << ": " << short_fmt(deviation) << "\n";
  return kOk;
}

// ------------------------------------------------------------- montecarlo

int cmd_montecarlo(const GlobalOptions& g, std::ostream& out, std::ostream& log) {
  const ExperimentConfig c = resolve_config(g);
  const auto& mc = c.montecarlo;

  std::optional<ForwardOperator> op;
  std::optional<Measure> mu_real;
  if (!mc.rows.empty()) {
    const GridPtr line = Grid::line(static_cast<int>(mc.rows.front().size()));
    NormalizedOperator n = normalize_operator(ForwardOperator(line, mc.rows));
    Vector w(mc.mu_real);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] *= n.scale[j];
    mu_real.emplace(n.op.grid(), std::move(w));
    op.emplace(std::move(n.op));
  } else {
    Instance inst = build_instance(c);
    mu_real.emplace(std::move(inst.mu_real));
    op.emplace(std::move(inst.beam.op));
  }
  const OracleOptions guard;
  if (op->rows() * op->cols() > guard.max_size) {
    throw CapabilityError("montecarlo: m * r = " + std::to_string(op->rows() * op->cols()) +
                          " exceeds the exact-oracle size guard of " +
                          std::to_string(guard.max_size) +
                          "; use montecarlo.rows for a small instance");
  }
  const DoseModel model = make_dose_model(*op, *mu_real);
  const Log lg(log, g.quiet, "montecarlo");
  double eps;
  if (mc.epsilon) {
    eps = *mc.epsilon;
  } else {
    eps = epsilon_by_search(*op, model.y_real, mc.grid_resolution);
    lg.line("epsilon from simplex search: " + fmt(eps));
  }
  const auto records =
      estimate_escape_probability(*op, model, mc.doses, mc.trials, c.seed, eps, g.threads);

  std::string csv = std::string(escape_csv_header()) + "\n";
  for (const auto& r : records) csv += escape_csv_row(r) + "\n";
  OutputSet files(c.output_dir);
  files.add("montecarlo.csv", std::move(csv));
  files.commit();

  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-12s %-27s %-12s %-12s\n", "t", "p_hat",
                "wilson95", "bound_sanov", "bound_alt");
  out << line;
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%-12.6g %-12.6g [%-11.5g, %-11.5g] %-12.6g %-12.6g\n",
                  r.t, r.p_hat, r.wilson.lo, r.wilson.hi, r.bounds.sanov, r.bounds.alt);
    out << line;
  }
  return kOk;
}

// ---------------------------------------------------------------- phantom

int cmd_phantom(const GlobalOptions& g, const PhantomArgs& a, std::ostream& out,
                std::ostream& log) {
  const ExperimentConfig c = resolve_config(g);
  OutputSet files(c.output_dir);
  const GridPtr grid = make_grid(c.grid);
  const auto enc = a.ascii ? io::PgmEncoding::ascii : io::PgmEncoding::binary;
  if (a.export_operator) {
    const Instance inst = build_instance(c);
    files.add_pgm("phantom.pgm", *grid, inst.mu_real.weights(), enc);
    std::ostringstream os;
    io::write_operator(os, inst.beam.op);
    files.add("operator.txt", os.str());
    Log(log, g.quiet, "phantom")
        .line("operator: " + std::to_string(inst.beam.op.rows()) + " detectors, " +
              std::to_string(inst.beam.op.grid()->fov_count()) + " nodes in view");
  } else {
    files.add_pgm("phantom.pgm", *grid, make_phantom(grid, c.phantom).weights(), enc);
  }
  files.commit();
  out << "wrote " << (fs::path(c.output_dir) / "phantom.pgm").string() << "\n";
  return kOk;
}

// -------------------------------------------------------------------- run

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poisson ML-EM reconstruction, dual certificates and concentration bounds",
               "mlemsparse"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  // Global flags are accepted before or after the subcommand.
  auto add_globals = [&](CLI::App* a) {
    auto* grp = a->add_option_group("Global");
    grp->add_option("--config", config_path, "Experiment configuration (JSON)")
        ->check(CLI::ExistingFile);
    grp->add_option("--seed", seed, "Random seed (overrides the configuration)");
    grp->add_option("--out", out_dir, "Output directory (overrides the configuration)");
    grp->add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    grp->add_flag("--quiet", g.quiet, "Suppress progress messages");
  };
  add_globals(&app);

  auto* solve_cmd = app.add_subcommand(
      "solve", "Sample data per dose, run ML-EM, write diagnostics and images");
  auto* certify_cmd = app.add_subcommand(
      "certify", "Search the solve traces for dual certificates of y outside the cone");

  BoundsArgs ba;
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate the concentration bounds");
  bounds_cmd->add_option("--m", ba.m, "Number of detectors")->required()->check(CLI::PositiveNumber);
  bounds_cmd->add_option("--epsilon", ba.epsilon, "Cone margin epsilon")
      ->required()
      ->check(CLI::NonNegativeNumber);
  auto* n_opt = bounds_cmd->add_option("--n", ba.n, "Event count(s)")->delimiter(',');
  auto* t_opt = bounds_cmd->add_option("--t", ba.t, "Dose(s)")->delimiter(',');
  auto* gamma_opt = bounds_cmd->add_option("--gamma", ba.gamma, "Total rate gamma");
  n_opt->excludes(t_opt);
  n_opt->excludes(gamma_opt);
  t_opt->needs(gamma_opt);
  bounds_cmd->add_flag("--csv", ba.csv, "Print CSV rows");

  auto* dirac_cmd = app.add_subcommand(
      "dirac-demo", "Single-detector ML-EM against the Laplace-method prediction");
  auto* mc_cmd = app.add_subcommand(
      "montecarlo", "Monte-Carlo escape frequencies against the bounds");

  PhantomArgs pa;
  auto* phantom_cmd = app.add_subcommand("phantom", "Write the configured phantom");
  phantom_cmd->add_flag("--ascii", pa.ascii, "Plain (P2) instead of binary (P5) PGM");
  phantom_cmd->add_flag("--export-operator", pa.export_operator,
                        "Also write the projector in the text operator format");
  for (auto* sub : app.get_subcommands({})) add_globals(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (!config_path.empty()) g.config = config_path;
  g.seed = seed;
  if (!out_dir.empty()) g.out = out_dir;

  try {
    if (*solve_cmd) return cmd_solve(g, out, err);
    if (*certify_cmd) return cmd_certify(g, out, err);
    if (*bounds_cmd) return cmd_bounds(ba, out);
    if (*dirac_cmd) return cmd_dirac_demo(g, out, err);
    if (*mc_cmd) return cmd_montecarlo(g, out, err);
    if (*phantom_cmd) return cmd_phantom(g, pa, out, err);
  } catch (const ConditionError& e) {
    err << "error: " << e.what() << "\n";
    return kCondition;
  } catch (const CapabilityError& e) {
    err << "error: " << e.what() << "\n";
    return kCapability;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kCondition;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace mlemsparse::cli
