#include "experiment.hpp"

#include <fstream>
#include <set>

namespace mlemsparse::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads the members of one JSON object and rejects anything it did not ask
// for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ParameterError(path_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ParameterError("unknown configuration key '" + path_ + "." +
                             it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json bump_json(const GaussianBump& b) {
  return {{"center", b.center}, {"sigma", b.sigma}, {"height", b.height}};
}

GaussianBump bump_from(const json& j, const std::string& path) {
  GaussianBump b;
  ObjectReader r(j, path);
  r.get("center", b.center);
  r.get("sigma", b.sigma);
  r.get("height", b.height);
  r.finish();
  return b;
}

ordered_json phantom_json(const PhantomSpec& p) {
  ordered_json j;
  j["kind"] = to_string(p.kind);
  j["inner_radius"] = p.inner_radius;
  j["outer_radius"] = p.outer_radius;
  j["center"] = p.center_set ? ordered_json(p.center) : ordered_json(nullptr);
  j["value"] = p.value;
  j["bumps"] = {bump_json(p.bumps[0]), bump_json(p.bumps[1])};
  j["base"] = p.base;
  return j;
}

PhantomSpec phantom_from(const json& j, const std::string& path) {
  PhantomSpec p;
  ObjectReader r(j, path);
  std::string kind = to_string(p.kind);
  r.get("kind", kind);
  p.kind = phantom_kind_from_string(kind);
  r.get("inner_radius", p.inner_radius);
  r.get("outer_radius", p.outer_radius);
  std::optional<std::array<double, 2>> center;
  r.get_optional("center", center);
  if (center) {
    p.center = *center;
    p.center_set = true;
  }
  r.get("value", p.value);
  if (const json* b = r.child("bumps")) {
    if (!b->is_array() || b->size() != 2) {
      throw ParameterError(r.path("bumps") + ": expected two bumps");
    }
    p.bumps[0] = bump_from((*b)[0], r.path("bumps") + "[0]");
    p.bumps[1] = bump_from((*b)[1], r.path("bumps") + "[1]");
  }
  r.get("base", p.base);
  r.finish();
  return p;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError("invalid configuration: " + what);
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  phantom.kind = PhantomSpec::Kind::annulus;
  phantom.inner_radius = 12.0;
  phantom.outer_radius = 24.0;
  phantom.value = 1.0;

  // Two equal-height bumps whose Hessian determinants differ by a factor 4,
  // laid out for the default 64 x 64 grid.
  auto& pr = dirac.profile;
  pr.kind = PhantomSpec::Kind::two_bumps;
  pr.base = 0.5;
  pr.bumps[0] = {{16.0, 32.0}, {3.0, 6.0}, 1e-4};
  pr.bumps[1] = {{48.0, 32.0}, {6.0, 6.0}, 1e-4};
}

void ExperimentConfig::validate() const {
  require(grid.nx >= 1 && grid.ny >= 1, "grid dimensions must be positive");
  require(grid.spacing[0] > 0.0 && grid.spacing[1] > 0.0,
          "grid spacing must be positive");
  require(projector.n_views >= 1, "projector.n_views must be >= 1");
  require(projector.n_tangential >= 1, "projector.n_tangential must be >= 1");
  require(!projector.strip_width || *projector.strip_width > 0.0,
          "projector.strip_width must be positive");
  require(projector.supersampling >= 1, "projector.supersampling must be >= 1");
  for (double t : doses) require(t > 0.0 && std::isfinite(t), "doses must be positive");
  require(iterations >= 1, "iterations must be >= 1");
  require(record_every >= 1, "record_every must be >= 1");
  require(percentile > 0.0 && percentile < 1.0, "percentile must lie in (0, 1)");
  require(check_every >= 1, "check_every must be >= 1");
  require(!output_dir.empty(), "output_dir must not be empty");

  for (long long k : dirac.k_schedule) require(k >= 0, "dirac.k_schedule entries must be >= 0");
  require(dirac.profile.kind == PhantomSpec::Kind::two_bumps,
          "dirac.profile must be a two-bumps profile");

  const auto& mc = montecarlo;
  require(!mc.rows.empty() || mc.mu_real.empty(),
          "montecarlo.mu_real needs montecarlo.rows");
  if (!mc.rows.empty()) {
    const std::size_t r = mc.rows.front().size();
    require(r >= 1, "montecarlo.rows must not be empty");
    for (const auto& row : mc.rows) require(row.size() == r, "montecarlo.rows must be rectangular");
    require(mc.mu_real.size() == r, "montecarlo.mu_real must have one weight per column");
  }
  for (double t : mc.doses) require(t > 0.0 && std::isfinite(t), "montecarlo.doses must be positive");
  require(!mc.epsilon || *mc.epsilon >= 0.0, "montecarlo.epsilon must be >= 0");
  require(mc.grid_resolution > 0.0 && mc.grid_resolution <= 1.0,
          "montecarlo.grid_resolution must lie in (0, 1]");
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["grid"] = {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"spacing", c.grid.spacing}};
  j["projector"] = {
      {"n_views", c.projector.n_views},
      {"n_tangential", c.projector.n_tangential},
      {"strip_width", c.projector.strip_width ? ordered_json(*c.projector.strip_width)
                                              : ordered_json(nullptr)},
      {"supersampling", c.projector.supersampling}};
  j["phantom"] = phantom_json(c.phantom);
  j["doses"] = c.doses;
  j["iterations"] = c.iterations;
  j["record_every"] = c.record_every;
  j["percentile"] = c.percentile;
  j["check_every"] = c.check_every;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dirac"] = {{"detector", c.dirac.detector},
                {"profile", phantom_json(c.dirac.profile)},
                {"k_schedule", c.dirac.k_schedule}};
  const auto& mc = c.montecarlo;
  j["montecarlo"] = {
      {"rows", mc.rows},
      {"mu_real", mc.mu_real},
      {"doses", mc.doses},
      {"trials", mc.trials},
      {"epsilon", mc.epsilon ? ordered_json(*mc.epsilon) : ordered_json(nullptr)},
      {"grid_resolution", mc.grid_resolution}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  if (const json* g = r.child("grid")) {
    ObjectReader gr(*g, "config.grid");
    gr.get("nx", c.grid.nx);
    gr.get("ny", c.grid.ny);
    gr.get("spacing", c.grid.spacing);
    gr.finish();
  }
  if (const json* p = r.child("projector")) {
    ObjectReader pr(*p, "config.projector");
    pr.get("n_views", c.projector.n_views);
    pr.get("n_tangential", c.projector.n_tangential);
    pr.get_optional("strip_width", c.projector.strip_width);
    pr.get("supersampling", c.projector.supersampling);
    pr.finish();
  }
  if (const json* p = r.child("phantom")) c.phantom = phantom_from(*p, "config.phantom");
  r.get("doses", c.doses);
  r.get("iterations", c.iterations);
  r.get("record_every", c.record_every);
  r.get("percentile", c.percentile);
  r.get("check_every", c.check_every);
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  if (const json* d = r.child("dirac")) {
    ObjectReader dr(*d, "config.dirac");
    dr.get("detector", c.dirac.detector);
    if (const json* p = dr.child("profile")) {
      c.dirac.profile = phantom_from(*p, "config.dirac.profile");
    }
    dr.get("k_schedule", c.dirac.k_schedule);
    dr.finish();
  }
  if (const json* m = r.child("montecarlo")) {
    ObjectReader mr(*m, "config.montecarlo");
    mr.get("rows", c.montecarlo.rows);
    mr.get("mu_real", c.montecarlo.mu_real);
    mr.get("doses", c.montecarlo.doses);
    mr.get("trials", c.montecarlo.trials);
    mr.get_optional("epsilon", c.montecarlo.epsilon);
    mr.get("grid_resolution", c.montecarlo.grid_resolution);
    mr.finish();
  }
  r.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open configuration file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParameterError("configuration " + path.string() + " is not valid JSON: " +
                         e.what());
  }
  return config_from_json(j);
}

GridPtr make_grid(const GridConfig& g) {
  return std::make_shared<const Grid>(g.nx, g.ny, g.spacing, std::array{0.0, 0.0});
}

}  // namespace mlemsparse::cli
