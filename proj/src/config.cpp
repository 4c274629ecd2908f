#include "thinhom/config.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace thinhom {

namespace {

using nlohmann::json;

// Strict-schema helper: every key must be consumed, leftovers are errors.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_, "expected an object");
  }
  const json* opt(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& req(const std::string& key) {
    const json* v = opt(key);
    if (!v) throw SchemaError(path_ + "." + key, "missing required key");
    return *v;
  }
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw SchemaError(path_ + "." + key, "unknown key");
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<int>();
}

Vec3 as_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(path, "expected an array of 3 numbers");
  return {as_number(j[0], path), as_number(j[1], path), as_number(j[2], path)};
}

Mat32 as_mat32(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(path, "expected 3 rows of 2 numbers");
  Mat32 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 2)
      throw SchemaError(path, "expected 3 rows of 2 numbers");
    for (int c = 0; c < 2; ++c) m(r, c) = as_number(j[r][c], path);
  }
  return m;
}

template <class T>
std::vector<T> as_list(const json& j, const std::string& path,
                       T (*conv)(const json&, const std::string&)) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  std::vector<T> out;
  for (const auto& e : j) out.push_back(conv(e, path));
  return out;
}

std::array<int, 3> as_grid3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3)
    throw SchemaError(path, "expected an array of 3 node counts");
  return {as_int(j[0], path), as_int(j[1], path), as_int(j[2], path)};
}

std::vector<std::array<int, 3>> as_grids(const json& j, const std::string& path,
                                         size_t count) {
  std::vector<std::array<int, 3>> grids;
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    for (const auto& e : j) grids.push_back(as_grid3(e, path));
  } else {
    grids.assign(count, as_grid3(j, path));
  }
  if (grids.size() != count)
    throw SchemaError(path, "need one grid per h (or a single grid for all)");
  return grids;
}

ManifoldDescriptor parse_manifold(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string kind = o.req("kind").get<std::string>();
  ManifoldDescriptor out = ManifoldDescriptor::sphere(1.0);
  if (kind == "sphere") {
    double radius = 1.0;
    if (const json* r = o.opt("radius")) radius = as_number(*r, path + ".radius");
    out = ManifoldDescriptor::sphere(radius);
  } else if (kind == "torus") {
    const double R = as_number(o.req("R"), path + ".R");
    const double r = as_number(o.req("r"), path + ".r");
    out = ManifoldDescriptor::torus(R, r);
  } else if (kind == "plane") {
    Vec3 point = Vec3::Zero(), normal = Vec3::UnitZ();
    if (const json* p = o.opt("point")) point = as_vec3(*p, path + ".point");
    if (const json* n = o.opt("normal")) normal = as_vec3(*n, path + ".normal");
    out = ManifoldDescriptor::plane(point, normal);
  } else {
    throw SchemaError(path + ".kind", "must be \"sphere\", \"torus\" or \"plane\"");
  }
  o.finish();
  return out;
}

CoefficientField parse_coeff(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string kind = o.req("kind").get<std::string>();
  CoefficientField out = CoefficientField::constant(1.0);
  if (kind == "constant") {
    out = CoefficientField::constant(as_number(o.req("value"), path + ".value"));
  } else if (kind == "laminate") {
    const double a1 = as_number(o.req("a1"), path + ".a1");
    const double a2 = as_number(o.req("a2"), path + ".a2");
    const double theta = as_number(o.req("theta"), path + ".theta");
    int axis = 1;
    if (const json* a = o.opt("axis")) axis = as_int(*a, path + ".axis");
    if (!(theta > 0.0) || !(theta < 1.0))
      throw RangeError("laminate split fraction must lie in (0,1), got " +
                       std::to_string(theta));
    out = CoefficientField::laminate(a1, a2, theta, axis);
  } else if (kind == "checkerboard") {
    out = CoefficientField::checkerboard(as_number(o.req("a1"), path + ".a1"),
                                         as_number(o.req("a2"), path + ".a2"));
  } else if (kind == "grid") {
    if (const json* file = o.opt("file")) {
      std::ifstream in(file->get<std::string>());
      if (!in) throw SchemaError(path + ".file", "cannot open CSV file");
      out = CoefficientField::from_csv(in);
    } else {
      const json& dims = o.req("dims");
      const json& values = o.req("values");
      out = CoefficientField::grid_sampled(
          {as_int(dims[0], path), as_int(dims[1], path), as_int(dims[2], path)},
          values.get<std::vector<double>>());
    }
  } else {
    throw SchemaError(path + ".kind",
                      "must be \"constant\", \"laminate\", \"checkerboard\" or \"grid\"");
  }
  o.finish();
  return out;
}

IntegrandSpec parse_integrand(const json& j, const std::string& path) {
  Obj o(j, path);
  IntegrandSpec spec;
  if (const json* f = o.opt("form")) {
    const std::string form = f->get<std::string>();
    if (form == "isotropic")
      spec.form = IntegrandForm::Isotropic;
    else if (form == "column_weighted")
      spec.form = IntegrandForm::ColumnWeighted;
    else
      throw SchemaError(path + ".form", "must be \"isotropic\" or \"column_weighted\"");
  }
  if (const json* p = o.opt("p")) {
    spec.p = as_number(*p, path + ".p");
    if (!(spec.p > 1.0))
      throw RangeError("growth exponent requires 1 < p < +infinity, got p = " +
                       std::to_string(spec.p));
  }
  if (const json* w = o.opt("weights")) spec.weights = as_vec3(*w, path + ".weights");
  if (const json* c = o.opt("coeff")) spec.coeff = parse_coeff(*c, path + ".coeff");
  o.finish();
  spec.validate();
  return spec;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("not a valid JSON document: ") + e.what());
  }
  Obj root(j, "");
  RunConfig cfg;

  if (const json* m = root.opt("manifold")) cfg.manifold = parse_manifold(*m, ".manifold");
  if (const json* i = root.opt("integrand"))
    cfg.integrand = parse_integrand(*i, ".integrand");

  if (const json* c = root.opt("cell")) {
    Obj o(*c, ".cell");
    CellBlock b;
    if (const json* v = o.opt("s")) b.s = as_vec3(*v, ".cell.s");
    if (const json* v = o.opt("xi_alpha")) b.xi_alpha = as_mat32(*v, ".cell.xi_alpha");
    if (const json* v = o.opt("t_list")) b.t_list = as_list<int>(*v, ".cell.t_list", as_int);
    if (const json* v = o.opt("n")) b.n = as_int(*v, ".cell.n");
    if (const json* v = o.opt("formulation")) {
      b.formulation = v->get<std::string>();
      if (b.formulation != "constrained" && b.formulation != "penalized" &&
          b.formulation != "both")
        throw SchemaError(".cell.formulation",
                          "must be \"constrained\", \"penalized\" or \"both\"");
    }
    o.finish();
    cfg.cell = b;
  }

  if (const json* t = root.opt("table")) {
    Obj o(*t, ".table");
    TableBlock b;
    if (const json* v = o.opt("s_list")) b.s_list = as_list<Vec3>(*v, ".table.s_list", as_vec3);
    if (const json* v = o.opt("xi_max")) b.xi_max = as_number(*v, ".table.xi_max");
    if (const json* v = o.opt("m")) b.m = as_int(*v, ".table.m");
    if (const json* v = o.opt("t_list")) b.t_list = as_list<int>(*v, ".table.t_list", as_int);
    if (const json* v = o.opt("n")) b.n = as_int(*v, ".table.n");
    o.finish();
    cfg.table = b;
  }

  if (const json* f = root.opt("film")) {
    Obj o(*f, ".film");
    FilmBlock b;
    if (const json* v = o.opt("h_list"))
      b.h_list = as_list<double>(*v, ".film.h_list", as_number);
    {
      Obj d(o.req("datum"), ".film.datum");
      b.s0 = as_vec3(d.req("s0"), ".film.datum.s0");
      b.xi0 = as_mat32(d.req("xi0"), ".film.datum.xi0");
      d.finish();
    }
    b.grids = as_grids(o.req("grid"), ".film.grid", b.h_list.size());
    if (const json* v = o.opt("omega")) {
      if (!v->is_array() || v->size() != 2)
        throw SchemaError(".film.omega", "expected [Lx, Ly]");
      b.omega = {as_number((*v)[0], ".film.omega"), as_number((*v)[1], ".film.omega")};
    }
    if (const json* v = o.opt("planar_grid")) {
      if (!v->is_array() || v->size() != 2)
        throw SchemaError(".film.planar_grid", "expected [N1, N2]");
      b.planar_grid = {as_int((*v)[0], ".film.planar_grid"),
                       as_int((*v)[1], ".film.planar_grid")};
    }
    o.finish();
    cfg.film = b;
  }

  if (const json* g = root.opt("gamma")) {
    Obj o(*g, ".gamma");
    GammaBlock b;
    if (const json* v = o.opt("corrector_t")) b.corrector_t = as_int(*v, ".gamma.corrector_t");
    if (const json* v = o.opt("corrector_n")) b.corrector_n = as_int(*v, ".gamma.corrector_n");
    if (const json* v = o.opt("delta")) b.delta = as_number(*v, ".gamma.delta");
    o.finish();
    cfg.gamma = b;
  }

  if (const json* r = root.opt("recover")) {
    Obj o(*r, ".recover");
    RecoverBlock b;
    if (const json* v = o.opt("h_list"))
      b.h_list = as_list<double>(*v, ".recover.h_list", as_number);
    if (const json* v = o.opt("delta")) b.delta = as_number(*v, ".recover.delta");
    if (const json* v = o.opt("t")) b.t = as_int(*v, ".recover.t");
    if (const json* v = o.opt("n")) b.n = as_int(*v, ".recover.n");
    if (const json* v = o.opt("grid")) b.grids = as_grids(*v, ".recover.grid", b.h_list.size());
    o.finish();
    cfg.recover = b;
  }

  if (const json* c = root.opt("check")) {
    Obj o(*c, ".check");
    CheckBlock b;
    if (const json* v = o.opt("suites"))
      b.suites = v->get<std::vector<std::string>>();
    for (const auto& s : b.suites)
      if (s != "quasiconvexity" && s != "growth_lipschitz" && s != "rank_one")
        throw SchemaError(".check.suites", "unknown suite \"" + s + "\"");
    if (const json* v = o.opt("slack_overrides")) {
      Obj so(*v, ".check.slack_overrides");
      if (const json* s = so.opt("structural")) b.slack = as_number(*s, ".check.slack_overrides.structural");
      if (const json* s = so.opt("drift")) b.drift_tol = as_number(*s, ".check.slack_overrides.drift");
      so.finish();
    }
    if (const json* v = o.opt("n_tests")) b.n_tests = as_int(*v, ".check.n_tests");
    if (const json* v = o.opt("n_segments")) b.n_segments = as_int(*v, ".check.n_segments");
    if (const json* v = o.opt("xi_points")) {
      for (const auto& e : *v) {
        if (!e.is_array() || e.size() != 4)
          throw SchemaError(".check.xi_points", "expected arrays of 4 coordinates");
        b.xi_points.push_back({e[0].get<double>(), e[1].get<double>(),
                               e[2].get<double>(), e[3].get<double>()});
      }
    }
    o.finish();
    cfg.check = b;
  }

  if (const json* tf = root.opt("table_files")) {
    Obj o(*tf, ".table_files");
    cfg.table_files = {o.req("csv").get<std::string>(),
                       o.req("meta").get<std::string>()};
    o.finish();
  }

  if (const json* e = root.opt("epsilon")) cfg.epsilon = as_number(*e, ".epsilon");
  if (const json* s = root.opt("seed")) cfg.seed = s->get<std::uint64_t>();
  if (const json* g = root.opt("g")) {
    cfg.quad_order = as_int(*g, ".g");
    if (cfg.quad_order != 1 && cfg.quad_order != 2)
      throw RangeError("quadrature order g must be 1 or 2");
  }
  if (const json* s = root.opt("solver")) {
    Obj o(*s, ".solver");
    if (const json* v = o.opt("tolerance")) cfg.solver.tolerance = as_number(*v, ".solver.tolerance");
    if (const json* v = o.opt("max_iterations"))
      cfg.solver.max_iterations = as_int(*v, ".solver.max_iterations");
    if (const json* v = o.opt("step_rule")) {
      cfg.solver.step_rule = v->get<std::string>();
      if (cfg.solver.step_rule != "bb" && cfg.solver.step_rule != "fixed")
        throw SchemaError(".solver.step_rule", "must be \"bb\" or \"fixed\"");
    }
    o.finish();
  }
  root.finish();
  return cfg;
}

namespace {

json manifold_json(const ManifoldDescriptor& m) {
  json j;
  j["kind"] = m.name();
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          j["radius"] = k.radius;
        } else if constexpr (std::is_same_v<T, Torus>) {
          j["R"] = k.major_radius;
          j["r"] = k.minor_radius;
        } else {
          j["point"] = {k.point[0], k.point[1], k.point[2]};
          j["normal"] = {k.normal[0], k.normal[1], k.normal[2]};
        }
      },
      m.kind());
  return j;
}

json coeff_json(const CoefficientField& c) {
  json j;
  j["kind"] = c.name();
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ConstantCoeff>) {
          j["value"] = k.value;
        } else if constexpr (std::is_same_v<T, Laminate1D>) {
          j["a1"] = k.a1;
          j["a2"] = k.a2;
          j["theta"] = k.theta;
          j["axis"] = k.axis;
        } else if constexpr (std::is_same_v<T, Checkerboard2D>) {
          j["a1"] = k.a1;
          j["a2"] = k.a2;
        } else {
          j["dims"] = {k.dims[0], k.dims[1], k.dims[2]};
          j["values"] = k.values;
        }
      },
      c.kind());
  return j;
}

json mat32_json(const Mat32& m) {
  json j = json::array();
  for (int r = 0; r < 3; ++r) j.push_back({m(r, 0), m(r, 1)});
  return j;
}

}  // namespace

nlohmann::json RunConfig::echo() const {
  json j;
  j["manifold"] = manifold_json(manifold);
  j["integrand"]["form"] =
      integrand.form == IntegrandForm::Isotropic ? "isotropic" : "column_weighted";
  j["integrand"]["p"] = integrand.p;
  j["integrand"]["weights"] = {integrand.weights[0], integrand.weights[1],
                               integrand.weights[2]};
  j["integrand"]["coeff"] = coeff_json(integrand.coeff);
  if (cell) {
    j["cell"]["s"] = {cell->s[0], cell->s[1], cell->s[2]};
    j["cell"]["xi_alpha"] = mat32_json(cell->xi_alpha);
    j["cell"]["t_list"] = cell->t_list;
    j["cell"]["n"] = cell->n;
    j["cell"]["formulation"] = cell->formulation;
  }
  if (table) {
    json sl = json::array();
    for (const auto& s : table->s_list) sl.push_back({s[0], s[1], s[2]});
    j["table"]["s_list"] = sl;
    j["table"]["xi_max"] = table->xi_max;
    j["table"]["m"] = table->m;
    j["table"]["t_list"] = table->t_list;
    j["table"]["n"] = table->n;
  }
  if (film) {
    j["film"]["h_list"] = film->h_list;
    j["film"]["datum"]["s0"] = {film->s0[0], film->s0[1], film->s0[2]};
    j["film"]["datum"]["xi0"] = mat32_json(film->xi0);
    json grids = json::array();
    for (const auto& g : film->grids) grids.push_back({g[0], g[1], g[2]});
    j["film"]["grid"] = grids;
    j["film"]["omega"] = {film->omega[0], film->omega[1]};
    j["film"]["planar_grid"] = {film->planar_grid[0], film->planar_grid[1]};
  }
  if (gamma) {
    j["gamma"]["corrector_t"] = gamma->corrector_t;
    j["gamma"]["corrector_n"] = gamma->corrector_n;
    j["gamma"]["delta"] = gamma->delta;
  }
  if (recover) {
    j["recover"]["h_list"] = recover->h_list;
    j["recover"]["delta"] = recover->delta;
    j["recover"]["t"] = recover->t;
    j["recover"]["n"] = recover->n;
    if (!recover->grids.empty()) {
      json grids = json::array();
      for (const auto& g : recover->grids) grids.push_back({g[0], g[1], g[2]});
      j["recover"]["grid"] = grids;
    }
  }
  if (check) {
    j["check"]["suites"] = check->suites;
    j["check"]["slack_overrides"]["structural"] = check->slack;
    j["check"]["slack_overrides"]["drift"] = check->drift_tol;
    j["check"]["n_tests"] = check->n_tests;
    j["check"]["n_segments"] = check->n_segments;
    if (!check->xi_points.empty()) {
      json pts = json::array();
      for (const auto& p : check->xi_points) pts.push_back({p[0], p[1], p[2], p[3]});
      j["check"]["xi_points"] = pts;
    }
  }
  if (table_files) {
    j["table_files"]["csv"] = table_files->first;
    j["table_files"]["meta"] = table_files->second;
  }
  j["epsilon"] = epsilon;
  j["seed"] = seed;
  j["g"] = quad_order;
  j["solver"]["tolerance"] = solver.tolerance;
  j["solver"]["max_iterations"] = solver.max_iterations;
  j["solver"]["step_rule"] = solver.step_rule;
  return j;
}

namespace {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot open " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json report_shell(const RunConfig& config) {
  json j;
  j["config"] = config.echo();
  j["meta"]["timestamp"] = timestamp();
  return j;
}

DensityTable obtain_table(const RunConfig& config, const std::string& out_dir,
                          int n_override = 0) {
  if (config.table_files && n_override == 0)
    return load_table(config.table_files->first, config.table_files->second);
  const TableBlock block = config.table.value_or(TableBlock{});
  TableBuildParams params;
  params.base_points = block.s_list;
  params.xi_max = block.xi_max;
  params.m = block.m;
  params.t_list = block.t_list;
  params.n = n_override > 0 ? n_override : block.n;
  params.integrand = config.integrand;
  params.epsilon = config.epsilon;
  params.quad = QuadratureRule::gauss(config.quad_order);
  params.solver = config.solver.settings();
  (void)out_dir;
  return build_density_table(config.manifold, params);
}

GammaExperimentConfig gamma_config(const RunConfig& config) {
  if (!config.film) throw RangeError("gamma/film commands need a film block");
  const FilmBlock& f = *config.film;
  const GammaBlock g = config.gamma.value_or(GammaBlock{});
  GammaExperimentConfig gc;
  gc.integrand = config.integrand;
  gc.manifold = config.manifold;
  gc.s0 = f.s0;
  gc.xi0 = f.xi0;
  gc.h_list = f.h_list;
  gc.grids = f.grids;
  gc.omega = f.omega;
  gc.planar_grid = f.planar_grid;
  gc.corrector_t = g.corrector_t;
  gc.corrector_n = g.corrector_n;
  gc.delta = g.delta;
  gc.epsilon = config.epsilon;
  gc.quad = QuadratureRule::gauss(config.quad_order);
  gc.solver = config.solver.settings();
  return gc;
}

int run_cell(const RunConfig& config, const std::string& out_dir) {
  const CellBlock block = config.cell.value_or(CellBlock{});
  std::vector<CellFormulation> forms;
  if (block.formulation != "penalized") forms.push_back(CellFormulation::Constrained);
  if (block.formulation != "constrained") forms.push_back(CellFormulation::Penalized);

  std::string rows = "formulation,t,n,value,residual,iterations,converged,epsilon\n";
  std::string logs = "formulation,t,iter,energy,residual\n";
  bool all_converged = true;
  char buf[256];
  for (CellFormulation form : forms)
    for (int t : block.t_list) {
      CellProblem p;
      p.manifold = config.manifold;
      p.base_point = block.s;
      p.xi_alpha = block.xi_alpha;
      p.t = t;
      p.n = block.n;
      p.formulation = form;
      p.integrand = config.integrand;
      p.epsilon = config.epsilon;
      p.quad = QuadratureRule::gauss(config.quad_order);
      p.solver = config.solver.settings(/*keep_log=*/true);
      const CellSolution sol = solve_cell(p);
      const char* name =
          form == CellFormulation::Constrained ? "constrained" : "penalized";
      std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g,%d,%d,%.17g\n", name, t,
                    sol.n, sol.value, sol.gradient_residual, sol.iterations,
                    sol.converged ? 1 : 0, sol.epsilon);
      rows += buf;
      for (const auto& rec : sol.log) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g\n", name, t, rec.iter,
                      rec.energy, rec.residual);
        logs += buf;
      }
      all_converged = all_converged && sol.converged;
    }

  // t -> infinity estimate over the block's t_list (penalized route)
  CellProblem base;
  base.manifold = config.manifold;
  base.base_point = block.s;
  base.xi_alpha = block.xi_alpha;
  base.n = block.n;
  base.integrand = config.integrand;
  base.epsilon = config.epsilon;
  base.quad = QuadratureRule::gauss(config.quad_order);
  base.solver = config.solver.settings();
  const HomDensityEstimate est = estimate_hom_density(base, block.t_list);

  json rep = report_shell(config);
  rep["estimate"] = est.estimate;
  rep["converged"] = est.converged;
  rep["extrapolated"] = est.extrapolated;
  for (const auto& [t, v] : est.per_t) rep["per_t"].push_back({{"t", t}, {"value", v}});

  write_atomic(fs::path(out_dir) / "cell.csv", rows);
  write_atomic(fs::path(out_dir) / "cell_log.csv", logs);
  write_atomic(fs::path(out_dir) / "cell_estimate.json", rep.dump(2) + "\n");
  return (all_converged && est.converged) ? 0 : 1;
}

int run_table(const RunConfig& config, const std::string& out_dir) {
  const DensityTable table = obtain_table(config, out_dir);
  const fs::path csv = fs::path(out_dir) / "table.csv";
  const fs::path meta = fs::path(out_dir) / "table.meta.json";
  save_table(table, csv.string() + ".tmp", meta.string() + ".tmp");
  fs::rename(csv.string() + ".tmp", csv);
  fs::rename(meta.string() + ".tmp", meta);
  bool all = true;
  for (auto c : table.converged) all = all && c;
  return (all && table.envelope_violations == 0) ? 0 : 1;
}

int run_film(const RunConfig& config, const std::string& out_dir) {
  if (!config.film) throw RangeError("film command needs a film block");
  const FilmBlock& f = *config.film;
  const DensityTable table = obtain_table(config, out_dir);

  auto [u_star, planar_stats] = minimize_limit(
      table, config.manifold, f.s0, f.xi0, f.planar_grid, f.omega,
      config.solver.settings());
  const double e_limit = eval_limit_energy(u_star, table);

  std::string rows = "h,E_h,E_limit,gap,iters,flags\n";
  char buf[256];
  bool all_converged = planar_stats.converged;
  for (size_t i = 0; i < f.h_list.size(); ++i) {
    FilmProblem fp;
    fp.integrand = config.integrand;
    fp.manifold = config.manifold;
    fp.h = f.h_list[i];
    fp.s0 = f.s0;
    fp.xi0 = f.xi0;
    fp.grid = f.grids[i];
    fp.omega = f.omega;
    fp.epsilon = config.epsilon;
    fp.quad = QuadratureRule::gauss(config.quad_order);
    fp.solver = config.solver.settings();
    auto [u, stats] = minimize_film(fp);
    const double gap = std::abs(stats.energy - e_limit) / std::max(e_limit, 1e-12);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d,%s\n", fp.h,
                  stats.energy, e_limit, gap, stats.iterations,
                  stats.converged ? "" : "max_iterations");
    rows += buf;
    all_converged = all_converged && stats.converged;
  }
  write_atomic(fs::path(out_dir) / "film.csv", rows);
  return all_converged ? 0 : 1;
}

int run_gamma(const RunConfig& config, const std::string& out_dir) {
  const DensityTable table = obtain_table(config, out_dir);
  const GammaReport report = run_gamma_experiment(gamma_config(config), table);

  json rep = report_shell(config);
  rep["report"] = report.to_json();

  std::string rows = "h,E_h,E_limit,gap,iters,flags\n";
  char buf[256];
  bool ok = true;
  for (const auto& r : report.rows) {
    std::string flags;
    if (!r.converged) flags += "max_iterations;";
    if (!r.recovery_bound_ok) flags += "recovery_bound_violated;";
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d,%s\n", r.h, r.E_h,
                  report.limit_energy, r.gap, r.iterations, flags.c_str());
    rows += buf;
    ok = ok && r.converged && r.recovery_bound_ok;
  }
  write_atomic(fs::path(out_dir) / "gamma.csv", rows);
  write_atomic(fs::path(out_dir) / "gamma.json", rep.dump(2) + "\n");
  print_report(report);
  return ok ? 0 : 1;
}

int run_check(const RunConfig& config, const std::string& out_dir) {
  const CheckBlock block = config.check.value_or(CheckBlock{});
  const DensityTable table = obtain_table(config, out_dir);

  std::vector<std::array<double, 4>> points = block.xi_points;
  if (points.empty()) {
    const double xm = table.xi_max;
    points = {{0.0, 0.0, 0.0, 0.0},
              {0.5 * xm, 0.0, 0.0, 0.0},
              {0.25 * xm, 0.25 * xm, 0.25 * xm, 0.25 * xm}};
  }

  json rep = report_shell(config);
  bool all_pass = true;
  for (const std::string& suite : block.suites) {
    if (suite == "quasiconvexity") {
      for (size_t pi = 0; pi < points.size(); ++pi) {
        const Mat32 xi = table.xi_from_coords(0, points[pi]);
        PropertyReport r = verify_quasiconvexity(
            table, table.frames[0].point, xi, block.n_tests,
            config.seed + pi, block.slack);
        r.provenance["xi_point"] = points[pi];
        print_report(r);
        rep["reports"].push_back(r.to_json());
        all_pass = all_pass && r.pass;
      }
    } else if (suite == "growth_lipschitz") {
      const DensityTable refined = obtain_table(config, out_dir, 2 * table.n);
      PropertyReport r = verify_lipschitz_growth(table, &refined, block.drift_tol);
      print_report(r);
      rep["reports"].push_back(r.to_json());
      all_pass = all_pass && r.pass;
    } else if (suite == "rank_one") {
      PropertyReport r = verify_rank_one(table, table.frames[0].point,
                                         block.n_segments, config.seed, block.slack);
      print_report(r);
      rep["reports"].push_back(r.to_json());
      all_pass = all_pass && r.pass;
    }
  }
  write_atomic(fs::path(out_dir) / "check.json", rep.dump(2) + "\n");
  return all_pass ? 0 : 1;
}

int run_recover(const RunConfig& config, const std::string& out_dir) {
  if (!config.film) throw RangeError("recover command needs a film block (datum)");
  const RecoverBlock block = config.recover.value_or(RecoverBlock{});
  const FilmBlock& f = *config.film;
  const DensityTable table = obtain_table(config, out_dir);

  // affine-target case: u is the planar datum field itself
  const PlanarField u =
      planar_datum(config.manifold, f.s0, f.xi0, f.planar_grid, f.omega);
  const double e_limit = eval_limit_energy(u, table);

  CellProblem cp;
  cp.manifold = config.manifold;
  cp.base_point = f.s0;
  cp.xi_alpha = f.xi0;
  cp.t = block.t;
  cp.n = block.n;
  cp.formulation = CellFormulation::Constrained;
  cp.integrand = config.integrand;
  cp.epsilon = config.epsilon;
  cp.quad = QuadratureRule::gauss(config.quad_order);
  cp.solver = config.solver.settings();
  const CellSolution corrector = solve_cell(cp);

  RecoveryParams rec;
  rec.s0 = f.s0;
  rec.corrector = &corrector.argmin;
  rec.corrector_t = block.t;
  rec.delta = block.delta;

  const auto grids = block.grids.empty() ? f.grids : block.grids;
  if (grids.size() < block.h_list.size())
    throw RangeError("recover: need one grid per h (recover.grid or film.grid)");

  std::string rows = "k,h_k,sup_dist,energy,limit_energy\n";
  char buf[256];
  for (size_t k = 0; k < block.h_list.size(); ++k) {
    const double h = block.h_list[k];
    const DiscreteField u_k = build_recovery_sequence(u, rec, h, grids[k], f.omega);
    const double sup = recovery_sup_distance(u_k, u);
    FilmProblem fp;
    fp.integrand = config.integrand;
    fp.manifold = config.manifold;
    fp.h = h;
    fp.s0 = f.s0;
    fp.xi0 = f.xi0;
    fp.grid = grids[k];
    fp.omega = f.omega;
    fp.epsilon = config.epsilon;
    fp.quad = QuadratureRule::gauss(config.quad_order);
    const double energy = eval_film_energy(u_k, fp, /*check_bc=*/false);
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", k, h, sup,
                  energy, e_limit);
    rows += buf;
  }
  write_atomic(fs::path(out_dir) / "recovery.csv", rows);
  return 0;
}

}  // namespace

int dispatch(const std::string& command, const RunConfig& config,
             const std::string& out_dir) {
  fs::create_directories(out_dir);
  if (command == "cell") return run_cell(config, out_dir);
  if (command == "table") return run_table(config, out_dir);
  if (command == "film") return run_film(config, out_dir);
  if (command == "gamma") return run_gamma(config, out_dir);
  if (command == "check") return run_check(config, out_dir);
  if (command == "recover") return run_recover(config, out_dir);
  throw RangeError("unknown command \"" + command + "\"");
}

}  // namespace thinhom
