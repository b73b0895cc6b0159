#include "oulab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace oulab {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& where, const std::string& msg) {
  throw Error(Errc::config_error, where + ": " + msg);
}

// Strict object reader: every key must be consumed, otherwise finish() throws.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_fail(where_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) config_fail(where_, "missing required key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  const json* maybe(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  double number(const std::string& key) { return as_number(at(key), path(key)); }
  std::int64_t integer(const std::string& key) { return as_integer(at(key), path(key)); }
  bool boolean(const std::string& key) {
    const json& v = at(key);
    if (!v.is_boolean()) config_fail(path(key), "expected a boolean");
    return v.get<bool>();
  }
  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) config_fail(path(key), "expected a string");
    return v.get<std::string>();
  }

  template <typename T, typename F>
  void optional(const std::string& key, T& out, F&& read) {
    if (has(key)) out = read(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) config_fail(where_, "unknown key '" + key + "'");
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) config_fail(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) config_fail(where, "expected a finite number");
    return x;
  }

  static std::int64_t as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) config_fail(where, "expected an integer");
    return v.get<std::int64_t>();
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string_view kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::system: return "system";
    case ScenarioKind::kernel: return "kernel";
    case ScenarioKind::gumbel: return "gumbel";
  }
  return "system";
}

ScenarioKind parse_kind(const std::string& s) {
  for (auto k : {ScenarioKind::system, ScenarioKind::kernel, ScenarioKind::gumbel})
    if (kind_name(k) == s) return k;
  config_fail("kind", "unknown scenario kind '" + s + "'");
}

json drift_to_json(const DriftSpec& d) {
  json j = {{"kind", drift_kind_name(d.kind)}, {"scale", d.scale}};
  if (d.kind == DriftKind::custom_table) {
    json t = json::array();
    for (const auto& [r, g] : d.table) t.push_back({r, g});
    j["table"] = t;
  }
  if (d.declared_bound) j["declared_bound"] = {{"C", d.declared_bound->first}, {"eps", d.declared_bound->second}};
  return j;
}

DriftSpec drift_from_json(const json& j, const std::string& where) {
  Reader r(j, where);
  DriftSpec d;
  try {
    d.kind = parse_drift_kind(r.string("kind"));
  } catch (const Error& e) {
    config_fail(where, e.what());
  }
  d.scale = r.has("scale") ? r.number("scale") : 0.0;
  if (const json* t = r.maybe("table")) {
    if (!t->is_array()) config_fail(r.path("table"), "expected an array of [r, g] pairs");
    for (const auto& node : *t) {
      if (!node.is_array() || node.size() != 2) config_fail(r.path("table"), "expected [r, g] pairs");
      d.table.emplace_back(Reader::as_number(node[0], r.path("table")), Reader::as_number(node[1], r.path("table")));
    }
  }
  if (const json* b = r.maybe("declared_bound")) {
    Reader br(*b, r.path("declared_bound"));
    d.declared_bound = std::make_pair(br.number("C"), br.number("eps"));
    br.finish();
  }
  r.finish();
  return d;
}

json kernel_to_json(const KernelSpec& k) {
  return {{"lambda", k.lambda}, {"mu", k.mu}, {"k", k.k}, {"phase", k.phase == KernelPhase::cos ? "cos" : "sin"}};
}

KernelSpec kernel_from_json(const json& j, const std::string& where) {
  Reader r(j, where);
  KernelSpec k;
  k.lambda = r.number("lambda");
  k.mu = r.has("mu") ? r.number("mu") : 0.0;
  k.k = static_cast<int>(r.has("k") ? r.integer("k") : 0);
  if (r.has("phase")) {
    const std::string p = r.string("phase");
    if (p != "cos" && p != "sin") config_fail(r.path("phase"), "expected 'cos' or 'sin'");
    k.phase = p == "cos" ? KernelPhase::cos : KernelPhase::sin;
  }
  r.finish();
  return k;
}

}  // namespace

json matrix_to_json(const MatrixD& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

MatrixD matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) config_fail(what, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) config_fail(what, "expected rows to be non-empty arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) config_fail(what, "ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = Reader::as_number(row[static_cast<std::size_t>(c)], what);
  }
  return m;
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["format_version"] = c.format_version;
  j["name"] = c.name;
  j["kind"] = kind_name(c.kind);
  if (c.system) {
    json s = {{"A", matrix_to_json(c.system->A)}, {"D", matrix_to_json(c.system->D)},
              {"drift", drift_to_json(c.system->drift)}};
    s["x0"] = c.system->x0 ? json(*c.system->x0) : json("stationary");
    j["system"] = s;
  }
  if (!c.kernels.empty()) {
    json ks = json::array();
    for (const auto& k : c.kernels) ks.push_back(kernel_to_json(k));
    j["kernels"] = ks;
  }
  if (c.gumbel) j["gumbel"] = {{"n_values", c.gumbel->n_values}, {"reps", c.gumbel->reps}};
  j["grid"] = {{"t0", c.grid.t0}, {"ratio", c.grid.ratio}, {"n_checkpoints", c.grid.n_checkpoints}};
  if (c.grid.h) j["grid"]["h"] = *c.grid.h;
  j["ensemble"] = {{"n_paths", c.ensemble.n_paths}, {"seed", c.ensemble.seed}, {"workers", c.ensemble.workers}};
  j["analysis"] = {{"window_decades", c.analysis.window_decades},
                   {"diagnostics", c.analysis.diagnostics},
                   {"gronwall", c.analysis.gronwall},
                   {"linear_twin", c.analysis.linear_twin}};
  if (c.analysis.gronwall_eps) j["analysis"]["gronwall_eps"] = *c.analysis.gronwall_eps;
  j["output"] = {{"directory", c.output.directory},
                 {"formats", c.output.formats},
                 {"dump_path_steps", c.output.dump_path_steps}};
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  Reader r(j, "config");
  ScenarioConfig c;
  if (r.has("format_version")) {
    c.format_version = static_cast<int>(r.integer("format_version"));
    if (c.format_version != kConfigFormatVersion)
      config_fail("config.format_version", "unsupported version " + std::to_string(c.format_version));
  }
  c.name = r.string("name");
  c.kind = parse_kind(r.string("kind"));

  if (const json* s = r.maybe("system")) {
    Reader sr(*s, "config.system");
    SystemConfig sys;
    sys.A = matrix_from_json(sr.at("A"), "config.system.A");
    sys.D = matrix_from_json(sr.at("D"), "config.system.D");
    if (const json* d = sr.maybe("drift")) sys.drift = drift_from_json(*d, "config.system.drift");
    if (const json* x = sr.maybe("x0")) {
      if (x->is_string()) {
        if (x->get<std::string>() != "stationary") config_fail("config.system.x0", "expected 'stationary' or a vector");
      } else if (x->is_array()) {
        std::vector<double> v;
        for (const auto& e : *x) v.push_back(Reader::as_number(e, "config.system.x0"));
        sys.x0 = std::move(v);
      } else {
        config_fail("config.system.x0", "expected 'stationary' or a vector");
      }
    }
    sr.finish();
    c.system = std::move(sys);
  }
  if (const json* ks = r.maybe("kernels")) {
    if (!ks->is_array()) config_fail("config.kernels", "expected an array");
    for (std::size_t i = 0; i < ks->size(); ++i)
      c.kernels.push_back(kernel_from_json((*ks)[i], "config.kernels[" + std::to_string(i) + "]"));
  }
  if (const json* g = r.maybe("gumbel")) {
    Reader gr(*g, "config.gumbel");
    GumbelConfig gc;
    const json& ns = gr.at("n_values");
    if (!ns.is_array()) config_fail("config.gumbel.n_values", "expected an array");
    gc.n_values.clear();
    for (const auto& n : ns) gc.n_values.push_back(Reader::as_integer(n, "config.gumbel.n_values"));
    gc.reps = static_cast<int>(gr.integer("reps"));
    gr.finish();
    c.gumbel = std::move(gc);
  }
  if (const json* g = r.maybe("grid")) {
    Reader gr(*g, "config.grid");
    if (gr.has("t0")) c.grid.t0 = gr.number("t0");
    if (gr.has("ratio")) c.grid.ratio = gr.number("ratio");
    if (gr.has("n_checkpoints")) c.grid.n_checkpoints = static_cast<int>(gr.integer("n_checkpoints"));
    if (gr.has("h")) c.grid.h = gr.number("h");
    gr.finish();
  }
  if (const json* e = r.maybe("ensemble")) {
    Reader er(*e, "config.ensemble");
    if (er.has("n_paths")) c.ensemble.n_paths = static_cast<int>(er.integer("n_paths"));
    if (const json* s = er.maybe("seed")) {
      if (!s->is_number_unsigned()) config_fail("config.ensemble.seed", "expected a non-negative integer");
      c.ensemble.seed = s->get<std::uint64_t>();
    }
    if (er.has("workers")) c.ensemble.workers = static_cast<int>(er.integer("workers"));
    er.finish();
  }
  if (const json* a = r.maybe("analysis")) {
    Reader ar(*a, "config.analysis");
    if (ar.has("window_decades")) c.analysis.window_decades = static_cast<int>(ar.integer("window_decades"));
    if (ar.has("diagnostics")) c.analysis.diagnostics = ar.boolean("diagnostics");
    if (ar.has("gronwall")) c.analysis.gronwall = ar.boolean("gronwall");
    if (ar.has("linear_twin")) c.analysis.linear_twin = ar.boolean("linear_twin");
    if (ar.has("gronwall_eps")) c.analysis.gronwall_eps = ar.number("gronwall_eps");
    ar.finish();
  }
  if (const json* o = r.maybe("output")) {
    Reader orr(*o, "config.output");
    if (orr.has("directory")) c.output.directory = orr.string("directory");
    if (const json* f = orr.maybe("formats")) {
      if (!f->is_array()) config_fail("config.output.formats", "expected an array of strings");
      c.output.formats.clear();
      for (const auto& s : *f) {
        if (!s.is_string()) config_fail("config.output.formats", "expected strings");
        c.output.formats.push_back(s.get<std::string>());
      }
    }
    if (orr.has("dump_path_steps")) c.output.dump_path_steps = orr.integer("dump_path_steps");
    orr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(Errc::config_error, "config parse error in '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

void ScenarioConfig::validate() const {
  if (name.empty()) config_fail("config.name", "must not be empty");
  switch (kind) {
    case ScenarioKind::system:
      if (!system) config_fail("config", "kind 'system' requires a 'system' section");
      if (system->A.rows() != system->A.cols() || system->A.rows() != system->D.rows() ||
          system->D.rows() != system->D.cols())
        config_fail("config.system", "A and D must be square with equal dimension");
      if (system->x0 && static_cast<Eigen::Index>(system->x0->size()) != system->A.rows())
        config_fail("config.system.x0", "dimension does not match A");
      try {
        system->drift.validate();
      } catch (const Error& e) {
        config_fail("config.system.drift", e.what());
      }
      break;
    case ScenarioKind::kernel:
      if (kernels.empty()) config_fail("config", "kind 'kernel' requires a non-empty 'kernels' list");
      for (const auto& k : kernels) {
        try {
          k.validate();
        } catch (const Error& e) {
          config_fail("config.kernels", e.what());
        }
      }
      break;
    case ScenarioKind::gumbel:
      if (!gumbel || gumbel->n_values.empty()) config_fail("config", "kind 'gumbel' requires a 'gumbel' section");
      for (auto n : gumbel->n_values)
        if (n < 1000) config_fail("config.gumbel.n_values", "every n must be >= 1000");
      if (gumbel->reps < 2) config_fail("config.gumbel.reps", "need at least 2");
      break;
  }
  if (!(grid.t0 >= std::exp(1.0))) config_fail("config.grid.t0", "must be >= e");
  if (!(grid.ratio > 1.0)) config_fail("config.grid.ratio", "must be > 1");
  if (grid.n_checkpoints < 1) config_fail("config.grid.n_checkpoints", "must be >= 1");
  if (grid.h && !(*grid.h > 0)) config_fail("config.grid.h", "must be > 0");
  if (ensemble.n_paths < 1) config_fail("config.ensemble.n_paths", "must be >= 1");
  if (ensemble.workers < 0) config_fail("config.ensemble.workers", "must be >= 0");
  if (analysis.window_decades < 1) config_fail("config.analysis.window_decades", "must be >= 1");
  if (analysis.gronwall_eps && !(*analysis.gronwall_eps > 0)) config_fail("config.analysis.gronwall_eps", "must be > 0");
  for (const auto& f : output.formats)
    if (f != "json" && f != "csv") config_fail("config.output.formats", "unknown format '" + f + "'");
  if (output.dump_path_steps < 0) config_fail("config.output.dump_path_steps", "must be >= 0");
}

void ScenarioConfig::set_t_max(double t_max) {
  if (!(t_max > grid.t0)) throw Error(Errc::config_error, "t_max must exceed grid.t0");
  grid.n_checkpoints = static_cast<int>(std::lround(std::log(t_max / grid.t0) / std::log(grid.ratio))) + 1;
}

double ScenarioConfig::t_max() const { return grid.t0 * std::pow(grid.ratio, grid.n_checkpoints - 1); }

TimeGrid ScenarioConfig::time_grid(double h) const {
  TimeGrid g;
  g.t0 = grid.t0;
  g.ratio = grid.ratio;
  g.n_checkpoints = grid.n_checkpoints;
  g.h = h;
  return g;
}

std::vector<std::string> preset_names() {
  return {"scalar-sqrt2", "diagonal", "jordan", "rotation", "jordan-rotation", "tanh-perturbed", "kernel-suite", "gumbel"};
}

namespace {

ScenarioConfig system_preset(std::string name, MatrixD a, MatrixD d) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.kind = ScenarioKind::system;
  c.system = SystemConfig{std::move(a), std::move(d), DriftSpec::zero(), std::nullopt};
  c.grid.h = 0.25;
  c.analysis.gronwall = false;
  return c;
}

MatrixD mat(Eigen::Index n, std::initializer_list<double> v) {
  MatrixD m(n, n);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = *it++;
  return m;
}

}  // namespace

ScenarioConfig preset(std::string_view name) {
  const MatrixD i2 = MatrixD::Identity(2, 2);
  if (name == "scalar-sqrt2") return system_preset("scalar-sqrt2", mat(1, {1.0}), mat(1, {std::sqrt(2.0)}));
  if (name == "diagonal") return system_preset("diagonal", i2, i2);
  if (name == "jordan") return system_preset("jordan", mat(2, {1, 1, 0, 1}), i2);
  if (name == "rotation") return system_preset("rotation", mat(2, {1, -3, 3, 1}), i2);
  if (name == "jordan-rotation") {
    MatrixD a = MatrixD::Zero(4, 4);
    a.topLeftCorner(2, 2) = mat(2, {1, -3, 3, 1});
    a.bottomRightCorner(2, 2) = mat(2, {1, -3, 3, 1});
    a.topRightCorner(2, 2) = i2;
    return system_preset("jordan-rotation", a, MatrixD::Identity(4, 4));
  }
  if (name == "tanh-perturbed") {
    auto c = system_preset("tanh-perturbed", mat(1, {1.0}), mat(1, {std::sqrt(2.0)}));
    c.system->drift = DriftSpec::tanh_bounded(1.0);
    // Deterministic start: exercises the K |X_0| term of the Gronwall bound while staying
    // below the typical running maximum on the analysis window.
    c.system->x0 = std::vector<double>{3.0};
    c.analysis.gronwall = true;
    c.analysis.linear_twin = true;
    return c;
  }
  if (name == "kernel-suite") {
    ScenarioConfig c;
    c.name = "kernel-suite";
    c.kind = ScenarioKind::kernel;
    c.kernels = {
        {1.0, 0.0, 0, KernelPhase::cos},
        {1.0, 0.0, 2, KernelPhase::cos},
        {1.0, 3.0, 0, KernelPhase::cos},
        {1.0, 3.0, 2, KernelPhase::sin},
    };
    c.grid.h = 0.25;
    c.analysis.gronwall = false;
    return c;
  }
  if (name == "gumbel") {
    ScenarioConfig c;
    c.name = "gumbel";
    c.kind = ScenarioKind::gumbel;
    c.gumbel = GumbelConfig{};
    c.analysis.gronwall = false;
    return c;
  }
  std::ostringstream os;
  os << "unknown preset '" << name << "'; valid names:";
  for (const auto& n : preset_names()) os << ' ' << n;
  throw Error(Errc::config_error, os.str());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ScenarioConfig& config) { return fnv1a_hex(to_json(config).dump()); }

}  // namespace oulab
