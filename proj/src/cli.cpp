#include "affinebody/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "affinebody/checks.hpp"

namespace affinebody::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join_messages(const std::vector<Violation>& v) {
  std::string out = "invalid configuration";
  for (const auto& x : v) out += "\n  " + (x.path.empty() ? std::string("<root>") : x.path) + ": " + x.reason;
  return out;
}

std::string key_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

const char* type_name(const json& j) { return j.type_name(); }

// Reads typed values and records every violation.
class Reader {
 public:
  std::vector<Violation> violations;

  void fail(const std::string& path, const std::string& reason) { violations.push_back({path, reason}); }

  bool is_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, std::string("expected an object, got ") + type_name(j));
    return false;
  }

  void allow_keys(const json& obj, const std::string& path, const std::vector<std::string>& keys) {
    for (const auto& [k, v] : obj.items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(key_path(path, k), "unknown key");
  }

  const json* member(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  std::optional<double> number(const json& obj, const std::string& path, const std::string& key) {
    const json* j = member(obj, key);
    if (!j) return std::nullopt;
    if (!j->is_number()) {
      fail(key_path(path, key), std::string("expected a number, got ") + type_name(*j));
      return std::nullopt;
    }
    const double v = j->get<double>();
    if (!std::isfinite(v)) {
      fail(key_path(path, key), "must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<int> integer(const json& obj, const std::string& path, const std::string& key) {
    const json* j = member(obj, key);
    if (!j) return std::nullopt;
    if (!j->is_number_integer()) {
      fail(key_path(path, key), std::string("expected an integer, got ") + type_name(*j));
      return std::nullopt;
    }
    return j->get<int>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& path, const std::string& key) {
    const json* j = member(obj, key);
    if (!j) return std::nullopt;
    if (!j->is_boolean()) {
      fail(key_path(path, key), std::string("expected true or false, got ") + type_name(*j));
      return std::nullopt;
    }
    return j->get<bool>();
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const std::string& key) {
    const json* j = member(obj, key);
    if (!j) return std::nullopt;
    if (!j->is_string()) {
      fail(key_path(path, key), std::string("expected a string, got ") + type_name(*j));
      return std::nullopt;
    }
    return j->get<std::string>();
  }

  std::optional<Vec> vector(const json& obj, const std::string& path, const std::string& key, int n) {
    const json* j = member(obj, key);
    if (!j) return std::nullopt;
    return vector_value(*j, key_path(path, key), n);
  }

  std::optional<Vec> vector_value(const json& j, const std::string& path, int n) {
    if (!j.is_array()) {
      fail(path, std::string("expected an array, got ") + type_name(j));
      return std::nullopt;
    }
    if (n >= 0 && static_cast<int>(j.size()) != n) {
      fail(path, "expected " + std::to_string(n) + " entries, got " + std::to_string(j.size()));
      return std::nullopt;
    }
    Vec v(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
      if (!j[k].is_number() || !std::isfinite(j[k].get<double>())) {
        fail(path + "[" + std::to_string(k) + "]", "expected a finite number");
        return std::nullopt;
      }
      v(static_cast<int>(k)) = j[k].get<double>();
    }
    return v;
  }

  std::optional<Mat> matrix(const json& obj, const std::string& path, const std::string& key, int n) {
    const json* j = member(obj, key);
    if (!j) return std::nullopt;
    return matrix_value(*j, key_path(path, key), n);
  }

  // Row-major nested arrays; n < 0 accepts any square size.
  std::optional<Mat> matrix_value(const json& j, const std::string& path, int n) {
    if (!j.is_array() || j.empty()) {
      fail(path, "expected a non-empty array of rows");
      return std::nullopt;
    }
    const int rows = static_cast<int>(j.size());
    if (n >= 0 && rows != n) {
      fail(path, "expected " + std::to_string(n) + " rows, got " + std::to_string(rows));
      return std::nullopt;
    }
    Mat M(rows, rows);
    for (int i = 0; i < rows; ++i) {
      const auto row = vector_value(j[i], path + "[" + std::to_string(i) + "]", rows);
      if (!row) return std::nullopt;
      M.row(i) = row->transpose();
    }
    return M;
  }
};

bool symmetric(const Mat& M) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

bool positive_definite(const Mat& M) {
  const Eigen::SelfAdjointEigenSolver<Mat> es(sym(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
}

void check_spd(Reader& r, const Mat& M, const std::string& path) {
  if (!symmetric(M))
    r.fail(path, "not symmetric");
  else if (!positive_definite(M))
    r.fail(path, "not positive-definite");
}

json to_json(const Mat& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

int multiplier_count(int n) { return n * (n - 1) / 2; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void log_line(const RunOptions& o, LogLevel level, std::ostream& err, const std::string& msg) {
  if (o.log != LogLevel::Off && static_cast<int>(level) <= static_cast<int>(o.log))
    err << "[affinebody] " << msg << "\n";
}

std::string status_text(const Trajectory& t) {
  if (t.completed) return "completed";
  std::string msg = t.message;
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return msg;
}

}  // namespace

SchemaError::SchemaError(std::vector<Violation> violations)
    : std::runtime_error(join_messages(violations)), violations_(std::move(violations)) {}

const std::vector<std::string>& known_fields() {
  static const std::vector<std::string> f = {"x",         "phi", "xdot", "phidot",
                                             "energy",    "T",   "V",    "S",
                                             "vorticity", "det_phi", "I", "constraint_residual",
                                             "mu"};
  return f;
}

const std::vector<std::string>& default_fields() {
  static const std::vector<std::string> f = {"x", "phi", "energy",  "T", "V", "S",
                                             "det_phi", "I", "constraint_residual", "mu"};
  return f;
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  auto same_terms = [](const std::vector<PotentialTerm>& x, const std::vector<PotentialTerm>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k].coef != y[k].coef || x[k].powers != y[k].powers) return false;
    return true;
  };
  const auto& ia = a.integrator;
  const auto& ib = b.integrator;
  return a.dim == b.dim && a.g == b.g && a.eta == b.eta && a.inertia.m == b.inertia.m &&
         a.inertia.J == b.inertia.J && a.inertia.I == b.inertia.I && a.initial.x == b.initial.x &&
         a.initial.phi == b.initial.phi && a.initial.xdot == b.initial.xdot &&
         a.initial.phidot == b.initial.phidot && a.initial.mu == b.initial.mu &&
         same_terms(a.force.potential, b.force.potential) && a.force.nu == b.force.nu &&
         a.force.zeta == b.force.zeta && a.force.V0 == b.force.V0 &&
         a.constraint.kind == b.constraint.kind && a.constraint.procedure == b.constraint.procedure &&
         a.constraint.frozen_rotation == b.constraint.frozen_rotation && ia.method == ib.method &&
         ia.h == ib.h && ia.t_end == ib.t_end && ia.projection == ib.projection &&
         ia.monitor_every == ib.monitor_every && ia.projection_bound == ib.projection_bound &&
         a.output.path == b.output.path && a.output.fields == b.output.fields &&
         a.compare.threshold == b.compare.threshold;
}

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::vector<Violation>{{"", std::string("malformed document: ") + e.what()}});
  }
  Reader r;
  ScenarioConfig c;
  if (!r.is_object(doc, "")) throw SchemaError(r.violations);
  r.allow_keys(doc, "", {"dim", "g", "eta", "inertia", "initial", "force", "constraint",
                         "integrator", "output", "compare"});

  int n = -1;
  if (const auto d = r.integer(doc, "", "dim")) {
    if (*d < 2 || *d > 3)
      r.fail("dim", "must be 2 or 3");
    else
      n = *d;
  } else if (!doc.contains("dim")) {
    r.fail("dim", "required");
  }
  const int size = n > 0 ? n : 2;
  c.dim = size;
  c.g = Mat::Identity(size, size);
  c.eta = Mat::Identity(size, size);
  for (const char* key : {"g", "eta"})
    if (auto M = r.matrix(doc, "", key, n)) {
      check_spd(r, *M, key);
      (std::string(key) == "g" ? c.g : c.eta) = *M;
    }

  // Constraint first: mu validation depends on it.
  if (const json* j = r.member(doc, "constraint"); j && r.is_object(*j, "constraint")) {
    r.allow_keys(*j, "constraint", {"kind", "procedure", "frozen_rotation"});
    if (auto s = r.string(*j, "constraint", "kind")) {
      try {
        c.constraint.kind = constraint_kind_from_string(*s);
      } catch (const Error&) {
        r.fail("constraint.kind", "unknown kind '" + *s + "'");
      }
    }
    if (auto s = r.string(*j, "constraint", "procedure")) {
      try {
        c.constraint.procedure = procedure_from_string(*s);
      } catch (const Error&) {
        r.fail("constraint.procedure", "unknown procedure '" + *s + "'");
      }
    }
    if (auto b = r.boolean(*j, "constraint", "frozen_rotation")) c.constraint.frozen_rotation = *b;
    if (c.constraint.procedure &&
        !is_supported(c.constraint.kind, *c.constraint.procedure))
      r.fail("constraint", std::string("unsupported combination ") + to_string(c.constraint.kind) +
                               " / " + to_string(*c.constraint.procedure));
    if (c.constraint.frozen_rotation && c.constraint.kind != ConstraintKind::SpatialRotationless)
      r.fail("constraint.frozen_rotation", "requires kind spatial_rotationless");
  }

  if (const json* j = r.member(doc, "inertia"); j && r.is_object(*j, "inertia")) {
    r.allow_keys(*j, "inertia", {"m", "J", "I"});
    if (auto m = r.number(*j, "inertia", "m")) {
      if (*m <= 0) r.fail("inertia.m", "must be positive");
      c.inertia.m = *m;
    }
    if (auto J = r.matrix(*j, "inertia", "J", n)) {
      check_spd(r, *J, "inertia.J");
      c.inertia.J = *J;
    }
    if (auto I = r.number(*j, "inertia", "I")) {
      if (*I <= 0) r.fail("inertia.I", "must be positive");
      c.inertia.I = *I;
    }
    if (j->contains("J") && j->contains("I")) r.fail("inertia", "give either J or I, not both");
  }
  if (!c.inertia.J && !c.inertia.I) c.inertia.I = 1.0;

  c.initial.x = Vec::Zero(size);
  c.initial.xdot = Vec::Zero(size);
  c.initial.phi = Mat::Identity(size, size);
  c.initial.phidot = Mat::Zero(size, size);
  if (const json* j = r.member(doc, "initial"); j && r.is_object(*j, "initial")) {
    r.allow_keys(*j, "initial", {"x", "phi", "xdot", "phidot", "mu"});
    if (auto v = r.vector(*j, "initial", "x", n)) c.initial.x = *v;
    if (auto v = r.vector(*j, "initial", "xdot", n)) c.initial.xdot = *v;
    if (auto M = r.matrix(*j, "initial", "phi", n)) {
      try {
        require_invertible(*M);
      } catch (const Error& e) {
        r.fail("initial.phi", std::string("not invertible: ") + e.what());
      }
      c.initial.phi = *M;
    }
    if (auto M = r.matrix(*j, "initial", "phidot", n)) c.initial.phidot = *M;
    if (j->contains("mu")) {
      const bool allowed = c.constraint.kind == ConstraintKind::SpatialRotationless &&
                           c.constraint.procedure != Procedure::DAlembert;
      if (!allowed)
        r.fail("initial.mu", "multipliers apply only to vakonomic spatial_rotationless runs");
      else if (auto v = r.vector(*j, "initial", "mu", n > 0 ? multiplier_count(n) : -1))
        c.initial.mu = *v;
    }
  }

  if (const json* j = r.member(doc, "force"); j && r.is_object(*j, "force")) {
    r.allow_keys(*j, "force", {"potential", "nu", "zeta", "V0"});
    if (const json* p = r.member(*j, "potential")) {
      if (!p->is_array()) {
        r.fail("force.potential", "expected an array of terms");
      } else {
        for (std::size_t k = 0; k < p->size(); ++k) {
          const std::string path = "force.potential[" + std::to_string(k) + "]";
          const json& t = (*p)[k];
          if (!r.is_object(t, path)) continue;
          r.allow_keys(t, path, {"coef", "powers"});
          PotentialTerm term;
          if (auto v = r.number(t, path, "coef"))
            term.coef = *v;
          else if (!t.contains("coef"))
            r.fail(path + ".coef", "required");
          if (const json* pw = r.member(t, "powers")) {
            bool ok = pw->is_array() && (n < 0 || static_cast<int>(pw->size()) <= n);
            if (ok)
              for (const auto& e : *pw) ok = ok && e.is_number_integer() && e.get<int>() >= 0;
            if (ok)
              term.powers = pw->get<std::vector<int>>();
            else
              r.fail(path + ".powers", "expected at most dim non-negative integers");
          }
          c.force.potential.push_back(term);
        }
      }
    }
    if (auto v = r.number(*j, "force", "nu")) c.force.nu = *v;
    if (auto v = r.number(*j, "force", "zeta")) c.force.zeta = *v;
    if (auto v = r.number(*j, "force", "V0")) {
      if (*v <= 0) r.fail("force.V0", "must be positive");
      c.force.V0 = *v;
    }
  }
  if ((c.force.nu != 0 || c.force.zeta != 0) && c.initial.phi.rows() == size &&
      c.initial.phi.determinant() <= 0)
    r.fail("initial.phi", "viscous forces need det phi > 0");

  if (const json* j = r.member(doc, "integrator"); j && r.is_object(*j, "integrator")) {
    r.allow_keys(*j, "integrator",
                 {"method", "h", "t_end", "projection", "monitor_every", "projection_bound"});
    auto& s = c.integrator;
    if (auto m = r.string(*j, "integrator", "method")) {
      try {
        s.method = method_from_string(*m);
      } catch (const Error&) {
        r.fail("integrator.method", "unknown method '" + *m + "'");
      }
    }
    if (auto v = r.number(*j, "integrator", "h")) {
      if (*v <= 0) r.fail("integrator.h", "must be positive");
      s.h = *v;
    }
    if (auto v = r.number(*j, "integrator", "t_end")) s.t_end = *v;
    if (auto b = r.boolean(*j, "integrator", "projection")) s.projection = *b;
    if (auto v = r.integer(*j, "integrator", "monitor_every")) {
      if (*v < 0) r.fail("integrator.monitor_every", "must be >= 0");
      s.monitor_every = *v;
    }
    if (auto v = r.number(*j, "integrator", "projection_bound")) {
      if (*v <= 0) r.fail("integrator.projection_bound", "must be positive");
      s.projection_bound = *v;
    }
  }
  if (c.integrator.h > 0 && !(c.integrator.t_end >= c.integrator.h))
    r.fail("integrator.t_end", "must be at least one step h");

  c.output.fields = default_fields();
  if (const json* j = r.member(doc, "output"); j && r.is_object(*j, "output")) {
    r.allow_keys(*j, "output", {"path", "fields"});
    if (auto p = r.string(*j, "output", "path")) {
      if (p->empty()) r.fail("output.path", "must not be empty");
      c.output.path = *p;
    }
    if (const json* f = r.member(*j, "fields")) {
      std::vector<std::string> chosen;
      if (!f->is_array()) {
        r.fail("output.fields", "expected an array of column groups");
      } else {
        for (const auto& e : *f) {
          const auto& known = known_fields();
          if (!e.is_string() || std::find(known.begin(), known.end(), e.get<std::string>()) == known.end())
            r.fail("output.fields", "unknown column group " + e.dump());
          else
            chosen.push_back(e.get<std::string>());
        }
        c.output.fields.clear();
        for (const auto& k : known_fields())
          if (std::find(chosen.begin(), chosen.end(), k) != chosen.end()) c.output.fields.push_back(k);
      }
    }
  }

  if (const json* j = r.member(doc, "compare"); j && r.is_object(*j, "compare")) {
    r.allow_keys(*j, "compare", {"threshold"});
    if (auto v = r.number(*j, "compare", "threshold")) {
      if (*v <= 0) r.fail("compare.threshold", "must be positive");
      c.compare.threshold = *v;
    }
  }

  if (!r.violations.empty()) throw SchemaError(r.violations);
  return c;
}

std::string print_config(const ScenarioConfig& c) {
  json doc = json::object();
  doc["dim"] = c.dim;
  doc["g"] = to_json(c.g);
  doc["eta"] = to_json(c.eta);
  json inertia = {{"m", c.inertia.m}};
  if (c.inertia.J) inertia["J"] = to_json(*c.inertia.J);
  if (c.inertia.I) inertia["I"] = *c.inertia.I;
  doc["inertia"] = inertia;
  json initial = {{"x", to_json(c.initial.x)},
                  {"phi", to_json(c.initial.phi)},
                  {"xdot", to_json(c.initial.xdot)},
                  {"phidot", to_json(c.initial.phidot)}};
  if (c.initial.mu) initial["mu"] = to_json(*c.initial.mu);
  doc["initial"] = initial;
  json terms = json::array();
  for (const auto& t : c.force.potential) terms.push_back({{"coef", t.coef}, {"powers", t.powers}});
  doc["force"] = {{"potential", terms}, {"nu", c.force.nu}, {"zeta", c.force.zeta}, {"V0", c.force.V0}};
  json constraint = {{"kind", to_string(c.constraint.kind)},
                     {"frozen_rotation", c.constraint.frozen_rotation}};
  if (c.constraint.procedure) constraint["procedure"] = to_string(*c.constraint.procedure);
  doc["constraint"] = constraint;
  doc["integrator"] = {{"method", to_string(c.integrator.method)},
                       {"h", c.integrator.h},
                       {"t_end", c.integrator.t_end},
                       {"projection", c.integrator.projection},
                       {"monitor_every", c.integrator.monitor_every},
                       {"projection_bound", c.integrator.projection_bound}};
  doc["output"] = {{"path", c.output.path}, {"fields", c.output.fields}};
  doc["compare"] = {{"threshold", c.compare.threshold}};
  return doc.dump(2);
}

SimulationSetup make_setup(const ScenarioConfig& c) {
  SimulationSetup s;
  s.g = Metric(c.g);
  s.eta = Metric(c.eta);
  if (c.inertia.I) {
    s.inertia = Inertia::make_isotropic(c.inertia.m, *c.inertia.I, s.eta);
  } else {
    s.inertia.m = c.inertia.m;
    s.inertia.J = *c.inertia.J;
  }
  if (!c.force.potential.empty()) s.force.potential = Potential(c.force.potential);
  s.force.nu = c.force.nu;
  s.force.zeta = c.force.zeta;
  s.force.V0 = c.force.V0;
  s.kind = c.constraint.kind;
  s.procedure = c.constraint.procedure.value_or(Procedure::DAlembert);
  s.frozen_rotation = c.constraint.frozen_rotation;
  return s;
}

PhaseState initial_state(const ScenarioConfig& c) {
  return {c.initial.x, c.initial.phi, c.initial.xdot, c.initial.phidot};
}

std::vector<std::string> csv_header(const ScenarioConfig& c, int mu_count) {
  const int n = c.dim;
  std::vector<std::string> cols{"t"};
  auto vec = [&](const char* name) {
    for (int i = 0; i < n; ++i) cols.push_back(std::string(name) + "[" + std::to_string(i) + "]");
  };
  auto mat = [&](const char* name) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        cols.push_back(std::string(name) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  };
  for (const auto& f : c.output.fields) {
    if (f == "x" || f == "xdot") vec(f.c_str());
    else if (f == "phi" || f == "phidot" || f == "S" || f == "vorticity") mat(f.c_str());
    else if (f == "I")
      for (int k = 1; k <= n; ++k) cols.push_back("I_" + std::to_string(k));
    else if (f == "mu")
      for (int a = 0; a < mu_count; ++a) cols.push_back("mu[" + std::to_string(a) + "]");
    else cols.push_back(f);
  }
  return cols;
}

std::string trajectory_csv(const ScenarioConfig& c, const Trajectory& traj, const std::string& command) {
  std::ostringstream os;
  os << "# affinebody " << command << "\n# resolved configuration:\n";
  std::istringstream cfg(print_config(c));
  for (std::string line; std::getline(cfg, line);) os << "# " << line << "\n";
  const int mu_count =
      traj.samples.empty() ? 0 : static_cast<int>(traj.samples.front().monitors.mu.size());
  const auto header = csv_header(c, mu_count);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  for (const auto& smp : traj.samples) {
    std::vector<double> row{smp.t};
    const auto& st = smp.state;
    const auto& m = smp.monitors;
    auto mat = [&](const Mat& M) {
      for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    };
    auto vec = [&](const Vec& v) {
      for (int i = 0; i < v.size(); ++i) row.push_back(v(i));
    };
    for (const auto& f : c.output.fields) {
      if (f == "x") vec(st.x);
      else if (f == "phi") mat(st.phi);
      else if (f == "xdot") vec(st.xdot);
      else if (f == "phidot") mat(st.phidot);
      else if (f == "energy") row.push_back(m.energy);
      else if (f == "T") row.push_back(m.T);
      else if (f == "V") row.push_back(m.V);
      else if (f == "S") mat(m.S);
      else if (f == "vorticity") mat(m.vorticity);
      else if (f == "det_phi") row.push_back(m.det_phi);
      else if (f == "I") row.insert(row.end(), m.I.begin(), m.I.end());
      else if (f == "constraint_residual") row.push_back(m.constraint_residual);
      else if (f == "mu") vec(m.mu);
    }
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << fmt(row[k]);
    os << "\n";
  }
  os << "# status: " << status_text(traj) << "\n";
  return os.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("AFFINEBODY_LOG");
  if (!v) return LogLevel::Off;
  const std::string s(v);
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Off;
}

namespace {

ScenarioConfig with_overrides(const ScenarioConfig& config, const RunOptions& o) {
  ScenarioConfig c = config;
  if (o.h) c.integrator.h = *o.h;
  c.integrator.validate();
  return c;
}

Vec initial_mu(const ScenarioConfig& c) {
  if (c.initial.mu) return *c.initial.mu;
  if (c.constraint.kind == ConstraintKind::SpatialRotationless)
    return Vec::Zero(multiplier_count(c.dim));
  return {};
}

}  // namespace

int run_simulate(const ScenarioConfig& config, const RunOptions& o, std::ostream& out,
                 std::ostream& err) {
  ScenarioConfig c;
  Trajectory traj;
  try {
    c = with_overrides(config, o);
    const SimulationSetup setup = make_setup(c);
    log_line(o, LogLevel::Info, err,
             std::string("simulate: ") + to_string(setup.kind) + "/" + to_string(setup.procedure) +
                 ", " + std::to_string(c.integrator.step_count()) + " steps");
    const Vec mu = setup.procedure == Procedure::Vakonomic ? initial_mu(c) : Vec();
    traj = simulate(initial_state(c), mu, setup, c.integrator);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  const std::string path = o.out.value_or(c.output.path);
  try {
    write_atomic(path, trajectory_csv(c, traj, "simulate"));
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  log_line(o, LogLevel::Debug, err, "final energy " + fmt(traj.samples.back().monitors.energy));
  if (!traj.completed) {
    err << "run stopped at t = " << fmt(traj.samples.back().t) << ": " << status_text(traj) << "\n";
    return kNumerical;
  }
  if (!o.quiet) out << "wrote " << traj.samples.size() << " samples to " << path << "\n";
  return kOk;
}

int run_compare(const ScenarioConfig& config, const RunOptions& o, std::ostream& out,
                std::ostream& err, CompareReport* report_out) {
  if (config.constraint.kind != ConstraintKind::SpatialRotationless) {
    err << "error: compare needs constraint kind spatial_rotationless\n";
    return kUsage;
  }
  if (config.constraint.procedure && !o.quiet)
    err << "note: constraint.procedure is ignored by compare\n";

  ScenarioConfig c;
  Trajectory dal, vak;
  try {
    c = with_overrides(config, o);
    c.constraint.procedure.reset();
    SimulationSetup sd = make_setup(c);
    SimulationSetup sv = sd;
    sd.procedure = Procedure::DAlembert;
    sv.procedure = Procedure::Vakonomic;
    const PhaseState s0 = initial_state(c);
    const Vec mu = initial_mu(c);
    log_line(o, LogLevel::Info, err, "compare: running both procedures");
    auto fd = std::async(std::launch::async, [&] { return simulate(s0, {}, sd, c.integrator); });
    auto fv = std::async(std::launch::async, [&] { return simulate(s0, mu, sv, c.integrator); });
    dal = fd.get();
    vak = fv.get();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  CompareReport rep;
  rep.threshold = c.compare.threshold;
  rep.samples = std::min(dal.samples.size(), vak.samples.size());
  std::ostringstream curve;
  curve << "# affinebody compare: |phi_dalembert - phi_vakonomic| (Frobenius)\nt,divergence\n";
  for (std::size_t k = 0; k < rep.samples; ++k) {
    const double t = dal.samples[k].t;
    const double d = (dal.samples[k].state.phi - vak.samples[k].state.phi).norm();
    curve << fmt(t) << "," << fmt(d) << "\n";
    if (d > rep.max_divergence) {
      rep.max_divergence = d;
      rep.t_of_max = t;
    }
    if (!rep.first_exceedance && d > rep.threshold) rep.first_exceedance = t;
  }

  const fs::path target(o.out.value_or(c.output.path));
  const std::string stem = (target.parent_path() / target.stem()).string();
  json report = {{"max_divergence", rep.max_divergence},
                 {"t_of_max", rep.t_of_max},
                 {"threshold", rep.threshold},
                 {"first_exceedance", rep.first_exceedance ? json(*rep.first_exceedance) : json(nullptr)},
                 {"samples", rep.samples},
                 {"dalembert", status_text(dal)},
                 {"vakonomic", status_text(vak)}};
  const std::string script = "# gnuplot script for the procedure divergence curve\n"
                             "set datafile separator \",\"\n"
                             "set key autotitle columnhead\n"
                             "set xlabel \"t\"\n"
                             "set ylabel \"|phi_dalembert - phi_vakonomic|\"\n"
                             "plot \"" + stem + "_divergence.csv\" using 1:2 with lines\n";
  try {
    write_atomic(stem + "_dalembert.csv", trajectory_csv(c, dal, "compare (dalembert)"));
    write_atomic(stem + "_vakonomic.csv", trajectory_csv(c, vak, "compare (vakonomic)"));
    write_atomic(stem + "_divergence.csv", curve.str());
    write_atomic(stem + "_report.json", report.dump(2) + "\n");
    write_atomic(stem + "_divergence.gp", script);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  if (report_out) *report_out = rep;
  if (!o.quiet) {
    out << "max divergence " << fmt(rep.max_divergence) << " at t = " << fmt(rep.t_of_max) << "\n";
    out << "first exceedance of " << fmt(rep.threshold) << ": "
        << (rep.first_exceedance ? fmt(*rep.first_exceedance) : std::string("none")) << "\n";
    out << "report written to " << stem << "_report.json\n";
  }
  if (!dal.completed || !vak.completed) {
    err << "a run stopped early: dalembert " << status_text(dal) << ", vakonomic "
        << status_text(vak) << "\n";
    return kNumerical;
  }
  return kOk;
}

DecomposeInput parse_decompose_input(const std::string& arg) {
  std::string text = arg;
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) text = read_file(arg);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    throw SchemaError(std::vector<Violation>{{"", "expected a JSON matrix, matrix document or scenario file"}});
  }
  if (doc.is_object() && doc.contains("initial")) {
    const ScenarioConfig c = parse_config(text);
    return {c.initial.phi, c.g, c.eta};
  }
  Reader r;
  DecomposeInput in;
  if (doc.is_array()) {
    if (auto M = r.matrix_value(doc, "matrix", -1)) in.phi = *M;
  } else if (r.is_object(doc, "")) {
    r.allow_keys(doc, "", {"matrix", "g", "eta"});
    if (auto M = r.matrix(doc, "", "matrix", -1))
      in.phi = *M;
    else if (!doc.contains("matrix"))
      r.fail("matrix", "required");
    const int n = static_cast<int>(in.phi.rows());
    for (const char* key : {"g", "eta"})
      if (auto M = r.matrix(doc, "", key, n > 0 ? n : -1)) {
        check_spd(r, *M, key);
        (std::string(key) == "g" ? in.g : in.eta) = *M;
      }
  }
  if (!r.violations.empty()) throw SchemaError(r.violations);
  const int n = static_cast<int>(in.phi.rows());
  if (in.g.size() == 0) in.g = Mat::Identity(n, n);
  if (in.eta.size() == 0) in.eta = Mat::Identity(n, n);
  return in;
}

int run_decompose(const DecomposeInput& in, const RunOptions& o, std::ostream& out,
                  std::ostream& err) {
  try {
    const Metric g(in.g), eta(in.eta);
    const Placement phi(in.phi);
    const PolarFactors pf = polar_decompose(phi, g, eta);
    const TwoPolarFactors tp = two_polar_decompose(phi, g, eta);
    const InvariantSet inv = deformation_invariants(deformation_tensors(phi, g, eta));
    const Mat U_inv = eta.inverse() * pf.U.transpose() * g.matrix();
    const double scale = in.phi.norm();
    json doc = {
        {"input", to_json(in.phi)},
        {"polar", {{"U", to_json(pf.U)}, {"A", to_json(pf.A)}, {"B", to_json(pf.B)}}},
        {"two_polar",
         {{"L", to_json(tp.L)}, {"D", to_json(tp.D)}, {"R", to_json(tp.R)}, {"degenerate", tp.degenerate}}},
        {"invariants", {{"I", inv.I}, {"lambda", to_json(inv.lambda)}}},
        {"residuals",
         {{"polar_UA", (pf.U * pf.A - in.phi).norm() / scale},
          {"polar_BU", (pf.B * pf.U - in.phi).norm() / scale},
          {"similarity", (pf.A - U_inv * pf.B * pf.U).norm()},
          {"two_polar", (tp.L * tp.D * tp.R_inverse(eta) - in.phi).norm() / scale}}}};
    if (!o.quiet) out << doc.dump(2) << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::SingularPlacement ? kNumerical : kUsage;
  }
  return kOk;
}

int run_check(const RunOptions& o, std::ostream& out, std::ostream&) {
  int failures = 0;
  for (int id = 1; id <= check_count(); ++id) {
    const CheckResult r = affinebody::run_check(id, o.seed);
    if (!r.passed) ++failures;
    if (!o.quiet || !r.passed) out << format_result(r) << "\n" << std::flush;
  }
  if (!o.quiet)
    out << (check_count() - failures) << " of " << check_count() << " checks passed\n";
  return failures == 0 ? kOk : kNumerical;
}

}  // namespace affinebody::cli
