#include "daeo/system_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "daeo/expr.hpp"
#include "json.hpp"

namespace daeo {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw IoError(origin + ": " + msg);
}

void check_allowed(const ordered_json& j, const std::set<std::string>& allowed,
                   const std::string& origin, const std::string& where) {
  for (const auto& item : j.items())
    if (allowed.find(item.key()) == allowed.end())
      fail(origin, "unknown field '" + item.key() + "' in " + where);
}

const ordered_json& require(const ordered_json& j, const std::string& key,
                            const std::string& origin,
                            const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(origin, "missing field '" + key + "' in " + where);
  return *it;
}

double get_number(const ordered_json& j, const std::string& origin,
                  const std::string& where) {
  if (!j.is_number()) fail(origin, where + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(origin, where + " must be finite");
  return v;
}

int get_int(const ordered_json& j, const std::string& origin,
            const std::string& where) {
  if (!j.is_number_integer()) fail(origin, where + " must be an integer");
  return j.get<int>();
}

Mat parse_matrix(const ordered_json& j, const std::string& origin,
                 const std::string& where) {
  if (!j.is_array()) fail(origin, where + " must be an array of row arrays");
  const int rows = static_cast<int>(j.size());
  int cols = -1;
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array())
      fail(origin, where + " row " + std::to_string(i) + " must be an array");
    const int c = static_cast<int>(j[i].size());
    if (cols < 0)
      cols = c;
    else if (c != cols)
      fail(origin, where + " rows have inconsistent lengths");
  }
  if (cols < 0) cols = 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c)
      m(i, c) = get_number(j[i][c], origin,
                           where + "[" + std::to_string(i) + "][" +
                               std::to_string(c) + "]");
  return m;
}

std::vector<ExprPtr> parse_exprs(const ordered_json& j,
                                 const std::string& origin,
                                 const std::string& where) {
  if (!j.is_array())
    fail(origin, where + " must be an array of expression strings");
  std::vector<ExprPtr> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string())
      fail(origin,
           where + "[" + std::to_string(i) + "] must be an expression string");
    try {
      out.push_back(parse_expression(j[i].get<std::string>()));
    } catch (const ParseError& e) {
      fail(origin, where + "[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

ordered_json matrix_to_json(const Mat& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json exprs_to_json(const VectorFunction& f) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : f.exprs) arr.push_back(to_string(*e));
  return arr;
}

}  // namespace

LmiCertificate SystemFile::certificate() const {
  if (!has_certificate) throw IoError("system file carries no certificate");
  LmiCertificate cert;
  cert.P = P;
  cert.K = K;
  cert.delta = has_delta ? delta : 1.0;
  return cert;
}

SystemFile parse_system_text(const std::string& text,
                             const std::string& origin) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(origin + ": " + e.what());
  }
  if (!j.is_object()) fail(origin, "top level must be an object");
  check_allowed(j,
                {"format_version", "name", "m", "E", "A", "B_L", "B_M", "J",
                 "C", "F", "Theta", "mu", "f_L", "f_M", "h", "u", "gains",
                 "certificate", "delta", "sampling", "solver"},
                origin, "the top-level object");

  SystemFile sf;
  sf.format_version =
      get_int(require(j, "format_version", origin, "the top-level object"),
              origin, "format_version");
  if (sf.format_version != 1)
    fail(origin, "unsupported format_version " +
                     std::to_string(sf.format_version));
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail(origin, "name must be a string");
    sf.name = j["name"].get<std::string>();
  }

  DaeSystem& sys = sf.sys;
  auto mat = [&](const char* key) {
    return parse_matrix(require(j, key, origin, "the top-level object"),
                        origin, key);
  };
  sys.E = mat("E");
  sys.A = mat("A");
  sys.B_L = mat("B_L");
  sys.B_M = mat("B_M");
  sys.J = mat("J");
  sys.C = mat("C");
  sys.F = mat("F");
  sys.Theta = mat("Theta");
  sys.mu = get_number(require(j, "mu", origin, "the top-level object"), origin,
                      "mu");
  sys.m = j.contains("m") ? get_int(j["m"], origin, "m") : 0;
  if (sys.m < 0) fail(origin, "m must be nonnegative");

  sys.l = static_cast<int>(sys.E.rows());
  sys.n = static_cast<int>(sys.E.cols());
  sys.p = static_cast<int>(sys.C.rows());
  // Empty matrices written as [] carry no column count; restore it from
  // context so that zero-channel systems round trip.
  if (sys.B_L.rows() == 0) sys.B_L = Mat(sys.l, 0);
  if (sys.B_M.rows() == 0) sys.B_M = Mat(sys.l, 0);
  sys.q_L = static_cast<int>(sys.B_L.cols());
  sys.q_M = static_cast<int>(sys.B_M.cols());
  if (sys.J.rows() == 0) sys.J = Mat(0, sys.n);
  if (sys.F.rows() == 0) sys.F = Mat(0, sys.n);
  if (sys.C.rows() == 0) sys.C = Mat(0, sys.n);
  if (sys.Theta.rows() == 0) sys.Theta = Mat(0, 0);

  auto vf = [&](const char* key, int n_x, int n_w) {
    VectorFunction f;
    f.exprs = parse_exprs(require(j, key, origin, "the top-level object"),
                          origin, key);
    f.n_x = n_x;
    f.n_u = sys.m;
    f.n_y = sys.p;
    f.n_w = n_w;
    f.allow_t = false;
    return f;
  };
  sys.f_L = vf("f_L", sys.n, 0);
  sys.f_M = vf("f_M", 0, sys.q_M);
  sys.h = vf("h", 0, 0);
  sys.h.n_y = 0;  // h depends on the input only

  if (j.contains("u")) {
    sf.has_u = true;
    sf.u.exprs = parse_exprs(j["u"], origin, "u");
    sf.u.allow_t = true;
    if (static_cast<int>(sf.u.exprs.size()) != sys.m)
      fail(origin, "u must have exactly m = " + std::to_string(sys.m) +
                       " components");
  }

  if (j.contains("gains")) {
    const ordered_json& g = j["gains"];
    if (!g.is_object()) fail(origin, "gains must be an object");
    check_allowed(g, {"L1", "L2"}, origin, "gains");
    sf.has_gains = true;
    sf.gains.L1 = parse_matrix(require(g, "L1", origin, "gains"), origin,
                               "gains.L1");
    sf.gains.L2 = parse_matrix(require(g, "L2", origin, "gains"), origin,
                               "gains.L2");
    if (sf.gains.L1.rows() == 0) sf.gains.L1 = Mat(sys.l, 0);
    if (sf.gains.L2.rows() == 0) sf.gains.L2 = Mat(sys.p, 0);
    if (sf.gains.L1.rows() != sys.l) fail(origin, "gains.L1 must have l rows");
    if (sf.gains.L2.rows() != sys.p) fail(origin, "gains.L2 must have p rows");
    if (sf.gains.L1.cols() != sf.gains.L2.cols())
      fail(origin, "gains.L1 and gains.L2 must have the same column count");
    sf.gains.k = static_cast<int>(sf.gains.L1.cols());
  }

  if (j.contains("certificate")) {
    const ordered_json& c = j["certificate"];
    if (!c.is_object()) fail(origin, "certificate must be an object");
    check_allowed(c, {"P", "K"}, origin, "certificate");
    sf.has_certificate = true;
    sf.P = parse_matrix(require(c, "P", origin, "certificate"), origin,
                        "certificate.P");
    sf.K = parse_matrix(require(c, "K", origin, "certificate"), origin,
                        "certificate.K");
  }
  if (j.contains("delta")) {
    sf.has_delta = true;
    sf.delta = get_number(j["delta"], origin, "delta");
  }

  if (j.contains("sampling")) {
    const ordered_json& s = j["sampling"];
    if (!s.is_object()) fail(origin, "sampling must be an object");
    check_allowed(s, {"box", "n_samples", "seed", "cond_limit", "omega_c"},
                  origin, "sampling");
    sf.has_sampling = true;
    if (s.contains("box"))
      sf.sampling.box = get_number(s["box"], origin, "sampling.box");
    if (s.contains("n_samples"))
      sf.sampling.n_samples = get_int(s["n_samples"], origin,
                                      "sampling.n_samples");
    if (s.contains("seed"))
      sf.sampling.seed = static_cast<std::uint64_t>(
          get_int(s["seed"], origin, "sampling.seed"));
    if (s.contains("cond_limit"))
      sf.sampling.cond_limit =
          get_number(s["cond_limit"], origin, "sampling.cond_limit");
    if (s.contains("omega_c"))
      sf.sampling.omega_c = get_number(s["omega_c"], origin,
                                       "sampling.omega_c");
  }

  if (j.contains("solver")) {
    const ordered_json& s = j["solver"];
    if (!s.is_object()) fail(origin, "solver must be an object");
    check_allowed(s, {"max_iters", "tol", "clamp", "relax", "seed",
                      "max_restarts"},
                  origin, "solver");
    sf.has_solver = true;
    if (s.contains("max_iters"))
      sf.solver.max_iters = get_int(s["max_iters"], origin,
                                    "solver.max_iters");
    if (s.contains("tol"))
      sf.solver.tol = get_number(s["tol"], origin, "solver.tol");
    if (s.contains("clamp"))
      sf.solver.clamp = get_number(s["clamp"], origin, "solver.clamp");
    if (s.contains("relax"))
      sf.solver.relax = get_number(s["relax"], origin, "solver.relax");
    if (s.contains("seed"))
      sf.solver.seed =
          static_cast<std::uint64_t>(get_int(s["seed"], origin,
                                             "solver.seed"));
    if (s.contains("max_restarts"))
      sf.solver.max_restarts = get_int(s["max_restarts"], origin,
                                       "solver.max_restarts");
  }

  try {
    sys.validate();
  } catch (const std::exception& e) {
    fail(origin, e.what());
  }
  return sf;
}

SystemFile load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system_text(buf.str(), path);
}

std::string system_to_json_text(const SystemFile& sf) {
  ordered_json j;
  j["format_version"] = sf.format_version;
  if (!sf.name.empty()) j["name"] = sf.name;
  j["m"] = sf.sys.m;
  j["E"] = matrix_to_json(sf.sys.E);
  j["A"] = matrix_to_json(sf.sys.A);
  j["B_L"] = matrix_to_json(sf.sys.B_L);
  j["B_M"] = matrix_to_json(sf.sys.B_M);
  j["J"] = matrix_to_json(sf.sys.J);
  j["C"] = matrix_to_json(sf.sys.C);
  j["F"] = matrix_to_json(sf.sys.F);
  j["Theta"] = matrix_to_json(sf.sys.Theta);
  j["mu"] = sf.sys.mu;
  j["f_L"] = exprs_to_json(sf.sys.f_L);
  j["f_M"] = exprs_to_json(sf.sys.f_M);
  j["h"] = exprs_to_json(sf.sys.h);
  if (sf.has_u) j["u"] = exprs_to_json(sf.u);
  if (sf.has_gains) {
    j["gains"] = {{"L1", matrix_to_json(sf.gains.L1)},
                  {"L2", matrix_to_json(sf.gains.L2)}};
  }
  if (sf.has_certificate) {
    j["certificate"] = {{"P", matrix_to_json(sf.P)},
                        {"K", matrix_to_json(sf.K)}};
  }
  if (sf.has_delta) j["delta"] = sf.delta;
  if (sf.has_sampling) {
    j["sampling"] = {{"box", sf.sampling.box},
                     {"n_samples", sf.sampling.n_samples},
                     {"seed", sf.sampling.seed},
                     {"cond_limit", sf.sampling.cond_limit},
                     {"omega_c", sf.sampling.omega_c}};
  }
  if (sf.has_solver) {
    j["solver"] = {{"max_iters", sf.solver.max_iters},
                   {"tol", sf.solver.tol},
                   {"clamp", sf.solver.clamp},
                   {"relax", sf.solver.relax},
                   {"seed", sf.solver.seed},
                   {"max_restarts", sf.solver.max_restarts}};
  }
  return j.dump(2) + "\n";
}

void save_system(const std::string& path, const SystemFile& sf) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << system_to_json_text(sf);
  if (!out) throw IoError("failed while writing '" + path + "'");
}

std::string report_to_json_text(const CertificateReport& rep) {
  ordered_json j;
  j["claim"] = rep.claim;
  j["passed"] = rep.passed;
  if (std::isfinite(rep.beta))
    j["beta"] = rep.beta;
  else
    j["beta"] = nullptr;
  ordered_json conds = ordered_json::array();
  for (const auto& c : rep.conditions) {
    ordered_json e;
    e["name"] = c.name;
    e["verdict"] = verdict_name(c.verdict);
    if (std::isfinite(c.margin))
      e["margin"] = c.margin;
    else
      e["margin"] = nullptr;
    e["detail"] = c.detail;
    conds.push_back(std::move(e));
  }
  j["conditions"] = std::move(conds);
  return j.dump(2) + "\n";
}

std::string report_to_text(const CertificateReport& rep) {
  std::size_t width = 0;
  for (const auto& c : rep.conditions) width = std::max(width, c.name.size());
  std::ostringstream os;
  os << "claim:  " << rep.claim << "\n";
  os << "result: " << (rep.passed ? "PASS" : "FAIL") << "\n";
  for (const auto& c : rep.conditions) {
    std::string name = c.name;
    name.resize(width, ' ');
    std::string verdict = verdict_name(c.verdict);
    verdict.resize(14, ' ');
    os << "  " << name << "  " << verdict << " margin=";
    os << (std::isfinite(c.margin) ? fmt_g(c.margin) : std::string("n/a"));
    if (!c.detail.empty()) os << "  " << c.detail;
    os << "\n";
  }
  if (std::isfinite(rep.beta)) os << "beta:   " << fmt_g(rep.beta) << "\n";
  return os.str();
}

}  // namespace daeo
