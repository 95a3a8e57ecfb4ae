#include "framebound/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace framebound {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path, msg); }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) fail(path + "/" + k, "unknown field");
}

const json& need(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing required field");
  return *it;
}

template <typename T>
T get_or(const json& obj, const char* key, const std::string& path, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(path + "/" + key, "wrong type");
  }
}

int get_int(const json& obj, const char* key, const std::string& path, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) fail(path + "/" + key, "expected an integer");
  return it->get<int>();
}

int need_int(const json& obj, const char* key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
  return v.get<int>();
}

// A scalar entry: "p/q", "0.25" or a JSON number. Numbers that are not exactly a
// small rational are kept as floating data.
struct Entry {
  std::optional<Rational> exact;
  double value = 0.0;
};

Entry parse_entry(const json& v, const std::string& path) {
  Entry e;
  if (v.is_string()) {
    try {
      e.exact = Rational::parse(v.get<std::string>());
    } catch (const std::exception& ex) {
      fail(path, std::string("invalid rational: ") + ex.what());
    }
    e.value = e.exact->to_double();
  } else if (v.is_number()) {
    e.value = v.get<double>();
    if (!std::isfinite(e.value)) fail(path, "non-finite number");
    try {
      Rational r = Rational::from_double(e.value, 1e-15, 1'000'000);
      if (r.to_double() == e.value) e.exact = r;
    } catch (const std::domain_error&) {
    }
  } else {
    fail(path, "expected a number or a rational string");
  }
  return e;
}

struct MatrixValue {
  std::optional<RationalMatrix> exact;
  Eigen::MatrixXd value;
};

// Scalars are 1x1 matrices; otherwise a list of rows.
MatrixValue parse_matrix(const json& v, const std::string& path) {
  std::vector<std::vector<Entry>> rows;
  if (v.is_array()) {
    if (v.empty()) fail(path, "empty matrix");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string rp = path + "/" + std::to_string(i);
      if (!v[i].is_array()) fail(rp, "expected a row list");
      std::vector<Entry> row;
      for (std::size_t j = 0; j < v[i].size(); ++j) row.push_back(parse_entry(v[i][j], rp + "/" + std::to_string(j)));
      rows.push_back(std::move(row));
    }
  } else {
    rows.push_back({parse_entry(v, path)});
  }
  const std::size_t n = rows.size();
  for (const auto& r : rows)
    if (r.size() != n) fail(path, "matrix must be square");
  if (n > static_cast<std::size_t>(kMaxDim)) fail(path, "dimension above 4");
  MatrixValue m;
  m.value.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  bool exact = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      m.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].value;
      exact = exact && rows[i][j].exact.has_value();
    }
  if (exact) {
    RationalMatrix q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *rows[i][j].exact;
    if (determinant<Rational>(q).is_zero()) fail(path, "singular matrix");
    m.exact = q;
  } else if (std::abs(m.value.determinant()) < 1e-14) {
    fail(path, "singular matrix");
  }
  return m;
}

RationalMatrix exact_matrix(const json& v, const std::string& path) {
  MatrixValue m = parse_matrix(v, path);
  if (!m.exact) fail(path, "exact rational entries required");
  return *m.exact;
}

Point parse_point(const json& v, const std::string& path) {
  if (v.is_number()) {
    Point p(1);
    p(0) = v.get<double>();
    return p;
  }
  if (!v.is_array() || v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) fail(path, "expected a point");
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<Eigen::Index>(i)) = parse_entry(v[i], path + "/" + std::to_string(i)).value;
  return p;
}

Generator parse_generator(const json& v, const std::string& path) {
  if (v.is_string()) {
    if (!builtin_from_name(v.get<std::string>())) fail(path, "unknown generator '" + v.get<std::string>() + "'");
    return builtin(v.get<std::string>());
  }
  check_keys(v, path, {"name", "params", "transforms", "tensor"});
  Generator g;
  if (v.contains("tensor")) {
    const json& t = v["tensor"];
    if (!t.is_array() || t.size() != 2) fail(path + "/tensor", "expected two generators");
    Generator g1 = parse_generator(t[0], path + "/tensor/0"), g2 = parse_generator(t[1], path + "/tensor/1");
    if (g1.dim() != 1 || g2.dim() != 1) fail(path + "/tensor", "tensor factors must be univariate");
    g = tensor(g1, g2);
  } else {
    const std::string name = need(v, "name", path).get<std::string>();
    if (!builtin_from_name(name)) {
      std::string all;
      for (const auto& n : builtin_names()) all += (all.empty() ? "" : ", ") + n;
      fail(path + "/name", "unknown generator '" + name + "' (available: " + all + ")");
    }
    BuiltinParams p;
    if (v.contains("params")) {
      const json& q = v["params"];
      const std::string pp = path + "/params";
      check_keys(q, pp, {"sigma", "order", "lo", "hi", "tau", "tail_eps", "amplitude"});
      p.sigma = get_or<double>(q, "sigma", pp, p.sigma);
      p.order = get_int(q, "order", pp, p.order);
      if (q.contains("lo")) p.lo = parse_point(q["lo"], pp + "/lo");
      if (q.contains("hi")) p.hi = parse_point(q["hi"], pp + "/hi");
      p.tau = get_or<std::int64_t>(q, "tau", pp, p.tau);
      p.tail_eps = get_or<double>(q, "tail_eps", pp, p.tail_eps);
      p.amplitude = get_or<double>(q, "amplitude", pp, p.amplitude);
    }
    try {
      g = builtin(name, p);
    } catch (const std::exception& ex) {
      fail(path + "/params", ex.what());
    }
  }
  if (v.contains("transforms")) {
    const json& ts = v["transforms"];
    if (!ts.is_array()) fail(path + "/transforms", "expected a list");
    TransformChain chain;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string tp = path + "/transforms/" + std::to_string(i);
      check_keys(ts[i], tp, {"dilate", "modulate", "phase"});
      if (ts[i].size() != 1) fail(tp, "exactly one of dilate, modulate, phase");
      if (ts[i].contains("dilate")) {
        MatrixValue m = parse_matrix(ts[i]["dilate"], tp + "/dilate");
        if (m.value.rows() != g.dim()) fail(tp + "/dilate", "dimension mismatch");
        chain.push_back(Dilate{SmallMatrix(m.value)});
      } else if (ts[i].contains("modulate")) {
        Point l = parse_point(ts[i]["modulate"], tp + "/modulate");
        if (l.size() != g.dim()) fail(tp + "/modulate", "dimension mismatch");
        chain.push_back(Modulate{l});
      } else {
        Point t = parse_point(ts[i]["phase"], tp + "/phase");
        if (t.size() != g.dim()) fail(tp + "/phase", "dimension mismatch");
        chain.push_back(Phase{t});
      }
    }
    g = framebound::apply(chain, g);
  }
  return g;
}

std::vector<Generator> parse_generators(const json& sys, const char* key, const std::string& path) {
  const json& v = need(sys, key, path);
  const std::string gp = path + "/" + key;
  if (!v.is_array() || v.empty()) fail(gp, "expected a non-empty list");
  std::vector<Generator> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(parse_generator(v[i], gp + "/" + std::to_string(i)));
  return out;
}

void require_dim(const std::vector<Generator>& gs, Eigen::Index d, const std::string& path) {
  for (const auto& g : gs)
    if (g.dim() != d) fail(path, "generator dimension " + std::to_string(g.dim()) + " does not match " + std::to_string(d));
}

SystemSpec build_nadic(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "N", "j_max", "ucp_asserted"});
  const int n = need_int(s, "N", p), jmax = need_int(s, "j_max", p);
  if (n < 2) fail(p + "/N", "N must be >= 2");
  if (jmax < 1) fail(p + "/j_max", "j_max must be >= 1");
  try {
    return nadic_counterexample(n, jmax).system;
  } catch (const std::invalid_argument& ex) {
    fail(p + "/j_max", ex.what());
  }
}

SystemSpec build_wavelet(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "dilation", "dilations", "lattice", "j_min", "j_max", "generators", "disjoint_certificate",
                    "ucp_asserted"});
  auto psi = parse_generators(s, "generators", p);
  if (s.contains("dilations")) {
    const json& ds = s["dilations"];
    if (!ds.is_array() || ds.empty()) fail(p + "/dilations", "expected a non-empty list");
    std::vector<RationalMatrix> list;
    for (std::size_t i = 0; i < ds.size(); ++i) list.push_back(exact_matrix(ds[i], p + "/dilations/" + std::to_string(i)));
    RationalMatrix c = exact_matrix(need(s, "lattice", p), p + "/lattice");
    require_dim(psi, c.rows(), p + "/generators");
    return wavelet_system(psi, list, c);
  }
  MatrixValue a = parse_matrix(need(s, "dilation", p), p + "/dilation");
  MatrixValue c = parse_matrix(need(s, "lattice", p), p + "/lattice");
  if (a.value.rows() != c.value.rows()) fail(p + "/lattice", "dimension mismatch with dilation");
  require_dim(psi, a.value.rows(), p + "/generators");
  Dilation dil;
  if (a.exact) dil.matrix = *a.exact; else dil.matrix = a.value;
  dil.disjoint_certificate = get_or<bool>(s, "disjoint_certificate", p, false);
  LatticeBasis gamma;
  if (c.exact) gamma = *c.exact; else gamma = c.value;
  const int jmin = need_int(s, "j_min", p), jmax = need_int(s, "j_max", p);
  if (jmin > jmax) fail(p + "/j_min", "empty scale range");
  try {
    return wavelet_system(psi, dil, gamma, jmin, jmax);
  } catch (const std::invalid_argument& ex) {
    fail(p + "/dilation", ex.what());
  }
}

SystemSpec build_gabor(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "translation", "modulation", "modulation_radius", "generators", "ucp_asserted"});
  auto g = parse_generators(s, "generators", p);
  RationalMatrix gamma = exact_matrix(need(s, "translation", p), p + "/translation");
  require_dim(g, gamma.rows(), p + "/generators");
  const json& m = need(s, "modulation", p);
  Modulations lambda;
  if (m.is_object()) {
    check_keys(m, p + "/modulation", {"nodes", "weights"});
    ModulationQuadrature q;
    const json& nodes = need(m, "nodes", p + "/modulation");
    const json& weights = need(m, "weights", p + "/modulation");
    if (!nodes.is_array() || !weights.is_array() || nodes.size() != weights.size() || nodes.empty())
      fail(p + "/modulation", "nodes and weights must be lists of equal length");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      q.nodes.push_back(parse_point(nodes[i], p + "/modulation/nodes/" + std::to_string(i)));
      const double w = weights[i].is_number() ? weights[i].get<double>() : -1;
      if (!(w > 0)) fail(p + "/modulation/weights/" + std::to_string(i), "weights must be positive numbers");
      q.weights.push_back(w);
    }
    lambda = q;
  } else {
    RationalMatrix lm = exact_matrix(m, p + "/modulation");
    if (lm.rows() != gamma.rows()) fail(p + "/modulation", "dimension mismatch with translation");
    lambda = lm;
  }
  try {
    return gabor_system(g, gamma, lambda, get_or<double>(s, "modulation_radius", p, -1.0));
  } catch (const std::invalid_argument& ex) {
    fail(p, ex.what());
  }
}

std::vector<RationalMatrix> matrix_list(const json& s, const char* key, const std::string& p) {
  const json& v = need(s, key, p);
  if (!v.is_array() || v.empty()) fail(p + "/" + key, "expected a non-empty list");
  std::vector<RationalMatrix> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(exact_matrix(v[i], p + "/" + key + "/" + std::to_string(i)));
  return out;
}

SystemSpec build_composite(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "a_list", "b_list", "lattice", "generators", "ucp_asserted"});
  auto psi = parse_generators(s, "generators", p);
  RationalMatrix c = exact_matrix(need(s, "lattice", p), p + "/lattice");
  require_dim(psi, c.rows(), p + "/generators");
  try {
    return composite_wavelet_system(psi, matrix_list(s, "a_list", p), matrix_list(s, "b_list", p), c);
  } catch (const std::invalid_argument& ex) {
    fail(p + "/a_list", ex.what());
  }
}

SystemSpec build_shearlet_classical(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "lattice", "j_min", "j_max", "k_min", "k_max", "generators", "ucp_asserted"});
  auto psi = parse_generators(s, "generators", p);
  RationalMatrix c = exact_matrix(get_or<json>(s, "lattice", p, json::array({json::array({1, 0}), json::array({0, 1})})),
                                  p + "/lattice");
  if (c.rows() != 2) fail(p + "/lattice", "shearlets live in dimension 2");
  require_dim(psi, 2, p + "/generators");
  const int jmin = need_int(s, "j_min", p), jmax = need_int(s, "j_max", p);
  const int kmin = need_int(s, "k_min", p), kmax = need_int(s, "k_max", p);
  if (jmin > jmax) fail(p + "/j_min", "empty scale range");
  if (kmin > kmax) fail(p + "/k_min", "empty shear range");
  return classical_shearlet_system(psi, c, jmin, jmax, kmin, kmax);
}

SystemSpec build_shearlet_cone(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "lattice", "j_max", "phi", "psi1", "psi2", "ucp_asserted"});
  RationalMatrix c = exact_matrix(get_or<json>(s, "lattice", p, json::array({json::array({1, 0}), json::array({0, 1})})),
                                  p + "/lattice");
  if (c.rows() != 2) fail(p + "/lattice", "shearlets live in dimension 2");
  Generator phi = parse_generator(need(s, "phi", p), p + "/phi");
  Generator psi1 = parse_generator(need(s, "psi1", p), p + "/psi1");
  Generator psi2 = parse_generator(need(s, "psi2", p), p + "/psi2");
  require_dim({phi, psi1, psi2}, 2, p);
  const int jmax = need_int(s, "j_max", p);
  if (jmax < 0 || jmax > 12) fail(p + "/j_max", "j_max must lie in [0, 12]");
  return cone_adapted_shearlet_system(phi, psi1, psi2, c, jmax);
}

SystemSpec build_continuous(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "family", "generator", "order", "alpha", "n_a", "n_r", "a_min", "a_max", "nodes", "cone",
                    "r_max", "ucp_asserted"});
  const std::string family = get_or<std::string>(s, "family", p, "single");
  Generator g = parse_generator(need(s, "generator", p), p + "/generator");
  if (family == "alpha_shearlet") {
    if (get_int(s, "order", p, 1) != 1) fail(p + "/order", "only first-order (l = 1) alpha-shearlets are supported");
    if (g.dim() != 2) fail(p + "/generator", "alpha-shearlet generator must be bivariate");
    AlphaShearletOptions o;
    o.alpha = get_or<double>(s, "alpha", p, o.alpha);
    o.n_a = get_int(s, "n_a", p, o.n_a);
    o.n_r = get_int(s, "n_r", p, o.n_r);
    o.a_min = get_or<double>(s, "a_min", p, o.a_min);
    o.cone = get_or<bool>(s, "cone", p, o.cone);
    o.r_max = get_or<double>(s, "r_max", p, o.r_max);
    if (!(o.alpha >= 0 && o.alpha <= 1)) fail(p + "/alpha", "alpha must lie in [0, 1]");
    if (o.n_a < 1 || o.n_r < 1) fail(p + "/n_a", "quadrature sizes must be positive");
    if (!(o.a_min > 0 && o.a_min < 1)) fail(p + "/a_min", "a_min must lie in (0, 1)");
    return alpha_shearlet_ti(g, o);
  }
  if (family == "wavelet") {
    if (g.dim() != 1) fail(p + "/generator", "continuous wavelet generator must be univariate");
    const double a_min = get_or<double>(s, "a_min", p, 1.0 / 64), a_max = get_or<double>(s, "a_max", p, 64.0);
    const int nodes = get_int(s, "nodes", p, 256);
    if (!(a_min > 0 && a_max > a_min)) fail(p + "/a_min", "require 0 < a_min < a_max");
    if (nodes < 1) fail(p + "/nodes", "nodes must be positive");
    return continuous_wavelet_ti(g, a_min, a_max, nodes);
  }
  if (family == "single") return continuous_ti_system({{g, 1.0}}, g.dim());
  fail(p + "/family", "expected alpha_shearlet, wavelet or single");
}

SystemSpec build_custom(const json& s, const std::string& p) {
  check_keys(s, p, {"type", "domain", "dim", "layers", "ucp_asserted"});
  const std::string domain = get_or<std::string>(s, "domain", p, "real");
  if (domain != "real" && domain != "integer") fail(p + "/domain", "expected real or integer");
  const int d = get_int(s, "dim", p, 1);
  if (d < 1 || d > kMaxDim) fail(p + "/dim", "dimension must lie in [1, 4]");
  if (domain == "integer" && d != 1) fail(p + "/dim", "integer systems are one-dimensional");
  const json& ls = need(s, "layers", p);
  if (!ls.is_array() || ls.empty()) fail(p + "/layers", "expected a non-empty list");
  SystemSpec sys;
  sys.label = "custom";
  sys.domain = domain == "real" ? Domain::real : Domain::integer;
  sys.dim = d;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const std::string lp = p + "/layers/" + std::to_string(i);
    check_keys(ls[i], lp, {"lattice", "modulus", "full", "generators", "weights", "label"});
    Layer l;
    if (ls[i].contains("modulus")) {
      if (sys.domain != Domain::integer) fail(lp + "/modulus", "modulus applies to integer systems");
      const int n = need_int(ls[i], "modulus", lp);
      if (n < 1) fail(lp + "/modulus", "modulus must be positive");
      l.group = TranslationGroup::modular(n);
      l.prefix = 1.0 / n;
    } else if (get_or<bool>(ls[i], "full", lp, false)) {
      l.group = TranslationGroup::full(d);
      l.prefix = 1.0;
    } else {
      if (sys.domain != Domain::real) fail(lp, "integer layers need a modulus");
      RationalMatrix c = exact_matrix(need(ls[i], "lattice", lp), lp + "/lattice");
      if (c.rows() != d) fail(lp + "/lattice", "dimension mismatch");
      LatticeQ lat(c);
      l.group = TranslationGroup::exact(lat);
      l.prefix = 1.0 / lat.covolume().to_double();
    }
    auto gs = parse_generators(ls[i], "generators", lp);
    require_dim(gs, d, lp + "/generators");
    std::vector<double> w(gs.size(), 1.0);
    if (ls[i].contains("weights")) {
      const json& wj = ls[i]["weights"];
      if (!wj.is_array() || wj.size() != gs.size()) fail(lp + "/weights", "one weight per generator");
      for (std::size_t k = 0; k < gs.size(); ++k) {
        w[k] = wj[k].is_number() ? wj[k].get<double>() : -1;
        if (!(w[k] > 0)) fail(lp + "/weights/" + std::to_string(k), "weights must be positive numbers");
      }
    }
    for (std::size_t k = 0; k < gs.size(); ++k) l.components.push_back({gs[k], w[k]});
    l.scale = static_cast<int>(i);
    l.label = get_or<std::string>(ls[i], "label", lp, "layer" + std::to_string(i));
    sys.layers.push_back(std::move(l));
  }
  return sys;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

RunConfig parse_run(const json& doc, const std::string& p, bool top) {
  if (top)
    check_keys(doc, p, {"schema", "name", "system", "grid", "truncation", "oracle", "output", "runs"});
  else
    check_keys(doc, p, {"name", "system", "grid", "truncation", "oracle", "output"});
  RunConfig cfg;
  cfg.raw = doc;
  cfg.name = get_or<std::string>(doc, "name", p, "run");
  if (cfg.name.empty() || cfg.name.find('/') != std::string::npos || cfg.name == "." || cfg.name == "..")
    fail(p + "/name", "name must be a non-empty file-name component");

  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    const std::string gp = p + "/grid";
    check_keys(g, gp, {"kind", "lo", "hi", "resolution", "refine", "refine_tolerance"});
    cfg.grid.kind = get_or<std::string>(g, "kind", gp, cfg.grid.kind);
    static const std::set<std::string> kinds = {"auto", "torus", "annulus", "fundamental", "band"};
    if (!kinds.count(cfg.grid.kind)) fail(gp + "/kind", "expected auto, torus, annulus, fundamental or band");
    for (const char* key : {"lo", "hi"}) {
      if (!g.contains(key)) continue;
      Point v = parse_point(g[key], gp + "/" + key);
      (key[0] == 'l' ? cfg.grid.lo : cfg.grid.hi).assign(v.data(), v.data() + v.size());
    }
    cfg.grid.resolution = get_int(g, "resolution", gp, cfg.grid.resolution);
    if (cfg.grid.resolution < 16) fail(gp + "/resolution", "resolution must be >= 16");
    cfg.grid.refine = get_or<bool>(g, "refine", gp, cfg.grid.refine);
    cfg.grid.refine_tolerance = get_or<double>(g, "refine_tolerance", gp, cfg.grid.refine_tolerance);
    if (!(cfg.grid.refine_tolerance > 0)) fail(gp + "/refine_tolerance", "must be positive");
  }

  if (doc.contains("truncation")) {
    const json& t = doc["truncation"];
    const std::string tp = p + "/truncation";
    check_keys(t, tp, {"alpha_radius", "max_points", "divergence_delta"});
    cfg.truncation.alpha_radius = get_or<double>(t, "alpha_radius", tp, kInf);
    if (!(cfg.truncation.alpha_radius > 0)) fail(tp + "/alpha_radius", "must be positive");
    cfg.truncation.max_points = get_or<std::size_t>(t, "max_points", tp, cfg.truncation.max_points);
    cfg.truncation.divergence_delta = get_or<double>(t, "divergence_delta", tp, cfg.truncation.divergence_delta);
    if (!(cfg.truncation.divergence_delta > 0)) fail(tp + "/divergence_delta", "must be positive");
  }

  if (doc.contains("oracle") && !doc["oracle"].is_null()) {
    const json& o = doc["oracle"];
    const std::string op = p + "/oracle";
    check_keys(o, op, {"method", "n", "rate", "radius", "resolution"});
    OracleConfig oc;
    oc.method = get_or<std::string>(o, "method", op, oc.method);
    if (oc.method != "discretize" && oc.method != "fiber") fail(op + "/method", "expected discretize or fiber");
    oc.n = get_int(o, "n", op, oc.n);
    if (oc.n < 2) fail(op + "/n", "n must be >= 2");
    oc.rate = get_or<double>(o, "rate", op, oc.rate);
    if (!(oc.rate > 0)) fail(op + "/rate", "rate must be positive");
    oc.radius = get_or<double>(o, "radius", op, oc.radius);
    oc.resolution = get_int(o, "resolution", op, oc.resolution);
    if (oc.resolution < 1) fail(op + "/resolution", "resolution must be positive");
    cfg.oracle = oc;
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    check_keys(o, p + "/output", {"dir"});
    cfg.output_dir = get_or<std::string>(o, "dir", p + "/output", cfg.output_dir);
  }

  if (top && doc.contains("runs")) {
    const json& runs = doc["runs"];
    if (!runs.is_array() || runs.empty()) fail(p + "/runs", "expected a non-empty list");
    json base = doc;
    base.erase("runs");
    base.erase("schema");
    std::set<std::string> names;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string rp = p + "/runs/" + std::to_string(i);
      if (!runs[i].is_object()) fail(rp, "expected an object");
      if (!runs[i].contains("name")) fail(rp + "/name", "sweep entries need a name");
      json merged = base;
      merged.merge_patch(runs[i]);
      RunConfig sub = parse_run(merged, rp, false);
      if (!names.insert(sub.name).second) fail(rp + "/name", "duplicate run name");
      cfg.runs.push_back(std::move(sub));
    }
    return cfg;
  }

  cfg.system = need(doc, "system", p);
  // Build once so that invalid systems surface as config errors with a field path.
  (void)build_system(cfg.system);
  return cfg;
}

std::string fmt(double x, int digits = 10) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string point_str(const Point& p) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) s += (i ? ", " : "") + fmt(p(i), 8);
  return s + ")";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string bounds_csv(const BoundsReport& r, int dim) {
  std::ostringstream os;
  for (int i = 0; i < dim; ++i) os << "omega" << (dim == 1 ? "" : std::to_string(i + 1)) << ',';
  os << "t0,R,R_abs,l2_norm\n";
  for (const auto& row : r.rows) {
    for (Eigen::Index i = 0; i < row.omega.size(); ++i) os << csv_number(row.omega(i)) << ',';
    os << csv_number(row.t0) << ',' << csv_number(row.R) << ',' << csv_number(row.R_abs) << ',' << csv_number(row.l2)
       << '\n';
  }
  return os.str();
}

std::string alpha_csv(const BoundsReport& r, int dim) {
  std::ostringstream os;
  for (int i = 0; i < dim; ++i) os << "alpha" << (dim == 1 ? "" : std::to_string(i + 1)) << ',';
  os << "sup_abs_t\n";
  for (const auto& a : r.alphas) {
    for (Eigen::Index i = 0; i < a.alpha.size(); ++i) os << csv_number(a.alpha(i)) << ',';
    os << csv_number(a.sup) << '\n';
  }
  return os.str();
}

const char* domain_name(Domain d) { return d == Domain::real ? "R^d" : "Z"; }

std::string report_text(const RunConfig& cfg, const SystemSpec& sys, const RunSummary& s, const std::string& reason) {
  const BoundsReport& r = s.report;
  std::ostringstream os;
  os << "framebound report: " << cfg.name << "\n";
  os << "system: " << sys.label << ", " << sys.layers.size() << " layers, dimension " << sys.dim << ", group "
     << domain_name(sys.domain) << "\n";
  os << "grid: " << r.grid << "\n";
  os << "alpha truncation: radius " << fmt(r.alpha_radius) << ", " << r.alpha_count << " annihilator points with t_alpha in play"
     << (r.truncated ? " (truncated)" : "") << "\n\n";

  os << "estimate  value              coarse             where\n";
  auto line = [&](const char* name, const Estimate& e) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-9s %-18s %-18s %s%s\n", name, fmt(e.value(), 12).c_str(), fmt(e.coarse, 12).c_str(),
                  e.where.size() ? point_str(e.where).c_str() : "-", e.sentinel ? "  [divergence sentinel]" : "");
    os << buf;
  };
  line("A1", r.A1);
  line("B1", r.B1);
  line("B2", r.B2);
  line("Ainf", r.Ainf);
  line("A'", r.Aprime);
  line("B'", r.Bprime);
  os << "\nchain A1 <= Ainf <= B2 <= B1: " << (r.chain_ok ? "holds" : "violated") << "\n";
  os << "tight: " << (r.tight ? "yes, A = B = " + fmt(*r.tight, 12) : std::string("no")) << "\n";
  os << "divergence: R " << (r.divergent_R ? "yes" : "no") << ", R_abs " << (r.divergent_R_abs ? "yes" : "no")
     << ", l2 " << (r.divergent_l2 ? "yes" : "no") << "\n";
  os << "refinement converged: " << (r.refinement_converged ? "yes" : "no") << "\n";
  if (r.tail > 0) os << "omitted-layer tail bound: " << fmt(r.tail) << "\n";

  if (sys.layers.size() == 1 && sys.layers[0].group.kind() == TranslationGroup::Kind::full) {
    const bool frame = r.Ainf.value() > 0 && std::isfinite(r.B1.value());
    os << "continuous TI frame verdict on the grid: " << (frame ? "frame" : "not a frame") << " (ess inf t0 = "
       << fmt(r.Ainf.value()) << ", ess sup t0 = " << fmt(r.B1.value()) << ")\n";
  }

  if (s.oracle) {
    os << "\noracle: " << s.oracle->method << "\n";
    os << "A_opt = " << fmt(s.oracle->A, 12) << "\nB_opt = " << fmt(s.oracle->B, 12) << "\nresidual = "
       << fmt(s.oracle->residual, 3) << "\n";
  }
  if (s.verdict) {
    os << "snug chain A1 <= A_opt <= Ainf <= B2 <= B_opt <= B1: " << s.verdict->summary << "\n";
    for (const auto& v : s.verdict->violations) os << "  violation: " << v << "\n";
  }
  if (!r.notes.empty()) {
    os << "\nnotes:\n";
    for (const auto& n : r.notes) os << "- " << n << "\n";
  }
  os << "\nexit: " << s.code << " (" << reason << ")\n";
  return os.str();
}

std::string oracle_csv(const OptimalBounds& ob, const std::optional<FiberBounds>& fb) {
  std::ostringstream os;
  os << "quantity,value\n";
  os << "A_opt," << csv_number(ob.A) << "\nB_opt," << csv_number(ob.B) << "\nresidual," << csv_number(ob.residual)
     << "\n";
  if (fb) {
    os << "A_half_window," << csv_number(fb->A_half) << "\nB_half_window," << csv_number(fb->B_half) << "\nwindow,"
       << fb->window << "\n";
  }
  return os.str();
}

}  // namespace

std::string csv_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

SystemSpec build_system(const json& s) {
  const std::string p = "/system";
  if (!s.is_object()) fail(p, "expected an object");
  const std::string type = need(s, "type", p).is_string() ? s["type"].get<std::string>() : "";
  SystemSpec sys;
  try {
    if (type == "nadic") sys = build_nadic(s, p);
    else if (type == "wavelet") sys = build_wavelet(s, p);
    else if (type == "gabor") sys = build_gabor(s, p);
    else if (type == "composite") sys = build_composite(s, p);
    else if (type == "shearlet_classical") sys = build_shearlet_classical(s, p);
    else if (type == "shearlet_cone") sys = build_shearlet_cone(s, p);
    else if (type == "continuous_ti") sys = build_continuous(s, p);
    else if (type == "custom_layers") sys = build_custom(s, p);
    else
      fail(p + "/type",
           "expected nadic, wavelet, gabor, composite, shearlet_classical, shearlet_cone, continuous_ti or custom_layers");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    fail(p, ex.what());
  }
  sys.ucp_asserted = get_or<bool>(s, "ucp_asserted", p, false);
  return sys;
}

Grid build_grid(const SystemSpec& sys, const GridConfig& g) {
  const int n = g.resolution;
  std::string kind = g.kind;
  if (kind == "auto") {
    if (sys.domain == Domain::integer) kind = "torus";
    else if (sys.period) kind = "fundamental";
    else if (sys.nesting) kind = "annulus";
    else if (!g.lo.empty()) kind = "band";
    else fail("/grid", "no natural domain for this system; give kind \"band\" with lo and hi");
  }
  if (kind == "torus") {
    if (sys.domain != Domain::integer) fail("/grid/kind", "torus grids apply to systems on Z");
    return Grid::torus(n);
  }
  if (sys.domain == Domain::integer) fail("/grid/kind", "systems on Z use the torus grid");
  if (kind == "fundamental") {
    if (!sys.period) fail("/grid/kind", "fundamental domain needs a modulation lattice");
    return Grid::fundamental_domain(to_double(*sys.period), n);
  }
  if (kind == "annulus") {
    if (!sys.nesting) fail("/grid/kind", "annulus grids need an expanding nested dilation");
    return Grid::dilation_annulus(to_double(sys.nesting->B), n);
  }
  if (g.lo.size() != static_cast<std::size_t>(sys.dim) || g.hi.size() != static_cast<std::size_t>(sys.dim))
    fail("/grid/lo", "band needs lo and hi of the system dimension");
  Point lo(sys.dim), hi(sys.dim);
  for (int i = 0; i < sys.dim; ++i) {
    lo(i) = g.lo[static_cast<std::size_t>(i)];
    hi(i) = g.hi[static_cast<std::size_t>(i)];
    if (!(hi(i) > lo(i))) fail("/grid/hi", "band must have hi > lo in every coordinate");
  }
  return Grid::box(lo, hi, std::vector<int>(static_cast<std::size_t>(sys.dim), n), 0.5);
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("", "configuration must be a JSON object");
  auto it = doc.find("schema");
  if (it == doc.end()) fail("/schema", "missing required field");
  if (!it->is_string() || it->get<std::string>() != kSchema)
    fail("/schema", std::string("unsupported schema (expected \"") + kSchema + "\")");
  return parse_run(doc, "", true);
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    auto [line, col] = line_column(text, ex.byte == 0 ? 0 : ex.byte - 1);
    fail("", "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + ex.what());
  }
  return parse_config(doc);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------- scenarios

namespace {

json gen(const char* name) { return json{{"name", name}}; }

json wavelet_1d(const char* generator, int jmin, int jmax) {
  return json{{"type", "wavelet"},   {"dilation", "2"}, {"lattice", "1"},
              {"j_min", jmin},       {"j_max", jmax},   {"generators", json::array({gen(generator)})}};
}

json base(const std::string& name) { return json{{"schema", kSchema}, {"name", name}, {"output", {{"dir", "out/" + name}}}}; }

json scenario_doc(const std::string& name) {
  json d = base(name);
  if (name == "nadic2" || name == "nadic3") {
    const bool two = name == "nadic2";
    d["system"] = {{"type", "nadic"}, {"N", two ? 2 : 3}, {"j_max", two ? 12 : 8}};
    d["grid"] = {{"kind", "torus"}, {"resolution", 64}};
    d["oracle"] = {{"method", "discretize"}, {"n", 4096}};
  } else if (name == "meyer" || name == "shannon") {
    d["system"] = wavelet_1d(name == "meyer" ? "meyer_wavelet_hat" : "shannon_wavelet_hat", -12, 12);
    d["grid"] = {{"kind", "annulus"}, {"resolution", 256}};
    d["oracle"] = {{"method", "discretize"}, {"n", 512}, {"rate", 8}};
  } else if (name == "haar_tchamitchian") {
    d["system"] = {{"type", "wavelet"},
                   {"dilation", "2"},
                   {"lattice", "1"},
                   {"j_min", -10},
                   {"j_max", 10},
                   {"generators", json::array({{{"name", "haar_wavelet_hat"}, {"params", {{"tail_eps", 1e-3}}}}})}};
    d["grid"] = {{"kind", "annulus"}, {"resolution", 128}};
    d["truncation"] = {{"alpha_radius", 256}};
    d["runs"] = json::array({{{"name", "c=0.5"}, {"system", {{"lattice", "1/2"}}}},
                             {{"name", "c=1"}, {"system", {{"lattice", "1"}}}},
                             {{"name", "c=2"}, {"system", {{"lattice", "2"}}}}});
  } else if (name == "gabor_gauss") {
    d["system"] = {{"type", "gabor"},
                   {"translation", "1/2"},
                   {"modulation", "1/2"},
                   {"modulation_radius", 12},
                   {"generators", json::array({{{"name", "gaussian_hat"}, {"params", {{"sigma", 1}}}}})}};
    d["grid"] = {{"kind", "fundamental"}, {"resolution", 64}};
    d["oracle"] = {{"method", "fiber"}, {"resolution", 32}};
  } else if (name == "shearlet_classical") {
    d["system"] = {{"type", "shearlet_classical"},
                   {"lattice", {{1, 0}, {0, 1}}},
                   {"j_min", -2},
                   {"j_max", 2},
                   {"k_min", -4},
                   {"k_max", 4},
                   {"generators", json::array({gen("shearlet_hat")})}};
    d["grid"] = {{"kind", "band"}, {"lo", {0.5, -0.5}}, {"hi", {1.0, 0.5}}, {"resolution", 32}};
  } else if (name == "shearlet_cone") {
    d["system"] = {{"type", "shearlet_cone"},
                   {"lattice", {{1, 0}, {0, 1}}},
                   {"j_max", 4},
                   {"phi", {{"tensor", json::array({gen("meyer_scaling_hat"), gen("meyer_scaling_hat")})}}},
                   {"psi1", gen("shearlet_hat")},
                   {"psi2", {{"name", "shearlet_hat"}, {"transforms", json::array({{{"dilate", {{0, 1}, {1, 0}}}}})}}}};
    d["grid"] = {{"kind", "band"}, {"lo", {-2, -2}}, {"hi", {2, 2}}, {"resolution", 32}};
  } else if (name == "bendlet_ti") {
    d["system"] = {{"type", "continuous_ti"}, {"family", "alpha_shearlet"}, {"order", 1},
                   {"alpha", 0.5},            {"n_a", 48},                  {"n_r", 48},
                   {"a_min", 1.0 / 64},       {"generator", gen("shearlet_hat")}};
    d["grid"] = {{"kind", "band"}, {"lo", {2, -1}}, {"hi", {4, 1}}, {"resolution", 32}};
  } else {
    std::string all;
    for (const auto& n : scenario_names()) all += (all.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown scenario '" + name + "' (available: " + all + ")");
  }
  return d;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"nadic2", "nadic3", "meyer", "shannon", "haar_tchamitchian", "gabor_gauss", "shearlet_classical",
          "shearlet_cone", "bendlet_ti"};
}

RunConfig scenario(const std::string& name) { return parse_config(scenario_doc(name)); }

// ---------------------------------------------------------------------- run

RunSummary run_single(const RunConfig& cfg, const std::string& out_dir, unsigned threads, std::ostream& log) {
  const SystemSpec sys = build_system(cfg.system);
  const Grid grid = build_grid(sys, cfg.grid);

  BoundsOptions bo;
  bo.refine = cfg.grid.refine;
  bo.refine_tolerance = cfg.grid.refine_tolerance;
  bo.threads = threads;
  RunSummary s;
  try {
    s.report = bounds(sys, grid, cfg.truncation, bo);
  } catch (const std::domain_error& ex) {
    fail("/grid", ex.what());
  }

  std::optional<FiberBounds> fb;
  if (cfg.oracle) {
    const OracleConfig& o = *cfg.oracle;
    try {
      if (o.method == "fiber") {
        const Grid fg = sys.period ? Grid::fundamental_domain(to_double(*sys.period), o.resolution) : grid;
        fb = fiber_bounds(sys, fg, o.radius, threads);
        s.oracle = OptimalBounds{fb->A, fb->B, std::max(std::abs(fb->A - fb->A_half), std::abs(fb->B - fb->B_half)),
                                 "fiber (dual Gramian, " + std::to_string(fb->window) + " indices)"};
      } else {
        s.oracle = optimal_bounds(discretize(sys, o.n, o.rate));
      }
    } catch (const std::invalid_argument& ex) {
      fail("/oracle", ex.what());
    }
    s.verdict = verify_chain(s.report, *s.oracle);
  }

  std::string reason = "ok";
  if (s.report.divergent_R || s.report.divergent_l2) {
    s.code = kDivergent;
    reason = "divergence sentinel";
  } else if (!s.report.chain_ok || (s.verdict && !s.verdict->ok)) {
    s.code = kChainViolation;
    reason = "chain violation";
  }

  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "report.txt", report_text(cfg, sys, s, reason));
  write_file(dir / "bounds.csv", bounds_csv(s.report, sys.dim));
  write_file(dir / "t_alpha.csv", alpha_csv(s.report, sys.dim));
  if (s.oracle) write_file(dir / "oracle.csv", oracle_csv(*s.oracle, fb));

  log << cfg.name << ": A1=" << fmt(s.report.A1.value()) << " B1=" << fmt(s.report.B1.value())
      << " B2=" << fmt(s.report.B2.value()) << " Ainf=" << fmt(s.report.Ainf.value());
  if (s.oracle) log << " A_opt=" << fmt(s.oracle->A) << " B_opt=" << fmt(s.oracle->B);
  log << " -> " << reason << " (" << dir.string() << ")\n";
  return s;
}

int run(const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  const std::string out = opt.out_dir.value_or(cfg.output_dir);
  if (cfg.runs.empty()) return run_single(cfg, out, opt.threads, log).code;
  int code = kOk;
  for (const auto& r : cfg.runs) {
    const int c = run_single(r, (std::filesystem::path(out) / r.name).string(), opt.threads, log).code;
    code = std::max(code, c);
  }
  return code;
}

}  // namespace framebound
