#include "oshield/certify/certificate_io.h"

#include <fstream>

#include "oshield/errors.h"

namespace oshield::certify {
namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) throw ConfigError("ragged matrix");
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json basis_to_json(const Basis& b) {
  json out = json::array();
  for (const Exponent& e : b) out.push_back(std::vector<int>(e.begin(), e.end()));
  return out;
}

Basis basis_from_json(const json& j) {
  Basis b;
  for (const json& e : j) {
    Exponent ex;
    for (int k : e.get<std::vector<int>>()) {
      if (k < 0 || k > 255) throw ConfigError("exponent out of range");
      ex.push_back(static_cast<std::uint8_t>(k));
    }
    b.push_back(std::move(ex));
  }
  return b;
}

json blocks_to_json(const std::vector<GramBlock>& blocks) {
  json out = json::array();
  for (const GramBlock& g : blocks) out.push_back({{"basis", basis_to_json(g.basis)}, {"matrix", mat_to_json(g.gram)}});
  return out;
}

std::vector<GramBlock> blocks_from_json(const json& j) {
  std::vector<GramBlock> out;
  for (const json& g : j) out.push_back({basis_from_json(g.at("basis")), mat_from_json(g.at("matrix"))});
  return out;
}

json proof_to_json(const SosProof& p) {
  json mults = json::array();
  for (const Polynomial& m : p.multipliers) mults.push_back(polynomial_to_json(m));
  json mgrams = json::array();
  for (const auto& mg : p.multiplier_grams) mgrams.push_back(blocks_to_json(mg));
  return {{"name", p.name},
          {"polynomial", polynomial_to_json(p.polynomial)},
          {"multipliers", mults},
          {"multiplier_grams", mgrams},
          {"grams", blocks_to_json(p.grams)},
          {"min_eigenvalue", p.min_eigenvalue},
          {"residual", p.residual}};
}

SosProof proof_from_json(const json& j) {
  SosProof p;
  p.name = j.at("name").get<std::string>();
  p.polynomial = polynomial_from_json(j.at("polynomial"));
  for (const json& m : j.at("multipliers")) p.multipliers.push_back(polynomial_from_json(m));
  for (const json& mg : j.at("multiplier_grams")) p.multiplier_grams.push_back(blocks_from_json(mg));
  p.grams = blocks_from_json(j.at("grams"));
  p.min_eigenvalue = j.at("min_eigenvalue").get<double>();
  p.residual = j.at("residual").get<double>();
  if (const std::string err = check_proof(p); !err.empty()) {
    throw ConfigError("certificate proof '" + p.name + "' rejected: " + err);
  }
  return p;
}

}  // namespace

json polynomial_to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [e, c] : p.terms()) terms.push_back({std::vector<int>(e.begin(), e.end()), c});
  return {{"dim", p.dimension()}, {"terms", terms}};
}

Polynomial polynomial_from_json(const json& j) {
  const int dim = j.at("dim").get<int>();
  Polynomial p(dim);
  for (const json& t : j.at("terms")) {
    const Basis b = basis_from_json(json::array({t.at(0)}));
    if (static_cast<int>(b[0].size()) != dim) throw ConfigError("polynomial term has wrong dimension");
    p.add_term(b[0], t.at(1).get<double>());
  }
  return p;
}

json to_json(const InvariantSet& set, const std::string& env, const std::string& variant) {
  const lqr::LqrController& c = set.controller;
  json j;
  j["format"] = "oshield-certificate";
  j["version"] = 1;
  j["env"] = env;
  j["variant"] = variant;
  j["method"] = method_name(set.method);
  j["epsilon"] = set.epsilon;
  j["target"] = {{"x", vec_to_json(c.target.x)}, {"u", vec_to_json(c.target.u)}};
  j["K"] = mat_to_json(c.k);
  j["P"] = mat_to_json(c.p);
  j["Q"] = mat_to_json(c.q);
  j["R"] = mat_to_json(c.r);
  j["spectral_radius"] = c.spectral_radius;
  if (c.reduced) {
    const lqr::ReducedModel& r = *c.reduced;
    j["reduced"] = {{"a", mat_to_json(r.a)},           {"b", mat_to_json(r.b)},
                    {"p", mat_to_json(r.p)},           {"k", mat_to_json(r.k)},
                    {"project", mat_to_json(r.project)}, {"lift_action", mat_to_json(r.lift_action)},
                    {"manifold", mat_to_json(r.manifold)}, {"embed", mat_to_json(r.embed)},
                    {"rotation", mat_to_json(r.rotation)}};
  } else {
    j["reduced"] = nullptr;
  }
  j["manifold"] = mat_to_json(set.manifold);
  if (set.certificate) {
    const SosCertificate& cert = *set.certificate;
    json mu = json::array();
    for (const Polynomial& m : cert.mu) mu.push_back(polynomial_to_json(m));
    json safety = json::array();
    for (const SosProof& p : cert.safety) safety.push_back(proof_to_json(p));
    j["certificate"] = {{"epsilon", cert.epsilon},
                        {"multiplier_degree", cert.multiplier_degree},
                        {"safety_multiplier_degree", cert.safety_multiplier_degree},
                        {"scaling", mat_to_json(cert.scaling)},
                        {"lambda", polynomial_to_json(cert.lambda)},
                        {"mu", mu},
                        {"decrease", proof_to_json(cert.decrease)},
                        {"safety", safety}};
  } else {
    j["certificate"] = nullptr;
  }
  return j;
}

LoadedCertificate certificate_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "oshield-certificate") throw ConfigError("not a certificate file");
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported certificate version");
    LoadedCertificate out;
    out.env = j.at("env").get<std::string>();
    out.variant = j.at("variant").get<std::string>();
    lqr::LqrController c;
    c.target.x = vec_from_json(j.at("target").at("x"));
    c.target.u = vec_from_json(j.at("target").at("u"));
    c.k = mat_from_json(j.at("K"));
    c.p = mat_from_json(j.at("P"));
    c.q = mat_from_json(j.at("Q"));
    c.r = mat_from_json(j.at("R"));
    c.spectral_radius = j.at("spectral_radius").get<double>();
    if (!j.at("reduced").is_null()) {
      const json& r = j.at("reduced");
      c.reduced = lqr::ReducedModel{mat_from_json(r.at("a")),        mat_from_json(r.at("b")),
                                    mat_from_json(r.at("p")),        mat_from_json(r.at("k")),
                                    mat_from_json(r.at("project")),  mat_from_json(r.at("lift_action")),
                                    mat_from_json(r.at("manifold")), mat_from_json(r.at("embed")),
                                    mat_from_json(r.at("rotation"))};
    }
    const int n = static_cast<int>(c.target.x.size());
    if (c.p.rows() != n || c.p.cols() != n || c.k.cols() != n || c.k.rows() != c.target.u.size()) {
      throw ConfigError("certificate matrices do not match the target dimension");
    }
    const double eps = j.at("epsilon").get<double>();
    if (!(eps >= 0.0)) throw ConfigError("certificate epsilon must be non-negative");
    out.set = make_invariant_set(c, eps, parse_method(j.at("method").get<std::string>()));
    const Mat manifold = mat_from_json(j.at("manifold"));
    if (manifold.rows() > 0) out.set.manifold = manifold;
    if (!j.at("certificate").is_null()) {
      const json& cj = j.at("certificate");
      SosCertificate cert;
      cert.epsilon = cj.at("epsilon").get<double>();
      cert.multiplier_degree = cj.at("multiplier_degree").get<int>();
      cert.safety_multiplier_degree = cj.at("safety_multiplier_degree").get<int>();
      cert.scaling = mat_from_json(cj.at("scaling"));
      cert.lambda = polynomial_from_json(cj.at("lambda"));
      for (const json& m : cj.at("mu")) cert.mu.push_back(polynomial_from_json(m));
      cert.decrease = proof_from_json(cj.at("decrease"));
      for (const json& p : cj.at("safety")) cert.safety.push_back(proof_from_json(p));
      if (cert.epsilon != eps) throw ConfigError("certificate epsilon does not match the set");
      out.set.certificate = std::make_shared<const SosCertificate>(std::move(cert));
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed certificate: ") + e.what());
  }
}

void save_certificate(const std::string& path, const InvariantSet& set, const std::string& env,
                      const std::string& variant) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << to_json(set, env, variant).dump(1) << '\n';
  if (!f) throw IoError("write failed for " + path);
}

LoadedCertificate load_certificate(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return certificate_from_json(j);
}

}  // namespace oshield::certify
