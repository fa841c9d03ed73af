#pragma once

// Certificate files are JSON:
//
//   format            "oshield-certificate", version 1
//   env, variant      environment the set was verified for
//   method            "sos" | "exact_linear"
//   epsilon           sublevel value
//   target            {x: [...], u: [...]}
//   K, P, Q, R        row-major nested arrays
//   spectral_radius   of the linearized closed loop
//   reduced           null or {a, b, p, k, project, lift_action, manifold, embed, rotation}
//   manifold          world rows that must vanish on x - x~ ([] if none)
//   certificate       null or {
//       epsilon, multiplier_degree, safety_multiplier_degree,
//       scaling      (x - x~ = scaling * y),
//       lambda, mu   polynomials in y,
//       decrease     proof, safety: [proof] }
//
// A polynomial is {dim, terms: [[exponents], coefficient]...}; a proof is
// {name, polynomial, multipliers, multiplier_grams, grams, min_eigenvalue,
// residual} and each Gram block is {basis: [[exponents]...], matrix}.
// Loading re-checks every proof and rejects files that fail.

#include <string>

#include <json.hpp>

#include "oshield/certify/invariant_set.h"

namespace oshield::certify {

nlohmann::json polynomial_to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);

nlohmann::json to_json(const InvariantSet& set, const std::string& env, const std::string& variant);

struct LoadedCertificate {
  std::string env;
  std::string variant;
  InvariantSet set;
};

LoadedCertificate certificate_from_json(const nlohmann::json& j);

void save_certificate(const std::string& path, const InvariantSet& set, const std::string& env,
                      const std::string& variant);
LoadedCertificate load_certificate(const std::string& path);

}  // namespace oshield::certify
