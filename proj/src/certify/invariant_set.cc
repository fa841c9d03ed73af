#include "oshield/certify/invariant_set.h"

#include "oshield/errors.h"

namespace oshield::certify {

std::string method_name(Method m) { return m == Method::kSos ? "sos" : "exact_linear"; }

Method parse_method(const std::string& s) {
  if (s == "sos") return Method::kSos;
  if (s == "exact_linear") return Method::kExactLinear;
  throw ConfigError("unknown certificate method '" + s + "'");
}

bool InvariantSet::contains(const Vec& x) const {
  if (x.size() != controller.target.x.size()) throw InputError("state has wrong dimension");
  if (!(value(x) <= epsilon)) return false;
  if (manifold.rows() > 0) {
    const Vec off = manifold * (x - controller.target.x);
    if (!(off.cwiseAbs().maxCoeff() <= manifold_tol)) return false;
  }
  return true;
}

InvariantSet InvariantSet::recentred(const dyn::Recentering& map) const {
  InvariantSet out = *this;
  out.controller = controller.recentred(map);
  if (!map.rotation.isIdentity(0.0)) {
    out.v = Polynomial::quadratic(out.controller.p, Vec::Zero(out.controller.p.rows()), 0.0);
    if (manifold.rows() > 0) out.manifold = manifold * map.rotation.transpose();
  }
  return out;
}

InvariantSet make_invariant_set(const lqr::LqrController& ctrl, double epsilon, Method method) {
  InvariantSet s;
  s.controller = ctrl;
  s.v = Polynomial::quadratic(ctrl.p, Vec::Zero(ctrl.p.rows()), 0.0);
  s.epsilon = epsilon;
  s.method = method;
  return s;
}

}  // namespace oshield::certify
