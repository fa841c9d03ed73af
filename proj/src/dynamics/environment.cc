#include "oshield/dynamics/environment.h"

#include "oshield/errors.h"

namespace oshield::dyn {

bool SafeRegion::polytope_contains(const Vec& x) const {
  for (int i = 0; i < rows(); ++i) {
    if (!(a.row(i).dot(x) <= b(i))) return false;
  }
  return true;
}

bool SafeRegion::disks_clear(const Vec& x) const {
  for (const DiskExclusion& d : disks) {
    const double dx = x(d.ix) - d.center.x();
    const double dy = x(d.iy) - d.center.y();
    if (!(dx * dx + dy * dy >= d.radius * d.radius)) return false;
  }
  return true;
}

Vec Environment::clamp_action(const Vec& u) const {
  if (u.size() != action_dim()) throw InputError("action has wrong dimension");
  Vec out(u.size());
  for (int i = 0; i < u.size(); ++i) {
    // NaN maps to the lower bound so a broken policy still yields a finite action.
    double v = u(i);
    if (!(v >= action_low()(i))) v = action_low()(i);
    if (v > action_high()(i)) v = action_high()(i);
    out(i) = v;
  }
  return out;
}

Vec Environment::step(const Vec& x, const Vec& u, bool use_surrogate) const {
  if (x.size() != state_dim()) throw InputError("state has wrong dimension");
  const Vec uc = clamp_action(u);
  Vec next = (use_surrogate && has_surrogate()) ? surrogate_step(x, uc) : true_step(x, uc);
  if (!next.allFinite()) throw NumericError("non-finite state after step");
  return next;
}

Vec Environment::surrogate_step(const Vec&, const Vec&) const {
  throw InputError(name() + " has no polynomial surrogate");
}

}  // namespace oshield::dyn
