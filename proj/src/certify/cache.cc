#include "oshield/certify/cache.h"

#include <cstring>
#include <mutex>

namespace oshield::certify {
namespace {

void append(std::string& s, const double* data, Eigen::Index n) {
  const std::size_t at = s.size();
  s.resize(at + n * sizeof(double));
  std::memcpy(s.data() + at, data, n * sizeof(double));
}

}  // namespace

CertificateCache::CertificateCache(CacheOptions opts) : opts_(std::move(opts)) {}

std::string CertificateCache::key(const dyn::Environment& env, const dyn::CanonicalTarget& c) const {
  std::string k = env.name();
  k += '|';
  k += env.variant();
  k += '|';
  const dyn::SafeRegion& safe = env.safe_region();
  append(k, safe.a.data(), safe.a.size());
  append(k, safe.b.data(), safe.b.size());
  if (!env.linear_reduction()) {
    k += '|';
    append(k, c.target.x.data(), c.target.x.size());
    append(k, c.target.u.data(), c.target.u.size());
  }
  return k;
}

std::shared_ptr<const CacheEntry> CertificateCache::canonical(const dyn::Environment& env,
                                                              const dyn::CanonicalTarget& c) {
  const std::string k = key(env, c);
  {
    std::shared_lock lock(mu_);
    auto it = map_.find(k);
    if (it != map_.end()) {
      ++hits_;
      return it->second;
    }
  }
  ++misses_;
  auto entry = std::make_shared<CacheEntry>();
  entry->exact = env.linear_reduction().has_value();
  if (auto ctrl = lqr::lqr_control(env, c.target, opts_.lqr)) {
    if (entry->exact) {
      entry->set = make_invariant_set(*ctrl, 0.0, Method::kExactLinear);
      entry->ok = true;
    } else if (auto set = lqr_verify(env, *ctrl, opts_.verify)) {
      entry->set = std::move(*set);
      entry->ok = true;
    }
  }
  std::unique_lock lock(mu_);
  auto [it, inserted] = map_.emplace(k, std::move(entry));
  return it->second;
}

std::optional<InvariantSet> CertificateCache::set_for(const dyn::Environment& env,
                                                      const dyn::Target& t) {
  const dyn::CanonicalTarget c = env.canonicalize(t);
  const auto e = canonical(env, c);
  if (!e->ok) return std::nullopt;
  if (e->exact) {
    lqr::LqrController ctrl = e->set.controller.recentred(c.map);
    ctrl.target = t;
    return exact_linear_invariant(ctrl, env.safe_region(), env.action_low(), env.action_high());
  }
  return e->set.recentred(c.map);
}

void CertificateCache::insert(const dyn::Environment& env, const dyn::CanonicalTarget& c,
                              const InvariantSet& set) {
  auto entry = std::make_shared<CacheEntry>();
  entry->ok = true;
  entry->exact = set.method == Method::kExactLinear;
  entry->set = set;
  std::unique_lock lock(mu_);
  map_[key(env, c)] = std::move(entry);
}

std::size_t CertificateCache::size() const {
  std::shared_lock lock(mu_);
  return map_.size();
}

Stability is_stable(const Vec& x, const dyn::Environment& env, CertificateCache& cache) {
  Stability s;
  s.set = cache.set_for(env, env.lqr_target(x));
  s.stable = s.set && s.set->contains(x);
  return s;
}

bool is_stable_fast(const Vec& x, const dyn::Environment& env, CertificateCache& cache) {
  const dyn::Target t = env.lqr_target(x);
  const dyn::CanonicalTarget c = env.canonicalize(t);
  const auto e = cache.canonical(env, c);
  if (!e->ok) return false;
  if (e->exact) {
    lqr::LqrController ctrl = e->set.controller.recentred(c.map);
    ctrl.target = t;
    return exact_linear_invariant(ctrl, env.safe_region(), env.action_low(), env.action_high())
        .contains(x);
  }
  return e->set.contains(c.map.to_canonical(x));
}

}  // namespace oshield::certify
