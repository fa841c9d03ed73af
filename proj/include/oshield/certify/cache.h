#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "oshield/certify/verify.h"

namespace oshield::certify {

struct CacheOptions {
  lqr::LqrOptions lqr;
  VerifyConfig verify;
};

// One verified controller at a canonical target. For environments with a
// linear reduction only the controller is stored; epsilon depends on the
// world-frame obstacles and is recomputed per query in closed form.
struct CacheEntry {
  bool ok = false;
  bool exact = false;
  InvariantSet set;  // canonical frame
};

// Verified sets keyed by environment, safe region and canonical target.
// Readers share a lock; a miss verifies outside the lock and the first
// inserted result wins. One cache serves one environment configuration.
class CertificateCache {
 public:
  explicit CertificateCache(CacheOptions opts = {});

  std::shared_ptr<const CacheEntry> canonical(const dyn::Environment& env,
                                              const dyn::CanonicalTarget& c);
  // World-frame set for target t, empty when t cannot be stabilized/verified.
  std::optional<InvariantSet> set_for(const dyn::Environment& env, const dyn::Target& t);

  // Seeds the cache with a canonical set (e.g. loaded from disk).
  void insert(const dyn::Environment& env, const dyn::CanonicalTarget& c, const InvariantSet& set);

  std::size_t size() const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  const CacheOptions& options() const { return opts_; }

 private:
  std::string key(const dyn::Environment& env, const dyn::CanonicalTarget& c) const;

  CacheOptions opts_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const CacheEntry>> map_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

struct Stability {
  bool stable = false;
  std::optional<InvariantSet> set;
};

// x is stable when it lies in the verified set of its own target rho(x).
Stability is_stable(const Vec& x, const dyn::Environment& env, CertificateCache& cache);
// Same verdict without materializing the world-frame set.
bool is_stable_fast(const Vec& x, const dyn::Environment& env, CertificateCache& cache);

}  // namespace oshield::certify
