#pragma once

#include <cstdint>

#include "topocb/analysis.hpp"

namespace topocb {

/// Reference spaces with documented analysis outcomes. Tests re-derive every
/// documented property through the brute-force oracle; nothing is trusted
/// from the description alone.
struct CatalogueSpace {
  std::string name;
  SpacePresentation presentation;
  std::string notes;
};

/// Full binary branching at constant separation 1: the discrete-metric
/// Cantor space.
CatalogueSpace makeMaximalCantor();

/// Binary branching with both edges scaled by lambda in (0, 1): distances
/// and cylinder diameters decay geometrically.
CatalogueSpace makeScaledCantor(const Rational& lambda);

/// The one-point space.
CatalogueSpace makePoint();

/// One limit branch with exits at pairwise distance 1.
CatalogueSpace makeConvergentSequence();

/// Exits at distance 2^-k from the limit: the limit is a metric limit of
/// its exits.
CatalogueSpace makeShrinkingConvergentSequence();

/// k stacked convergent-sequence levels; the space of ordinal height k.
CatalogueSpace makeTower(int k);

/// Two components at mutual distance gap; gap must dominate both component
/// diameters for the presentation invariants to hold.
CatalogueSpace makeDisjointSum(const CatalogueSpace& a, const CatalogueSpace& b,
                               const Rational& gap);

std::vector<CatalogueSpace> standardCatalogue();

/// Deterministic random presentations, repaired to satisfy every validation
/// invariant (symmetrize, close the per-symbol triangle inequality, cap
/// scales until nesting holds).
SpacePresentation fuzzPresentation(std::uint64_t seed, int sizeBudget);

/// Deterministic splitmix-based generator so fuzz results are identical
/// across platforms and runs.
class FuzzRng {
 public:
  explicit FuzzRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  int below(int n);  // uniform-ish draw in [0, n)

 private:
  std::uint64_t state_;
};

/// Random lasso point of the space (valid by construction).
LassoPoint fuzzLasso(const ValidatedSpace& v, FuzzRng& rng, int maxLen);

/// Random valid cylinder path.
Cylinder fuzzCylinder(const ValidatedSpace& v, FuzzRng& rng, int maxLen);

}  // namespace topocb
