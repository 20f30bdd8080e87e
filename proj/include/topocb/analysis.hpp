#pragma once

#include <variant>

#include "topocb/statespace.hpp"

namespace topocb {

enum class DerivativeKind { Diameter, Finite, Bounded, Isolated, WeaklyIsolated };

constexpr const char* kindName(DerivativeKind k) {
  switch (k) {
    case DerivativeKind::Diameter: return "d";
    case DerivativeKind::Finite: return "f";
    case DerivativeKind::Bounded: return "b";
    case DerivativeKind::Isolated: return "i";
    case DerivativeKind::WeaklyIsolated: return "wi";
  }
  return "?";
}

std::optional<DerivativeKind> kindFromName(const std::string& name);

/// A self-certifying witness that branching above separation eps recurs
/// forever: a finite binary tree of nested cylinders with sibling distance
/// > eps, whose every leaf returns to an ancestor at the same symbol and the
/// same exact scale, so the pattern between them repeats indefinitely.
struct PerfectTreeCertificate {
  struct TreeNode {
    std::vector<int> path;   // cylinder from the root
    int child0 = -1;
    int child1 = -1;
    int embedAncestor = -1;  // leaf: index of the equal-state ancestor
  };
  Rational eps;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::string toJson(const ValidatedSpace& v) const;
  static PerfectTreeCertificate fromJson(const std::string& text);
};

struct CertificateCheck {
  bool ok = true;
  std::string failure;  // which node/invariant broke, when not ok
};

/// Independent re-check of a certificate: path validity, nesting, the exact
/// sibling separations, and the equal-scale recurrence embeddings.
CertificateCheck verifyCertificate(const ValidatedSpace& v,
                                   const PerfectTreeCertificate& cert);

struct RankValue {
  bool infinite = false;
  int rank = 0;  // meaningful when finite
  std::optional<PerfectTreeCertificate> certificate;

  bool operator==(const RankValue& o) const {
    return infinite == o.infinite && (infinite || rank == o.rank);
  }
  std::string str() const {
    return infinite ? "inf" : std::to_string(rank);
  }
};

/// Rank inequality with infinity on top.
inline bool rankLeq(const RankValue& a, const RankValue& b) {
  if (b.infinite) return true;
  if (a.infinite) return false;
  return a.rank <= b.rank;
}

struct SpaceTarget {};
using RankTarget = std::variant<SpaceTarget, Cylinder, LassoPoint>;

/// One derivative step on a subspace automaton. The result is closed and
/// reachability-pruned; each kind removes exactly the points lying in some
/// relatively small open set of its notion of smallness.
Subspace deriveOnce(const Subspace& s, DerivativeKind kind, const Rational& eps);

/// Iterates deriveOnce from the full space until empty or stable. The last
/// entry is the empty subspace or a non-empty fixpoint.
std::vector<Subspace> derivativeSequence(const StateGraph& g,
                                         DerivativeKind kind);

RankValue cbRank(const ValidatedSpace& v, const RankTarget& target,
                 DerivativeKind kind, const Rational& eps,
                 const Budget& budget = {});

enum class DegreeKind { Diameter, Finite, Bounded, BoundedAlt };

std::optional<DegreeKind> degreeKindFromName(const std::string& name);
constexpr const char* degreeKindName(DegreeKind k) {
  switch (k) {
    case DegreeKind::Diameter: return "d";
    case DegreeKind::Finite: return "f";
    case DegreeKind::Bounded: return "b";
    case DegreeKind::BoundedAlt: return "bprime";
  }
  return "?";
}

struct DegreeValue {
  DegreeKind kind;
  mpz_class value;
};

/// Cantor-Bendixson degree of the whole space at its final derived set.
/// Requires a finite rank; throws std::domain_error otherwise.
DegreeValue cbDegree(const ValidatedSpace& v, DegreeKind kind,
                     const Rational& eps, const Budget& budget = {});

/// Runs the diameter-kind derivative sequence and extracts a certificate
/// from the non-empty fixpoint, if any.
std::optional<PerfectTreeCertificate> findPerfectTree(const ValidatedSpace& v,
                                                      const Rational& eps,
                                                      const Budget& budget = {});

/// Point isolation relative to a closed branch set: the relative cylinder
/// radii around x decay to zero. Decided exactly on the lasso's recurrent
/// structure. Throws InvalidPoint when x lies outside the set.
bool isDIsolated(const BranchAutomaton& a, const LassoPoint& x);

/// Weak isolation: every metric ball around x has non-empty interior in the
/// set, i.e. live relative cylinders exist at arbitrarily small sup-distance
/// from x.
bool isWeaklyDIsolated(const BranchAutomaton& a, const LassoPoint& x);

struct WeakIsolationRank {
  enum Kind { FiniteRank, AtLeastCap, InfiniteRank } kind;
  int rank = 0;  // meaningful for FiniteRank
};

/// Inductive weak-isolation rank, capped; infinite exactly on the metric
/// closure of the relatively isolated points.
WeakIsolationRank weakIsolationRank(const BranchAutomaton& a,
                                    const LassoPoint& x, int cap);

struct Separable {};
struct NotSeparable {
  Rational eps;
  PerfectTreeCertificate certificate;
};
using SeparabilityVerdict = std::variant<Separable, NotSeparable>;

/// Decides whether the derivative analysis terminates at every resolution.
/// A negative verdict carries a resolution and a certificate, and implies
/// the space has no countable metrically dense subset.
SeparabilityVerdict separabilityVerdict(const ValidatedSpace& v,
                                        const Budget& budget = {});

/// A closed relation given as a finite union of cylinder products.
struct RelationBlocks {
  std::vector<std::pair<Cylinder, Cylinder>> blocks;  // (in X, in Y)
};

RelationBlocks parseRelation(const std::string& text);

struct RelationHypothesisViolation {
  // d_Y(y, y') <= delta is possible while d_X(x, x') > eps is forced
  Cylinder xBlock, yBlock, xBlockOther, yBlockOther;
  LassoPoint y, yOther;
  Rational yDistance;
  LassoPoint x, xOther;
  Rational xDistance;
};

struct RelationReport {
  bool hypothesisHolds = false;
  std::optional<RelationHypothesisViolation> violation;
  bool domainCovered = false;       // K inside the open domain of the relation
  bool imageConstrained = false;    // every related point lands in F
  std::optional<RankValue> rankX;   // of K at eps
  std::optional<RankValue> rankY;   // of F at delta
  bool inequalityHolds = false;     // rankX <= rankY, when computed
};

/// Checks the transfer hypothesis of a block relation exactly, verifies the
/// domain conditions for K and F at cylinder granularity, and when both
/// hold compares the ranks of K (in X, at eps) and F (in Y, at delta) for
/// the finite or bounded kind.
RelationReport compareRanksViaRelation(
    const ValidatedSpace& vx, const ValidatedSpace& vy,
    const RelationBlocks& r, const Rational& eps, const Rational& delta,
    const Cylinder& k, const std::vector<Cylinder>& f, DerivativeKind kind,
    const Budget& budget = {});

// Subspace-level helpers shared with the command-line surface.

/// A point of the subspace that is isolated relative to it, if any.
std::optional<LassoPoint> isolatedPointWitness(const Subspace& s);

std::string subspaceToJson(const Subspace& s);

}  // namespace topocb
