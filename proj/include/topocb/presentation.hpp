#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "topocb/rational.hpp"

namespace topocb {

using SymbolId = int;

struct ChildRef {
  SymbolId symbol;
  Rational scale;  // edge multiplier in (0, 1]
};

struct SymbolDef {
  std::string name;
  std::vector<ChildRef> children;
  std::vector<std::vector<Rational>> delta;  // slot-separation matrix

  int arity() const { return static_cast<int>(children.size()); }
};

/// A finite symbol graph presenting a compact zero-dimensional space: the
/// points are the infinite root paths, and the distance of two distinct
/// branches is scale(meet) * delta at their separating slot pair.
struct SpacePresentation {
  std::vector<SymbolDef> symbols;
  SymbolId root = 0;

  std::optional<SymbolId> idOf(const std::string& name) const;
  const SymbolDef& symbol(SymbolId s) const { return symbols.at(s); }
};

struct ParseError : std::runtime_error {
  std::string where;
  ParseError(std::string where_, const std::string& what_)
      : std::runtime_error(where_.empty() ? what_ : where_ + ": " + what_),
        where(std::move(where_)) {}
};

/// Reads the space file format (JSON: {"symbols": {...}, "root": name}).
/// Structural problems (syntax, unknown symbol references, malformed
/// rationals) throw ParseError with the offending location.
SpacePresentation parsePresentation(const std::string& text);

std::string presentationToJson(const SpacePresentation& p);

struct Violation {
  std::string code;     // machine-readable case, e.g. "delta-positivity"
  std::string where;    // symbol / slot pair
  std::string message;
};

/// An eventually periodic branch: stem followed by the cycle repeated
/// forever. Canonical form (primitive cycle, minimal stem) makes point
/// equality a syntactic check.
struct LassoPoint {
  std::vector<int> stem;
  std::vector<int> cycle;

  LassoPoint canonical() const;
  bool operator==(const LassoPoint& o) const {
    return stem == o.stem && cycle == o.cycle;
  }
  bool operator<(const LassoPoint& o) const {
    return std::tie(stem, cycle) < std::tie(o.stem, o.cycle);
  }
  int slotAt(int depth) const {
    if (depth < static_cast<int>(stem.size())) return stem[depth];
    return cycle[(depth - stem.size()) % cycle.size()];
  }
  std::string str() const;
};

struct Cylinder {
  std::vector<int> path;
  bool operator==(const Cylinder& o) const { return path == o.path; }
  int depth() const { return static_cast<int>(path.size()); }
  std::string str() const;
};

struct InvalidPoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Node-by-node data of a lasso branch, materialized up to one full period
/// of its (symbol, cycle position) orbit. Node k carries the symbol and the
/// cumulative scale at depth k and the slot taken there; for k >= prefixLen
/// the data repeats with the given period, scales multiplying by
/// periodScale each round.
struct LassoNodes {
  int prefixLen = 0;
  int period = 1;
  Rational periodScale;  // product of edge multipliers over one period
  std::vector<SymbolId> symbol;
  std::vector<Rational> scale;
  std::vector<int> slot;

  int totalLen() const { return prefixLen + period; }
};

struct WitnessPair {
  LassoPoint x;
  LassoPoint y;
  Rational value;
};

struct ValidationOutcome;

class ValidatedSpace {
 public:
  const SpacePresentation& presentation() const { return p_; }
  const SymbolDef& symbol(SymbolId s) const { return p_.symbol(s); }
  SymbolId root() const { return p_.root; }
  int symbolCount() const { return static_cast<int>(p_.symbols.size()); }

  /// sup over all paths from s of path-scale * local separation maximum;
  /// equals the diameter of any cylinder at s, per unit scale.
  const Rational& maxDelta(SymbolId s) const { return maxDelta_[s]; }

  /// Largest delta entry of s itself (0 for a single-child symbol).
  const Rational& localMax(SymbolId s) const { return localMax_[s]; }

  /// Whether the full subtree under s contains a point at which cylinder
  /// radii decay to zero (a metrically isolated branch).
  bool subtreeHasIsolatedBranch(SymbolId s) const { return hasIsol_[s]; }

  // --- cylinders ---------------------------------------------------------
  SymbolId symbolAt(const Cylinder& c) const;
  Rational cylinderScale(const Cylinder& c) const;
  Rational cylinderDiameter(const Cylinder& c) const;
  /// Exact distance between the branch sets of two cylinders, constant over
  /// all point pairs when the cylinders are disjoint; 0 when nested. The
  /// witnesses attain the value.
  std::pair<Rational, WitnessPair> cylinderDistance(const Cylinder& a,
                                                    const Cylinder& b) const;
  /// Two branches through c realizing its diameter (x == y iff diameter 0).
  WitnessPair diameterWitness(const Cylinder& c) const;

  // --- lasso points ------------------------------------------------------
  LassoNodes walk(const LassoPoint& x) const;  // validates, throws InvalidPoint
  bool pointInCylinder(const LassoPoint& x, const Cylinder& c) const;
  Rational pointDistance(const LassoPoint& x, const LassoPoint& y) const;
  /// Leftmost branch through c, in canonical lasso form.
  LassoPoint canonicalPoint(const Cylinder& c) const;
  /// sup over y in c of d(x, y); the sup scans depths from |c| onward.
  Rational pointRadius(const Cylinder& c, const LassoPoint& x) const;

  friend struct ValidationOutcome;
  friend ValidationOutcome validate(const SpacePresentation& p);

 private:
  explicit ValidatedSpace(SpacePresentation p) : p_(std::move(p)) {}
  void checkPath(const Cylinder& c) const;

  SpacePresentation p_;
  std::vector<Rational> maxDelta_;
  std::vector<Rational> localMax_;
  std::vector<int> attainRound_;  // fixpoint round at which maxDelta settled
  std::vector<bool> hasIsol_;
};

struct ValidationOutcome {
  std::optional<ValidatedSpace> space;
  std::vector<Violation> violations;
  bool ok() const { return space.has_value(); }
};

/// Checks every presentation invariant: at least one child per symbol,
/// scales in (0,1], delta symmetric with zero diagonal and positive
/// off-diagonal entries, the per-symbol triangle inequality, and the nesting
/// bound scale_i * maxDelta(child_i) <= 2 * delta(i, j). The collected
/// violations are all reported, not just the first.
ValidationOutcome validate(const SpacePresentation& p);

/// Convenience for test and catalogue code: validate or throw.
ValidatedSpace validateOrThrow(const SpacePresentation& p);

}  // namespace topocb
