#pragma once

#include "topocb/analysis.hpp"

namespace topocb {

/// Depth-bounded brute-force cross-check for the derivative engine.
///
/// The oracle unrolls the cylinder tree explicitly, stopping a branch when
/// its cell becomes small (diameter <= eps) or when its (symbol, scale)
/// pair repeats an ancestor on the same branch; the repeat ties the cell to
/// that ancestor, whose subtree it reproduces exactly (equal symbol, equal
/// scale). Derivative steps are then evaluated by transcribing the removal
/// definitions cell by cell over this finite complex, with explicit pairwise
/// cell distances, instead of the engine's shared-state fixpoints. It shares
/// only the presentation-level distance primitives with the engine.
class OracleComplex {
 public:
  OracleComplex(const ValidatedSpace& v, const Rational& eps,
                DerivativeKind kind, int depthCap = 64);

  /// Number of non-empty stages; stage 0 is the full space.
  int stages() const { return static_cast<int>(aliveByStage_.size()); }

  /// True when the sequence ended in a non-empty fixpoint.
  bool reachedFixpoint() const { return fixpoint_; }

  /// Whether every cell was resolved (no branch hit the depth cap).
  bool exact() const { return exact_; }

  RankValue spaceRank() const;

  /// Does the given cylinder meet the stage-alpha derived set? Paths deeper
  /// than the complex follow the recurrence ties.
  bool cylinderMeetsStage(const Cylinder& c, int alpha) const;

  RankValue cylinderRank(const Cylinder& c) const;
  RankValue pointRank(const LassoPoint& x) const;

 private:
  struct Cell {
    std::vector<int> path;
    SymbolId symbol;
    Rational scale;
    int parent = -1;
    int slotFromParent = -1;
    std::vector<int> children;  // by slot; -1 entries never occur
    bool small = false;         // resolved whole: full subtree below
    int tiedTo = -1;            // recurrence: equal-state ancestor
  };

  int build(std::vector<int> path, SymbolId sym, const Rational& scale,
            int parent, int slot, int depth,
            std::vector<std::pair<SymbolId, Rational>>& branchStates);

  struct Stage {
    std::vector<bool> edgeAlive;  // per cell: the edge from its parent
  };

  bool cellAlive(const Stage& st, int cell) const;
  Stage deriveStage(const Stage& st) const;
  void pruneStage(Stage& st) const;
  std::vector<Rational> stageRelDiameters(const Stage& st) const;
  std::vector<SepValue> stageSeps(const Stage& st) const;
  std::vector<bool> stageContainsIsolated(const Stage& st, bool weak) const;
  std::vector<bool> stageDeterministicForever(const Stage& st) const;
  int resolveTie(int cell) const;
  bool stageEmpty(const Stage& st) const;

  const ValidatedSpace* v_;
  Rational eps_;
  DerivativeKind kind_;
  int depthCap_;
  bool exact_ = true;
  bool fixpoint_ = false;
  std::vector<Cell> cells_;
  std::vector<Stage> aliveByStage_;
};

/// Literal transcription of the rank computation over the oracle complex.
struct OracleRank {
  RankValue rank;
  bool exact;
};

OracleRank bruteForceRank(const ValidatedSpace& v, DerivativeKind kind,
                          const Rational& eps, int depthCap = 64);

/// All depth-d cylinders of the space.
std::vector<Cylinder> cylindersAtDepth(const ValidatedSpace& v, int depth);

/// Brute-force maximum pairwise > eps subset among the depth-d cylinder
/// representatives (each cell contributes its leftmost branch).
int bruteForceMaxSeparated(const ValidatedSpace& v, int depth,
                           const Rational& eps);

/// Brute-force isolation check: compares the radius over one recurrence
/// period of the lasso against the next, using only presentation
/// primitives.
bool bruteForceIsolated(const ValidatedSpace& v, const LassoPoint& x);

}  // namespace topocb
