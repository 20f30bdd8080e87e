#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "topocb/presentation.hpp"

namespace topocb {

struct BudgetError : std::runtime_error {
  std::size_t cap;
  BudgetError(const std::string& what_, std::size_t cap_)
      : std::runtime_error(what_ + " (cap " + std::to_string(cap_) + ")"),
        cap(cap_) {}
};

struct Budget {
  std::size_t maxStates = 1'000'000;
};

/// Finite quotient of the cylinder tree at resolution eps. States are the
/// (symbol, scale) pairs whose cylinders are still larger than eps; child
/// targets whose cylinders have diameter <= eps become atoms of the
/// frontier. Two occurrences of the same (symbol, exact scale) generate
/// isometric subtrees and share one node.
struct StateGraph {
  struct Target {
    bool atom = false;
    int node = -1;          // big target
    SymbolId atomSymbol = -1;
    Rational atomScale;
  };
  struct Node {
    SymbolId symbol;
    Rational scale;
    std::vector<Target> targets;  // indexed by child slot
  };

  const ValidatedSpace* space = nullptr;
  Rational eps;
  std::vector<Node> nodes;  // empty iff the whole space is one atom
  bool rootIsAtom = false;

  int arity(int node) const {
    return static_cast<int>(nodes[node].targets.size());
  }
  Rational atomDiameter(const Target& t) const {
    return t.atomScale * space->maxDelta(t.atomSymbol);
  }
};

StateGraph expandStates(const ValidatedSpace& v, const Rational& eps,
                        const Budget& budget = {});

/// A state graph with per-state surviving child slots; its branch set is a
/// closed subset of the space. Atoms are all-or-nothing: an alive atom edge
/// contributes the atom's entire cylinder.
struct Subspace {
  const StateGraph* graph = nullptr;
  std::vector<std::vector<bool>> alive;  // per node, per slot
  bool rootAtomAlive = true;             // used only when graph->rootIsAtom
  std::vector<bool> productive;          // derived: node has a live branch

  bool operator==(const Subspace& o) const {
    return alive == o.alive && rootAtomAlive == o.rootAtomAlive;
  }
};

Subspace fullSubspace(const StateGraph& g);

/// Greatest-fixpoint liveness: kills slots into dead states and states with
/// no surviving slots, until stable. Idempotent.
void pruneToProductive(Subspace& s);

bool subspaceEmpty(const Subspace& s);

/// Exact diameters of the surviving branch sets, one per node (meaningful
/// for productive nodes). Index -1 never appears; atoms are folded in.
std::vector<Rational> relativeDiameters(const Subspace& s);

Rational subspaceDiameter(const Subspace& s, int node);

/// Diameters plus the fixpoint round at which each value settled; a value
/// is always realized along a chain of strictly decreasing rounds, which
/// witness reconstruction follows.
void relativeDiametersWithRounds(const Subspace& s, std::vector<Rational>& d,
                                 std::vector<int>& settled);

struct SepValue {
  bool infinite = false;
  mpz_class count = 0;  // meaningful when finite

  bool operator==(const SepValue& o) const {
    return infinite == o.infinite && (infinite || count == o.count);
  }
};

/// Largest size of a point set inside each node's surviving cylinder with
/// pairwise distances strictly greater than eps. Computed by the clique
/// fixpoint over the far graph on surviving slots; a strongly connected
/// component that can re-enter itself inside a two-element clique pumps the
/// value to infinity.
struct SepAnalysis {
  std::vector<SepValue> value;  // per node

  // Reconstruction data for witnesses (finite nodes only).
  struct Choice {
    bool delegate = false;
    int delegateSlot = -1;           // follow this slot, take target's witness
    std::vector<int> cliqueSlots;    // otherwise: combine these subtrees
  };
  std::vector<Choice> choice;
};

SepAnalysis separationNumbers(const Subspace& s, const Rational& eps);

SepValue sepNumber(const Subspace& s, int node, const Rational& eps);

/// Pairwise > eps witness points under the given node: all of them when the
/// separation number is finite, maxCount of them when it is infinite.
std::vector<LassoPoint> sepWitness(const Subspace& s, int node,
                                   const Rational& eps, int maxCount);

/// True iff the node's surviving cylinder contains an infinite eps-separated
/// subset: some surviving constant-scale cycle offers, at one of its nodes,
/// an exit slot at distance > eps from the continuation slot.
bool hasInfiniteSeparated(const Subspace& s, int node, const Rational& eps);

/// True iff the node's surviving cylinder contains a point whose cylinder
/// radii decay to zero within the subspace.
bool hasIsolatedPoint(const Subspace& s, int node);

/// Abstract deterministic-transition view of a closed branch set; states are
/// opaque ints. Used to run the same walk-based algorithms over subspace
/// automata and congruence-class automata.
class BranchAutomaton {
 public:
  virtual ~BranchAutomaton() = default;
  virtual const ValidatedSpace& space() const = 0;
  virtual int start() const = 0;
  virtual SymbolId symbolOf(int state) const = 0;
  virtual std::vector<int> allowedSlots(int state) const = 0;
  virtual int next(int state, int slot) const = 0;
  virtual int stateCount() const = 0;

  /// Does the subtree below this state contain a point whose relative
  /// cylinder radii decay to zero?
  virtual bool containsIsolated(int state) const = 0;
};

/// View of a pruned Subspace as a BranchAutomaton (throws on empty).
class SubspaceView final : public BranchAutomaton {
 public:
  explicit SubspaceView(const Subspace& s);
  const ValidatedSpace& space() const override;
  int start() const override;
  SymbolId symbolOf(int state) const override;
  std::vector<int> allowedSlots(int state) const override;
  int next(int state, int slot) const override;
  int stateCount() const override;
  bool containsIsolated(int state) const override;

 private:
  const Subspace* s_;
  int bigCount_;
};

/// Leftmost branch of the automaton from its start state, as a canonical
/// lasso (root-anchored when prefix holds the path taken to reach start).
LassoPoint leftmostLasso(const BranchAutomaton& a, int state,
                         std::vector<int> prefix);

bool automatonAccepts(const BranchAutomaton& a, const LassoPoint& x);

/// d(K, F) for the branch sets of two automata over the same space, with a
/// witness pair attaining it; 0 with x == y iff the sets intersect.
std::pair<Rational, WitnessPair> closedSetDistance(const BranchAutomaton& a,
                                                   const BranchAutomaton& b);

/// Cylinder / point membership in the surviving branch set.
bool cylinderMeets(const Subspace& s, const Cylinder& c);
bool pointMeets(const Subspace& s, const LassoPoint& x);

/// Diameter witness for the surviving set under a node: two branch points
/// realizing subspaceDiameter (x == y when it is 0).
WitnessPair relativeDiameterWitness(const Subspace& s, int node);

}  // namespace topocb
