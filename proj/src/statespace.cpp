#include "topocb/statespace.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <functional>
#include <map>
#include <set>

namespace topocb {

StateGraph expandStates(const ValidatedSpace& v, const Rational& eps,
                        const Budget& budget) {
  if (eps.sign() <= 0)
    throw std::invalid_argument("resolution eps must be positive");
  StateGraph g;
  g.space = &v;
  g.eps = eps;

  auto isBig = [&](SymbolId s, const Rational& scale) {
    return scale * v.maxDelta(s) > eps;
  };
  if (!isBig(v.root(), Rational(1))) {
    g.rootIsAtom = true;
    return g;
  }

  std::map<std::pair<SymbolId, Rational>, int> ids;
  std::deque<int> queue;
  auto intern = [&](SymbolId s, const Rational& scale) {
    auto key = std::make_pair(s, scale);
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    if (g.nodes.size() >= budget.maxStates)
      throw BudgetError("state expansion exceeded budget", budget.maxStates);
    int id = static_cast<int>(g.nodes.size());
    ids.emplace(key, id);
    g.nodes.push_back(StateGraph::Node{s, scale, {}});
    queue.push_back(id);
    return id;
  };
  intern(v.root(), Rational(1));
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    SymbolId s = g.nodes[id].symbol;
    Rational scale = g.nodes[id].scale;
    const SymbolDef& def = v.symbol(s);
    std::vector<StateGraph::Target> targets;
    for (int i = 0; i < def.arity(); ++i) {
      SymbolId cs = def.children[i].symbol;
      Rational cscale = scale * def.children[i].scale;
      StateGraph::Target t;
      if (isBig(cs, cscale)) {
        t.node = intern(cs, cscale);
      } else {
        t.atom = true;
        t.atomSymbol = cs;
        t.atomScale = cscale;
      }
      targets.push_back(std::move(t));
    }
    g.nodes[id].targets = std::move(targets);
  }
  return g;
}

Subspace fullSubspace(const StateGraph& g) {
  Subspace s;
  s.graph = &g;
  s.alive.resize(g.nodes.size());
  for (std::size_t q = 0; q < g.nodes.size(); ++q)
    s.alive[q].assign(g.arity(static_cast<int>(q)), true);
  s.rootAtomAlive = true;
  pruneToProductive(s);
  return s;
}

void pruneToProductive(Subspace& s) {
  const StateGraph& g = *s.graph;
  const int n = static_cast<int>(g.nodes.size());
  s.productive.assign(n, true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int q = 0; q < n; ++q) {
      if (!s.productive[q]) continue;
      bool live = false;
      for (int i = 0; i < g.arity(q) && !live; ++i) {
        if (!s.alive[q][i]) continue;
        const StateGraph::Target& t = g.nodes[q].targets[i];
        live = t.atom || s.productive[t.node];
      }
      if (!live) {
        s.productive[q] = false;
        changed = true;
      }
    }
  }
  // Canonical form: no alive slot points at a dead state.
  for (int q = 0; q < n; ++q)
    for (int i = 0; i < g.arity(q); ++i) {
      if (!s.alive[q][i]) continue;
      const StateGraph::Target& t = g.nodes[q].targets[i];
      if (!s.productive[q] || (!t.atom && !s.productive[t.node]))
        s.alive[q][i] = false;
    }
}

bool subspaceEmpty(const Subspace& s) {
  if (s.graph->rootIsAtom) return !s.rootAtomAlive;
  return s.productive.empty() || !s.productive[0];
}

void relativeDiametersWithRounds(const Subspace& s, std::vector<Rational>& d,
                                 std::vector<int>& settled) {
  const StateGraph& g = *s.graph;
  const int n = static_cast<int>(g.nodes.size());
  d.assign(n, Rational(0));
  settled.assign(n, 0);
  auto termOf = [&](int q, int i) {
    const StateGraph::Target& t = g.nodes[q].targets[i];
    return t.atom ? g.atomDiameter(t) : d[t.node];
  };
  for (int round = 1; round <= n + 2; ++round) {
    bool changed = false;
    std::vector<Rational> nextD = d;
    for (int q = 0; q < n; ++q) {
      if (!s.productive[q]) continue;
      Rational best = d[q];
      const auto& node = g.nodes[q];
      for (int i = 0; i < g.arity(q); ++i) {
        if (!s.alive[q][i]) continue;
        best = max(best, termOf(q, i));
        for (int j = i + 1; j < g.arity(q); ++j)
          if (s.alive[q][j])
            best = max(best, node.scale *
                                 g.space->symbol(node.symbol).delta[i][j]);
      }
      if (best > d[q]) {
        nextD[q] = best;
        settled[q] = round;
        changed = true;
      }
    }
    d = std::move(nextD);
    if (!changed) return;
  }
  throw std::logic_error("relative diameter fixpoint failed to settle");
}

std::vector<Rational> relativeDiameters(const Subspace& s) {
  std::vector<Rational> d;
  std::vector<int> settled;
  relativeDiametersWithRounds(s, d, settled);
  return d;
}

Rational subspaceDiameter(const Subspace& s, int node) {
  return relativeDiameters(s)[node];
}

namespace {

// Iterative Tarjan over the alive big-to-big edges of a subspace.
// Components are emitted successors-first.
struct SccResult {
  std::vector<int> comp;               // node -> component id, -1 if skipped
  std::vector<std::vector<int>> members;  // emission order
};

SccResult sccOfAliveBigEdges(const Subspace& s) {
  const StateGraph& g = *s.graph;
  const int n = static_cast<int>(g.nodes.size());
  SccResult out;
  out.comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> onStack(n, false);
  std::vector<int> stack;
  int counter = 0;

  auto bigTargets = [&](int q) {
    std::vector<int> ts;
    for (int i = 0; i < g.arity(q); ++i)
      if (s.alive[q][i] && !g.nodes[q].targets[i].atom)
        ts.push_back(g.nodes[q].targets[i].node);
    return ts;
  };

  struct Frame {
    int node;
    std::vector<int> targets;
    std::size_t next = 0;
  };
  for (int start = 0; start < n; ++start) {
    if (index[start] != -1 || !s.productive[start]) continue;
    std::vector<Frame> frames;
    frames.push_back(Frame{start, bigTargets(start)});
    index[start] = low[start] = counter++;
    stack.push_back(start);
    onStack[start] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next < f.targets.size()) {
        int t = f.targets[f.next++];
        if (index[t] == -1) {
          index[t] = low[t] = counter++;
          stack.push_back(t);
          onStack[t] = true;
          frames.push_back(Frame{t, bigTargets(t)});
        } else if (onStack[t]) {
          low[f.node] = std::min(low[f.node], index[t]);
        }
      } else {
        if (low[f.node] == index[f.node]) {
          std::vector<int> members;
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            onStack[w] = false;
            out.comp[w] = static_cast<int>(out.members.size());
            members.push_back(w);
          } while (w != f.node);
          out.members.push_back(std::move(members));
        }
        int finished = f.node;
        frames.pop_back();
        if (!frames.empty())
          low[frames.back().node] =
              std::min(low[frames.back().node], low[finished]);
      }
    }
  }
  return out;
}

std::vector<std::pair<int, int>> farPairs(const Subspace& s, int q,
                                          const Rational& eps) {
  const StateGraph& g = *s.graph;
  const auto& node = g.nodes[q];
  const auto& delta = g.space->symbol(node.symbol).delta;
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < g.arity(q); ++i) {
    if (!s.alive[q][i]) continue;
    for (int j = i + 1; j < g.arity(q); ++j)
      if (s.alive[q][j] && node.scale * delta[i][j] > eps)
        out.emplace_back(i, j);
  }
  return out;
}

// Max clique weight in the far graph over the given slots, by plain DFS;
// arities are small. Returns the best total and the clique attaining it.
void bestCliqueFrom(const std::vector<int>& slots,
                    const std::vector<std::vector<bool>>& far,
                    const std::vector<mpz_class>& weight, std::size_t at,
                    std::vector<int>& current, mpz_class total,
                    mpz_class& bestTotal, std::vector<int>& bestClique) {
  if (total > bestTotal) {
    bestTotal = total;
    bestClique = current;
  }
  for (std::size_t k = at; k < slots.size(); ++k) {
    bool ok = true;
    for (int c : current)
      if (!far[c][slots[k]]) {
        ok = false;
        break;
      }
    if (!ok) continue;
    current.push_back(slots[k]);
    bestCliqueFrom(slots, far, weight, k + 1, current, total + weight[slots[k]],
                   bestTotal, bestClique);
    current.pop_back();
  }
}

}  // namespace

SepAnalysis separationNumbers(const Subspace& s, const Rational& eps) {
  const StateGraph& g = *s.graph;
  if (eps < g.eps)
    throw std::invalid_argument(
        "separation threshold below the graph resolution");
  const int n = static_cast<int>(g.nodes.size());
  SepAnalysis out;
  out.value.assign(n, SepValue{false, 1});
  out.choice.assign(n, SepAnalysis::Choice{});
  if (n == 0) return out;

  SccResult scc = sccOfAliveBigEdges(s);
  const int nc = static_cast<int>(scc.members.size());

  // A component pumps when some far pair at one of its nodes keeps one foot
  // inside the component: looping there while peeling the other foot off
  // yields arbitrarily large separated sets.
  std::vector<bool> pumping(nc, false);
  for (int c = 0; c < nc; ++c) {
    for (int q : scc.members[c]) {
      for (auto [i, j] : farPairs(s, q, eps)) {
        auto internal = [&](int slot) {
          const StateGraph::Target& t = g.nodes[q].targets[slot];
          if (t.atom) return false;
          return scc.comp[t.node] == c &&
                 (t.node == q || scc.members[c].size() > 1);
        };
        if (internal(i) || internal(j)) {
          pumping[c] = true;
          break;
        }
      }
      if (pumping[c]) break;
    }
  }

  // Components are emitted successors-first, so one pass marks everything
  // that can reach a pumping component, and a second pass evaluates the
  // finite values bottom-up.
  std::vector<bool> infiniteComp(nc, false);
  for (int c = 0; c < nc; ++c) {
    infiniteComp[c] = pumping[c];
    for (int q : scc.members[c]) {
      for (int i = 0; i < g.arity(q) && !infiniteComp[c]; ++i) {
        if (!s.alive[q][i]) continue;
        const StateGraph::Target& t = g.nodes[q].targets[i];
        if (!t.atom && infiniteComp[scc.comp[t.node]]) infiniteComp[c] = true;
      }
      if (infiniteComp[c]) break;
    }
  }

  for (int c = 0; c < nc; ++c) {
    if (infiniteComp[c]) {
      for (int q : scc.members[c]) out.value[q] = SepValue{true, 0};
      continue;
    }
    // Exit cliques: far cliques avoiding component-internal big targets.
    std::map<int, std::pair<mpz_class, std::vector<int>>> exits;
    for (int q : scc.members[c]) {
      const auto& node = g.nodes[q];
      const auto& delta = g.space->symbol(node.symbol).delta;
      std::vector<int> slots;
      std::vector<mpz_class> weight(g.arity(q), 0);
      for (int i = 0; i < g.arity(q); ++i) {
        if (!s.alive[q][i]) continue;
        const StateGraph::Target& t = g.nodes[q].targets[i];
        if (!t.atom && scc.comp[t.node] == c) continue;
        slots.push_back(i);
        weight[i] = t.atom ? mpz_class(1) : out.value[t.node].count;
      }
      std::vector<std::vector<bool>> far(g.arity(q),
                                         std::vector<bool>(g.arity(q), false));
      for (int i : slots)
        for (int j : slots)
          if (i != j && node.scale * delta[i][j] > eps) far[i][j] = true;
      mpz_class bestTotal = 0;
      std::vector<int> clique, current;
      bestCliqueFrom(slots, far, weight, 0, current, 0, bestTotal, clique);
      exits[q] = {bestTotal, clique};
    }
    // Within the component the value propagates along internal edges: any
    // state may defer entirely to a reachable internal state.
    for (int q : scc.members[c]) {
      mpz_class best = exits[q].first;
      std::vector<int> bestVia;  // slot path to the chosen state
      // BFS within the component
      std::map<int, std::vector<int>> pathTo{{q, {}}};
      std::deque<int> bfs{q};
      while (!bfs.empty()) {
        int u = bfs.front();
        bfs.pop_front();
        if (exits[u].first > best) {
          best = exits[u].first;
          bestVia = pathTo[u];
        }
        for (int i = 0; i < g.arity(u); ++i) {
          if (!s.alive[u][i]) continue;
          const StateGraph::Target& t = g.nodes[u].targets[i];
          if (t.atom || scc.comp[t.node] != c || pathTo.count(t.node)) continue;
          auto p = pathTo[u];
          p.push_back(i);
          pathTo[t.node] = std::move(p);
          bfs.push_back(t.node);
        }
      }
      SepAnalysis::Choice choice;
      if (best < 1) {
        best = 1;  // a productive state always holds one point
      } else if (!bestVia.empty()) {
        choice.delegate = true;
        choice.delegateSlot = bestVia.front();
      } else {
        choice.cliqueSlots = exits[q].second;
      }
      out.value[q] = SepValue{false, best};
      out.choice[q] = std::move(choice);
    }
  }
  return out;
}

SepValue sepNumber(const Subspace& s, int node, const Rational& eps) {
  if (s.graph->rootIsAtom) return SepValue{false, 1};
  return separationNumbers(s, eps).value.at(node);
}

bool hasInfiniteSeparated(const Subspace& s, int node, const Rational& eps) {
  const StateGraph& g = *s.graph;
  if (g.rootIsAtom) return false;
  if (!s.productive[node]) return false;
  SccResult scc = sccOfAliveBigEdges(s);
  // reachable alive big states from node
  std::set<int> reach{node};
  std::deque<int> bfs{node};
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop_front();
    for (int i = 0; i < g.arity(u); ++i) {
      if (!s.alive[u][i] || g.nodes[u].targets[i].atom) continue;
      int t = g.nodes[u].targets[i].node;
      if (reach.insert(t).second) bfs.push_back(t);
    }
  }
  for (int q : reach) {
    int c = scc.comp[q];
    for (auto [i, j] : farPairs(s, q, eps)) {
      auto continues = [&](int slot) {
        const StateGraph::Target& t = g.nodes[q].targets[slot];
        if (t.atom) return false;
        return scc.comp[t.node] == c &&
               (t.node == q || scc.members[c].size() > 1);
      };
      // one slot rides the cycle, the other exits to a live point
      if (continues(i) || continues(j)) return true;
    }
  }
  return false;
}

bool hasIsolatedPoint(const Subspace& s, int node) {
  const StateGraph& g = *s.graph;
  if (g.rootIsAtom) return g.space->subtreeHasIsolatedBranch(g.space->root());
  if (!s.productive[node]) return false;

  // Deterministic good structure: states with exactly one surviving slot
  // whose unique continuation cycles among such states.
  const int n = static_cast<int>(g.nodes.size());
  std::vector<int> uniqueNext(n, -1);
  for (int q = 0; q < n; ++q) {
    if (!s.productive[q]) continue;
    int count = 0, slot = -1;
    for (int i = 0; i < g.arity(q); ++i)
      if (s.alive[q][i]) {
        ++count;
        slot = i;
      }
    if (count == 1 && !g.nodes[q].targets[slot].atom)
      uniqueNext[q] = g.nodes[q].targets[slot].node;
  }
  std::vector<bool> onDetCycle(n, false);
  for (int q = 0; q < n; ++q) {
    if (uniqueNext[q] == -1) continue;
    std::set<int> seen;
    int cur = q;
    while (cur != -1 && uniqueNext[cur] != -1 && seen.insert(cur).second)
      cur = uniqueNext[cur];
    if (cur != -1 && seen.count(cur)) onDetCycle[q] = true;
  }

  std::set<int> reach{node};
  std::deque<int> bfs{node};
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop_front();
    if (onDetCycle[u]) return true;
    for (int i = 0; i < g.arity(u); ++i) {
      if (!s.alive[u][i]) continue;
      const StateGraph::Target& t = g.nodes[u].targets[i];
      if (t.atom) {
        if (g.space->subtreeHasIsolatedBranch(t.atomSymbol)) return true;
      } else if (reach.insert(t.node).second) {
        bfs.push_back(t.node);
      }
    }
  }
  return false;
}

std::vector<LassoPoint> sepWitness(const Subspace& s, int node,
                                   const Rational& eps, int maxCount) {
  const StateGraph& g = *s.graph;
  SubspaceView view(s);
  if (g.rootIsAtom) return {leftmostLasso(view, view.start(), {})};
  SepAnalysis an = separationNumbers(s, eps);

  auto leftmostFrom = [&](std::vector<int> prefix, int q) {
    // q indexes a big node in view-state terms directly
    return leftmostLasso(view, q, std::move(prefix));
  };
  auto atomPoint = [&](std::vector<int> prefix) {
    LassoPoint x{std::move(prefix), {0}};
    return x.canonical();
  };

  std::vector<LassoPoint> out;
  // finite case: follow the recorded choices
  std::function<void(std::vector<int>, int)> emit = [&](std::vector<int> prefix,
                                                        int q) {
    const SepAnalysis::Choice& ch = an.choice[q];
    if (ch.delegate) {
      auto p = prefix;
      p.push_back(ch.delegateSlot);
      emit(std::move(p), g.nodes[q].targets[ch.delegateSlot].node);
      return;
    }
    if (ch.cliqueSlots.empty()) {
      out.push_back(leftmostFrom(prefix, q));
      return;
    }
    for (int slot : ch.cliqueSlots) {
      auto p = prefix;
      p.push_back(slot);
      const StateGraph::Target& t = g.nodes[q].targets[slot];
      if (t.atom)
        out.push_back(atomPoint(std::move(p)));
      else
        emit(std::move(p), t.node);
    }
  };

  if (!an.value[node].infinite) {
    emit({}, node);
    return out;
  }

  // Infinite case: locate a pumping configuration reachable from node and
  // peel maxCount exits off the loop.
  SccResult scc = sccOfAliveBigEdges(s);
  std::map<int, std::vector<int>> pathTo{{node, {}}};
  std::deque<int> bfs{node};
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop_front();
    int c = scc.comp[u];
    for (auto [i, j] : farPairs(s, u, eps)) {
      auto internal = [&](int slot) {
        const StateGraph::Target& t = g.nodes[u].targets[slot];
        return !t.atom && scc.comp[t.node] == c &&
               (t.node == u || scc.members[c].size() > 1);
      };
      int loopSlot = internal(i) ? i : (internal(j) ? j : -1);
      if (loopSlot == -1) continue;
      int exitSlot = loopSlot == i ? j : i;
      // slot path from the loop target back to u within the component
      std::vector<int> cycle{loopSlot};
      int back = g.nodes[u].targets[loopSlot].node;
      if (back != u) {
        std::map<int, std::vector<int>> p2{{back, {}}};
        std::deque<int> b2{back};
        while (!b2.empty() && !p2.count(u)) {
          int v = b2.front();
          b2.pop_front();
          for (int k = 0; k < g.arity(v); ++k) {
            if (!s.alive[v][k] || g.nodes[v].targets[k].atom) continue;
            int t = g.nodes[v].targets[k].node;
            if (scc.comp[t] != c || p2.count(t)) continue;
            auto pp = p2[v];
            pp.push_back(k);
            p2[t] = std::move(pp);
            b2.push_back(t);
          }
        }
        cycle.insert(cycle.end(), p2.at(u).begin(), p2.at(u).end());
      }
      std::vector<int> prefix = pathTo[u];
      for (int k = 0; k < maxCount; ++k) {
        std::vector<int> p = prefix;
        for (int rep = 0; rep < k; ++rep)
          p.insert(p.end(), cycle.begin(), cycle.end());
        p.push_back(exitSlot);
        const StateGraph::Target& t = g.nodes[u].targets[exitSlot];
        if (t.atom)
          out.push_back(atomPoint(std::move(p)));
        else
          out.push_back(leftmostFrom(std::move(p), t.node));
      }
      return out;
    }
    for (int i = 0; i < g.arity(u); ++i) {
      if (!s.alive[u][i] || g.nodes[u].targets[i].atom) continue;
      int t = g.nodes[u].targets[i].node;
      if (pathTo.count(t)) continue;
      auto p = pathTo[u];
      p.push_back(i);
      pathTo[t] = std::move(p);
      bfs.push_back(t);
    }
  }
  throw std::logic_error("infinite separation without pumping configuration");
}

// ---------------------------------------------------------------------------
// BranchAutomaton machinery

SubspaceView::SubspaceView(const Subspace& s) : s_(&s) {
  if (subspaceEmpty(s)) throw std::invalid_argument("empty subspace");
  bigCount_ = static_cast<int>(s.graph->nodes.size());
}

const ValidatedSpace& SubspaceView::space() const { return *s_->graph->space; }

int SubspaceView::start() const {
  return s_->graph->rootIsAtom ? bigCount_ + s_->graph->space->root() : 0;
}

SymbolId SubspaceView::symbolOf(int state) const {
  if (state < bigCount_) return s_->graph->nodes[state].symbol;
  return state - bigCount_;
}

std::vector<int> SubspaceView::allowedSlots(int state) const {
  std::vector<int> out;
  if (state < bigCount_) {
    for (int i = 0; i < s_->graph->arity(state); ++i)
      if (s_->alive[state][i]) out.push_back(i);
  } else {
    SymbolId sym = state - bigCount_;
    for (int i = 0; i < space().symbol(sym).arity(); ++i) out.push_back(i);
  }
  return out;
}

int SubspaceView::next(int state, int slot) const {
  if (state < bigCount_) {
    const StateGraph::Target& t = s_->graph->nodes[state].targets[slot];
    return t.atom ? bigCount_ + t.atomSymbol : t.node;
  }
  SymbolId sym = state - bigCount_;
  return bigCount_ + space().symbol(sym).children[slot].symbol;
}

int SubspaceView::stateCount() const {
  return bigCount_ + s_->graph->space->symbolCount();
}

bool SubspaceView::containsIsolated(int state) const {
  if (state < bigCount_) return hasIsolatedPoint(*s_, state);
  return space().subtreeHasIsolatedBranch(state - bigCount_);
}

LassoPoint leftmostLasso(const BranchAutomaton& a, int state,
                         std::vector<int> prefix) {
  std::map<int, int> firstSeen;  // state -> position relative to prefix end
  std::vector<int> slots;
  int cur = state;
  while (true) {
    auto [it, fresh] = firstSeen.emplace(cur, static_cast<int>(slots.size()));
    if (!fresh) {
      int cycleStart = it->second;
      LassoPoint x;
      x.stem = std::move(prefix);
      x.stem.insert(x.stem.end(), slots.begin(), slots.begin() + cycleStart);
      x.cycle.assign(slots.begin() + cycleStart, slots.end());
      return x.canonical();
    }
    std::vector<int> allowed = a.allowedSlots(cur);
    if (allowed.empty()) throw std::logic_error("dead state in leftmost walk");
    slots.push_back(allowed.front());
    cur = a.next(cur, allowed.front());
  }
}

bool automatonAccepts(const BranchAutomaton& a, const LassoPoint& x) {
  LassoPoint c = x.canonical();
  a.space().walk(c);  // validity
  const int stemLen = static_cast<int>(c.stem.size());
  const int cyc = static_cast<int>(c.cycle.size());
  std::set<std::pair<int, int>> seen;  // (automaton state, lasso position key)
  int cur = a.start();
  int k = 0;
  while (true) {
    int key = k < stemLen ? k : stemLen + (k - stemLen) % cyc;
    if (k >= stemLen && !seen.insert({cur, key}).second) return true;
    int slot = c.slotAt(k);
    std::vector<int> allowed = a.allowedSlots(cur);
    if (std::find(allowed.begin(), allowed.end(), slot) == allowed.end())
      return false;
    cur = a.next(cur, slot);
    ++k;
  }
}

std::pair<Rational, WitnessPair> closedSetDistance(const BranchAutomaton& a,
                                                   const BranchAutomaton& b) {
  if (&a.space() != &b.space())
    throw std::invalid_argument("closed sets over different spaces");
  const ValidatedSpace& v = a.space();

  struct PNode {
    int sa, sb;
    int parent = -1;
    int parentSlot = -1;
    Rational minScale;
  };
  std::vector<PNode> nodes;
  std::map<std::pair<int, int>, int> ids;
  auto intern = [&](int sa, int sb) {
    auto key = std::make_pair(sa, sb);
    auto it = ids.find(key);
    if (it != ids.end()) return std::make_pair(it->second, false);
    int id = static_cast<int>(nodes.size());
    ids.emplace(key, id);
    nodes.push_back(PNode{sa, sb, -1, -1, Rational(1)});
    return std::make_pair(id, true);
  };
  intern(a.start(), b.start());

  // Build the synchronized product; a cycle in it is an infinite common
  // branch, i.e. distance zero.
  std::vector<std::vector<std::pair<int, int>>> edges;  // (slot, target id)
  std::deque<int> queue{0};
  std::vector<bool> built(1, false);
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    if (built[id]) continue;
    built[id] = true;
    if (static_cast<int>(edges.size()) <= id) edges.resize(id + 1);
    int sa = nodes[id].sa, sb = nodes[id].sb;
    if (a.symbolOf(sa) != b.symbolOf(sb))
      throw std::logic_error("synchronized walk lost symbol agreement");
    std::vector<int> sa_slots = a.allowedSlots(sa);
    std::vector<int> sb_slots = b.allowedSlots(sb);
    for (int slot : sa_slots) {
      if (std::find(sb_slots.begin(), sb_slots.end(), slot) == sb_slots.end())
        continue;
      auto [tid, fresh] = intern(a.next(sa, slot), b.next(sb, slot));
      edges[id].emplace_back(slot, tid);
      if (fresh) {
        built.resize(nodes.size(), false);
        queue.push_back(tid);
      }
    }
    edges.resize(nodes.size());
  }
  edges.resize(nodes.size());

  // Cycle detection (DFS colors) with slot-path recovery.
  {
    std::vector<int> color(nodes.size(), 0);
    std::vector<std::pair<int, int>> stack;  // (node, edge index)
    std::vector<int> pathSlots;
    for (std::size_t root = 0; root < nodes.size(); ++root) {
      if (color[root] != 0) continue;
      stack.push_back({static_cast<int>(root), 0});
      color[root] = 1;
      std::vector<int> onPath{static_cast<int>(root)};
      while (!stack.empty()) {
        auto& [u, ei] = stack.back();
        if (ei < static_cast<int>(edges[u].size())) {
          auto [slot, t] = edges[u][ei++];
          if (color[t] == 1) {
            // close the cycle: slots from t's position on the path
            pathSlots.push_back(slot);
            std::size_t pos =
                std::find(onPath.begin(), onPath.end(), t) - onPath.begin();
            LassoPoint z;
            z.stem.assign(pathSlots.begin(), pathSlots.begin() + pos);
            z.cycle.assign(pathSlots.begin() + pos, pathSlots.end());
            z = z.canonical();
            return {Rational(0), WitnessPair{z, z, Rational(0)}};
          }
          if (color[t] == 0) {
            color[t] = 1;
            stack.push_back({t, 0});
            onPath.push_back(t);
            pathSlots.push_back(slot);
          }
        } else {
          color[u] = 2;
          stack.pop_back();
          if (!stack.empty()) {
            onPath.pop_back();
            pathSlots.pop_back();
          }
        }
      }
    }
  }

  // Acyclic product: relax minimal scales, then take the best divergence.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t u = 0; u < nodes.size(); ++u)
      for (auto [slot, t] : edges[u]) {
        Rational cand =
            nodes[u].minScale *
            v.symbol(a.symbolOf(nodes[u].sa)).children[slot].scale;
        if (t == 0) continue;  // the root is never re-entered in a DAG
        if (nodes[t].parent == -1 || cand < nodes[t].minScale) {
          nodes[t].minScale = cand;
          nodes[t].parent = static_cast<int>(u);
          nodes[t].parentSlot = slot;
          changed = true;
        }
      }
  }

  std::optional<Rational> best;
  int bestNode = -1, bestI = -1, bestJ = -1;
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    SymbolId sym = a.symbolOf(nodes[u].sa);
    const auto& delta = v.symbol(sym).delta;
    for (int i : a.allowedSlots(nodes[u].sa))
      for (int j : b.allowedSlots(nodes[u].sb)) {
        if (i == j) continue;
        Rational cand = nodes[u].minScale * delta[i][j];
        if (!best || cand < *best) {
          best = cand;
          bestNode = static_cast<int>(u);
          bestI = i;
          bestJ = j;
        }
      }
  }
  if (!best) throw std::logic_error("disjoint closed sets without divergence");

  std::vector<int> path;
  for (int u = bestNode; nodes[u].parent != -1; u = nodes[u].parent)
    path.push_back(nodes[u].parentSlot);
  std::reverse(path.begin(), path.end());
  std::vector<int> pa = path, pb = path;
  pa.push_back(bestI);
  pb.push_back(bestJ);
  LassoPoint x = leftmostLasso(a, a.next(nodes[bestNode].sa, bestI), pa);
  LassoPoint y = leftmostLasso(b, b.next(nodes[bestNode].sb, bestJ), pb);
  return {*best, WitnessPair{x, y, *best}};
}

bool cylinderMeets(const Subspace& s, const Cylinder& c) {
  const StateGraph& g = *s.graph;
  g.space->symbolAt(c);  // validity
  if (g.rootIsAtom) return s.rootAtomAlive;
  if (!s.productive[0]) return false;
  int cur = 0;
  for (int slot : c.path) {
    if (!s.alive[cur][slot]) return false;
    const StateGraph::Target& t = g.nodes[cur].targets[slot];
    if (t.atom) return true;  // full subtree below an alive atom edge
    cur = t.node;
  }
  return true;
}

bool pointMeets(const Subspace& s, const LassoPoint& x) {
  if (subspaceEmpty(s)) return false;
  SubspaceView view(s);
  return automatonAccepts(view, x);
}

WitnessPair relativeDiameterWitness(const Subspace& s, int node) {
  const StateGraph& g = *s.graph;
  std::vector<Rational> d;
  std::vector<int> settled;
  relativeDiametersWithRounds(s, d, settled);
  SubspaceView view(s);

  // Rebuild a path to an attaining configuration: at each state either a
  // surviving slot pair or an atom realizes the value, or a child subtree
  // that settled in an earlier round carries it.
  std::vector<int> path;
  int cur = node;
  while (true) {
    if (d[cur].isZero()) {
      LassoPoint w = leftmostLasso(view, cur, path);
      return WitnessPair{w, w, Rational(0)};
    }
    const auto& nd = g.nodes[cur];
    const auto& delta = g.space->symbol(nd.symbol).delta;
    for (int i = 0; i < g.arity(cur); ++i) {
      if (!s.alive[cur][i]) continue;
      for (int j = i + 1; j < g.arity(cur); ++j) {
        if (!s.alive[cur][j] || nd.scale * delta[i][j] != d[cur]) continue;
        std::vector<int> pi = path, pj = path;
        pi.push_back(i);
        pj.push_back(j);
        auto follow = [&](std::vector<int> p, int slot) {
          const StateGraph::Target& t = g.nodes[cur].targets[slot];
          if (t.atom) {
            LassoPoint lp{std::move(p), {0}};
            return lp.canonical();
          }
          return leftmostLasso(view, t.node, std::move(p));
        };
        return WitnessPair{follow(pi, i), follow(pj, j), d[cur]};
      }
      const StateGraph::Target& t = g.nodes[cur].targets[i];
      if (t.atom && g.atomDiameter(t) == d[cur]) {
        Cylinder c{path};
        c.path.push_back(i);
        return g.space->diameterWitness(c);
      }
    }
    int next = -1;
    for (int i = 0; i < g.arity(cur); ++i) {
      if (!s.alive[cur][i]) continue;
      const StateGraph::Target& t = g.nodes[cur].targets[i];
      if (t.atom || d[t.node] != d[cur]) continue;
      if (next == -1 || settled[t.node] < settled[g.nodes[cur].targets[next].node])
        next = i;
    }
    if (next == -1 || settled[g.nodes[cur].targets[next].node] >= settled[cur])
      throw std::logic_error("diameter attainment chain broken");
    path.push_back(next);
    cur = g.nodes[cur].targets[next].node;
  }
}

}  // namespace topocb
