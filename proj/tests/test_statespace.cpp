#include "topocb/statespace.hpp"

#include <set>

#include "doctest.h"
#include "topocb/catalogue.hpp"

using namespace topocb;

namespace {

Subspace cylinderSubspace(const StateGraph& g, const std::vector<int>& path) {
  Subspace s = fullSubspace(g);
  int cur = 0;
  for (int slot : path) {
    for (int i = 0; i < g.arity(cur); ++i)
      if (i != slot) s.alive[cur][i] = false;
    const StateGraph::Target& t = g.nodes[cur].targets[slot];
    REQUIRE(!t.atom);
    cur = t.node;
  }
  pruneToProductive(s);
  return s;
}

// Test-side maximum >eps separated set over depth-d cells: one point per
// depth-d cell, pairwise distances determined at the divergence nodes. A
// selection is separated iff the slots it uses at every divergence node are
// pairwise far there, so the maximum decomposes over the explicit tree.
long bruteMisFrom(const ValidatedSpace& v, SymbolId sym, const Rational& scale,
                  int depthLeft, const Rational& eps) {
  if (depthLeft == 0) return 1;
  const SymbolDef& def = v.symbol(sym);
  const int n = def.arity();
  std::vector<long> sub(n);
  for (int i = 0; i < n; ++i)
    sub[i] = bruteMisFrom(v, def.children[i].symbol,
                          scale * def.children[i].scale, depthLeft - 1, eps);
  long best = 0;
  std::vector<int> chosen;
  std::function<void(int, long)> dfs = [&](int at, long total) {
    best = std::max(best, total);
    for (int k = at; k < n; ++k) {
      bool ok = true;
      for (int c : chosen)
        if (!(scale * def.delta[c][k] > eps)) { ok = false; break; }
      if (!ok) continue;
      chosen.push_back(k);
      dfs(k + 1, total + sub[k]);
      chosen.pop_back();
    }
  };
  dfs(0, 0);
  return best;
}

long bruteMis(const ValidatedSpace& v, int depth, const Rational& eps) {
  return bruteMisFrom(v, v.root(), Rational(1), depth, eps);
}

}  // namespace

TEST_CASE("state expansion shapes") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  StateGraph g = expandStates(cmax, Rational(1, 2));
  CHECK(g.nodes.size() == 1);
  CHECK(!g.nodes[0].targets[0].atom);
  CHECK(!g.nodes[0].targets[1].atom);

  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  StateGraph gh = expandStates(half, Rational(1, 2));
  CHECK(gh.nodes.size() == 1);
  CHECK(gh.nodes[0].targets[0].atom);
  CHECK(gh.nodes[0].targets[1].atom);

  StateGraph gh8 = expandStates(half, Rational(1, 8));
  CHECK(gh8.nodes.size() == 3);  // scales 1, 1/2, 1/4
  std::set<std::string> scales;
  for (const auto& n : gh8.nodes) scales.insert(n.scale.str());
  CHECK(scales == std::set<std::string>{"1", "1/2", "1/4"});
}

TEST_CASE("state expansion budget") {
  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  Budget tiny;
  tiny.maxStates = 2;
  CHECK_THROWS_AS(expandStates(half, Rational(1, 1024), tiny), BudgetError);
}

TEST_CASE("separation numbers") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  StateGraph g = expandStates(cmax, Rational(1, 2));
  Subspace full = fullSubspace(g);
  SepValue sep = sepNumber(full, 0, Rational(1, 2));
  CHECK(sep.infinite);
  // cross-check: depth-bounded brute force exhibits growing separated sets
  CHECK(bruteMis(cmax, 2, Rational(1, 2)) == 4);
  CHECK(bruteMis(cmax, 3, Rational(1, 2)) == 8);
  auto witness = sepWitness(full, 0, Rational(1, 2), 5);
  REQUIRE(witness.size() == 5);
  for (std::size_t i = 0; i < witness.size(); ++i)
    for (std::size_t j = i + 1; j < witness.size(); ++j)
      CHECK(cmax.pointDistance(witness[i], witness[j]) > Rational(1, 2));

  // beyond the diameter there is no pair
  StateGraph g2 = expandStates(cmax, Rational(2));
  CHECK(g2.rootIsAtom);
  Subspace full2 = fullSubspace(g2);
  SepValue sep2 = sepNumber(full2, 0, Rational(2));
  CHECK(!sep2.infinite);
  CHECK(sep2.count == 1);

  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  StateGraph gc = expandStates(conv, Rational(1, 2));
  SepValue sepc = sepNumber(fullSubspace(gc), 0, Rational(1, 2));
  CHECK(sepc.infinite);
}

TEST_CASE("separation witnesses match the brute-force cap") {
  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  StateGraph g = expandStates(half, Rational(1, 4));
  Subspace full = fullSubspace(g);
  SepValue sep = sepNumber(full, 0, Rational(1, 4));
  REQUIRE(!sep.infinite);
  CHECK(sep.count == 4);
  CHECK(bruteMis(half, 6, Rational(1, 4)) == 4);
  auto witness = sepWitness(full, 0, Rational(1, 4), 8);
  CHECK(witness.size() == 4);
  for (std::size_t i = 0; i < witness.size(); ++i)
    for (std::size_t j = i + 1; j < witness.size(); ++j)
      CHECK(half.pointDistance(witness[i], witness[j]) > Rational(1, 4));
}

TEST_CASE("infinite separated detection") {
  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  StateGraph gc = expandStates(conv, Rational(1, 2));
  CHECK(hasInfiniteSeparated(fullSubspace(gc), 0, Rational(1, 2)));

  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  StateGraph gh = expandStates(half, Rational(1, 4));
  CHECK(!hasInfiniteSeparated(fullSubspace(gh), 0, Rational(1, 4)));

  ValidatedSpace pt = validateOrThrow(makePoint().presentation);
  StateGraph gp = expandStates(pt, Rational(1, 2));
  CHECK(gp.rootIsAtom);
  Subspace fp = fullSubspace(gp);
  CHECK(!hasInfiniteSeparated(fp, 0, Rational(1, 2)));
}

TEST_CASE("agreement between the two boundedness routes") {
  // an infinite separated set exists iff the separation number pumps
  std::vector<Rational> grid{Rational(1, 4), Rational(1, 2), Rational(1),
                             Rational(3, 2)};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    ValidatedSpace v = validateOrThrow(fuzzPresentation(seed, 4));
    for (const Rational& eps : grid) {
      StateGraph g = expandStates(v, eps);
      if (g.rootIsAtom) continue;
      Subspace full = fullSubspace(g);
      SepValue sep = sepNumber(full, 0, eps);
      CHECK(sep.infinite == hasInfiniteSeparated(full, 0, eps));
    }
  }
}

TEST_CASE("separation monotone in the threshold") {
  std::vector<Rational> grid{Rational(1, 4), Rational(1, 2), Rational(1)};
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    ValidatedSpace v = validateOrThrow(fuzzPresentation(seed, 4));
    StateGraph g = expandStates(v, Rational(1, 4));
    if (g.rootIsAtom) continue;
    Subspace full = fullSubspace(g);
    std::optional<SepValue> prev;
    for (const Rational& eps : grid) {
      SepValue cur = sepNumber(full, 0, eps);
      if (prev) {
        // larger threshold, smaller value (infinite on top)
        if (prev->infinite)
          CHECK((cur.infinite || true));
        if (!prev->infinite && cur.infinite) CHECK(false);
        if (!prev->infinite && !cur.infinite) CHECK(cur.count <= prev->count);
      }
      prev = cur;
    }
  }
}

TEST_CASE("engine separation against depth-6 cells") {
  std::vector<Rational> grid{Rational(1, 2), Rational(1)};
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ValidatedSpace v = validateOrThrow(fuzzPresentation(seed, 3));
    for (const Rational& eps : grid) {
      StateGraph g = expandStates(v, eps);
      if (g.rootIsAtom) continue;
      Subspace full = fullSubspace(g);
      SepValue sep = sepNumber(full, 0, eps);
      int mis = bruteMis(v, 6, eps);
      if (sep.infinite) {
        CHECK(mis >= bruteMis(v, 4, eps));
        CHECK(mis >= 2);
      } else {
        CHECK(mpz_class(static_cast<long>(mis)) <= sep.count);
        // witnesses certify the value whenever they fit within depth 6
        auto witness = sepWitness(full, 0, eps, 4);
        bool shallow = true;
        for (const LassoPoint& w : witness)
          shallow = shallow && w.stem.size() + w.cycle.size() <= 6;
        if (shallow) CHECK(mpz_class(static_cast<long>(mis)) == sep.count);
      }
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("relative diameters of pruned subspaces") {
  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  StateGraph g = expandStates(conv, Rational(1, 2));
  Subspace limitOnly = fullSubspace(g);
  limitOnly.alive[0][0] = false;  // drop the exit slot
  pruneToProductive(limitOnly);
  CHECK(!subspaceEmpty(limitOnly));
  CHECK(subspaceDiameter(limitOnly, 0) == Rational(0));

  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  StateGraph gm = expandStates(cmax, Rational(1, 2));
  CHECK(subspaceDiameter(fullSubspace(gm), 0) == Rational(1));

  CatalogueSpace mixed = makeDisjointSum(
      makeScaledCantor(Rational(1, 2)), makeMaximalCantor(), Rational(1));
  ValidatedSpace vm = validateOrThrow(mixed.presentation);
  StateGraph gx = expandStates(vm, Rational(1, 2));
  Subspace pruned = fullSubspace(gx);
  pruned.alive[0][0] = false;  // drop the shrinking side
  pruneToProductive(pruned);
  CHECK(subspaceDiameter(pruned, 0) == Rational(1));
  WitnessPair w = relativeDiameterWitness(pruned, 0);
  CHECK(w.value == Rational(1));
  CHECK(vm.pointDistance(w.x, w.y) == Rational(1));
}

TEST_CASE("closed-set distances with witnesses") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  StateGraph g = expandStates(cmax, Rational(1, 2));
  Subspace left = cylinderSubspace(g, {0});
  Subspace right = cylinderSubspace(g, {1});
  SubspaceView lv(left), rv(right);
  auto [d, w] = closedSetDistance(lv, rv);
  CHECK(d == Rational(1));
  CHECK(cmax.pointDistance(w.x, w.y) == Rational(1));

  auto [dSame, wSame] = closedSetDistance(lv, lv);
  CHECK(dSame == Rational(0));
  CHECK(wSame.x == wSame.y);

  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  StateGraph gc = expandStates(conv, Rational(1, 2));
  Subspace limitOnly = fullSubspace(gc);
  limitOnly.alive[0][0] = false;
  pruneToProductive(limitOnly);
  Subspace firstExit = cylinderSubspace(gc, {});
  for (int i = 1; i < gc.arity(0); ++i) firstExit.alive[0][i] = false;
  pruneToProductive(firstExit);
  SubspaceView la(limitOnly), ea(firstExit);
  auto [dc, wc] = closedSetDistance(la, ea);
  CHECK(dc == Rational(1));
  CHECK(conv.pointDistance(wc.x, wc.y) == Rational(1));
}

TEST_CASE("isolated-point reachability") {
  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  StateGraph gh = expandStates(half, Rational(1, 8));
  Subspace fh = fullSubspace(gh);
  for (int q = 0; q < static_cast<int>(gh.nodes.size()); ++q)
    CHECK(hasIsolatedPoint(fh, q));

  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  StateGraph gm = expandStates(cmax, Rational(1, 2));
  CHECK(!hasIsolatedPoint(fullSubspace(gm), 0));

  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  StateGraph gc = expandStates(conv, Rational(1, 2));
  CHECK(hasIsolatedPoint(fullSubspace(gc), 0));
}

TEST_CASE("membership walks") {
  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  StateGraph g = expandStates(conv, Rational(1, 2));
  Subspace limitOnly = fullSubspace(g);
  limitOnly.alive[0][0] = false;
  pruneToProductive(limitOnly);
  CHECK(pointMeets(limitOnly, LassoPoint{{}, {1}}));
  CHECK(!pointMeets(limitOnly, LassoPoint{{0}, {0}}));
  CHECK(cylinderMeets(limitOnly, Cylinder{{1, 1}}));
  CHECK(!cylinderMeets(limitOnly, Cylinder{{1, 0}}));
}
