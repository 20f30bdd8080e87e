#include "topocb/presentation.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"
#include "topocb/catalogue.hpp"

using namespace topocb;

namespace {

// Test-side oracle: explicit path enumeration, no engine fixpoints.
struct BrutePath {
  std::vector<int> slots;
  SymbolId end;
  Rational scale;
};

std::vector<BrutePath> allPaths(const ValidatedSpace& v, SymbolId from,
                                int depth) {
  std::vector<BrutePath> frontier{{{}, from, Rational(1)}};
  std::vector<BrutePath> out = frontier;
  for (int d = 0; d < depth; ++d) {
    std::vector<BrutePath> next;
    for (const BrutePath& p : frontier) {
      const SymbolDef& def = v.symbol(p.end);
      for (int i = 0; i < def.arity(); ++i) {
        BrutePath q = p;
        q.slots.push_back(i);
        q.scale = p.scale * def.children[i].scale;
        q.end = def.children[i].symbol;
        next.push_back(q);
        out.push_back(next.back());
      }
    }
    frontier = std::move(next);
  }
  return out;
}

Rational bruteLocalMax(const ValidatedSpace& v, SymbolId s) {
  Rational m(0);
  for (const auto& row : v.symbol(s).delta)
    for (const Rational& x : row) m = max(m, x);
  return m;
}

Rational bruteMaxDelta(const ValidatedSpace& v, SymbolId s, int depth) {
  Rational best(0);
  for (const BrutePath& p : allPaths(v, s, depth))
    best = max(best, p.scale * bruteLocalMax(v, p.end));
  return best;
}

// distance of two explicit slot sequences, straight from the definition
Rational bruteDistance(const ValidatedSpace& v, const std::vector<int>& a,
                       const std::vector<int>& b) {
  SymbolId s = v.presentation().root;
  Rational scale(1);
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
    if (a[k] != b[k]) return scale * v.symbol(s).delta[a[k]][b[k]];
    scale = scale * v.symbol(s).children[a[k]].scale;
    s = v.symbol(s).children[a[k]].symbol;
  }
  throw std::logic_error("brute distance needs diverging sequences");
}

std::vector<int> expandSlots(const LassoPoint& x, int len) {
  std::vector<int> out;
  for (int k = 0; k < len; ++k) out.push_back(x.slotAt(k));
  return out;
}

const char* kCantorMaxSource = R"({
  "symbols": {
    "a": {"children": [{"symbol": "a", "scale": "1"},
                        {"symbol": "a", "scale": "1"}],
           "delta": [["0", "1"], ["1", "0"]]}
  },
  "root": "a"
})";

}  // namespace

TEST_CASE("parsing the binary space source") {
  SpacePresentation p = parsePresentation(kCantorMaxSource);
  CHECK(p.symbols.size() == 1);
  CHECK(p.symbols[0].arity() == 2);
  CHECK(p.symbols[0].delta[0][1] == Rational(1));
  CHECK(validate(p).ok());
}

TEST_CASE("parse errors carry locations") {
  CHECK_THROWS_AS(parsePresentation("{"), ParseError);

  const char* unknownRef = R"({
    "symbols": {"a": {"children": [{"symbol": "ghost", "scale": "1"}],
                       "delta": [["0"]]}},
    "root": "a"})";
  CHECK_THROWS_WITH_AS(parsePresentation(unknownRef),
                       doctest::Contains("unknown symbol"), ParseError);

  const char* badRational = R"({
    "symbols": {"a": {"children": [{"symbol": "a", "scale": "3/0"}],
                       "delta": [["0"]]}},
    "root": "a"})";
  CHECK_THROWS_WITH_AS(parsePresentation(badRational),
                       doctest::Contains("malformed rational"), ParseError);
}

TEST_CASE("validation flags degenerate separations") {
  SpacePresentation p = parsePresentation(kCantorMaxSource);
  p.symbols[0].delta[0][1] = p.symbols[0].delta[1][0] = Rational(0);
  ValidationOutcome out = validate(p);
  REQUIRE(!out.ok());
  bool positivity = false;
  for (const Violation& v : out.violations)
    positivity |= v.code == "delta-positivity";
  CHECK(positivity);
}

TEST_CASE("validation flags nesting violations") {
  // child subtree of diameter 5/2 under a separation of 1
  SpacePresentation p;
  p.symbols.push_back(SymbolDef{
      "r",
      {{1, Rational(1)}, {1, Rational(1)}},
      {{Rational(0), Rational(1)}, {Rational(1), Rational(0)}}});
  p.symbols.push_back(SymbolDef{
      "c",
      {{2, Rational(1)}, {2, Rational(1)}},
      {{Rational(0), Rational(5, 2)}, {Rational(5, 2), Rational(0)}}});
  p.symbols.push_back(SymbolDef{"p", {{2, Rational(1)}}, {{Rational(0)}}});
  p.root = 0;
  ValidationOutcome out = validate(p);
  REQUIRE(!out.ok());
  bool nesting = false;
  for (const Violation& v : out.violations) nesting |= v.code == "nesting";
  CHECK(nesting);
}

TEST_CASE("maxDelta") {
  ValidatedSpace cantorMax = validateOrThrow(makeMaximalCantor().presentation);
  CHECK(cantorMax.maxDelta(0) == Rational(1));

  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  CHECK(bruteMaxDelta(half, 0, 10) == Rational(1));
  CHECK(half.maxDelta(0) == Rational(1));

  ValidatedSpace pt = validateOrThrow(makePoint().presentation);
  CHECK(pt.maxDelta(0) == Rational(0));
}

TEST_CASE("cylinder diameter") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  CHECK(cmax.cylinderDiameter(Cylinder{{}}) == Rational(1));

  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  Cylinder depth3{{0, 1, 0}};
  // oracle: maximum pairwise distance among depth-10 refinements
  Rational best(0);
  auto paths = allPaths(half, 0, 7);
  for (const BrutePath& a : paths)
    for (const BrutePath& b : paths) {
      if (a.slots.size() != 7 || b.slots.size() != 7 || a.slots == b.slots)
        continue;
      std::vector<int> sa = depth3.path, sb = depth3.path;
      sa.insert(sa.end(), a.slots.begin(), a.slots.end());
      sb.insert(sb.end(), b.slots.begin(), b.slots.end());
      best = max(best, bruteDistance(half, sa, sb));
    }
  CHECK(best == Rational(1, 8));
  CHECK(half.cylinderDiameter(depth3) == Rational(1, 8));

  ValidatedSpace pt = validateOrThrow(makePoint().presentation);
  CHECK(pt.cylinderDiameter(Cylinder{{0, 0}}) == Rational(0));
}

TEST_CASE("point distance") {
  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  LassoPoint zeros{{}, {0}};
  LassoPoint other{{0, 1}, {0}};
  CHECK(half.pointDistance(zeros, other) == Rational(1, 2));
  CHECK(half.pointDistance(zeros, zeros) == Rational(0));

  ValidatedSpace conv =
      validateOrThrow(makeConvergentSequence().presentation);
  LassoPoint limit{{}, {1}};
  LassoPoint exitAt2{{1, 1, 0}, {0}};
  CHECK(conv.pointDistance(exitAt2, limit) == Rational(1));
  CHECK(bruteDistance(conv, expandSlots(exitAt2, 8), expandSlots(limit, 8)) ==
        Rational(1));
}

TEST_CASE("cylinder distance with witnesses") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  auto [d01, w01] = cmax.cylinderDistance(Cylinder{{0}}, Cylinder{{1}});
  CHECK(d01 == Rational(1));
  CHECK(cmax.pointDistance(w01.x, w01.y) == Rational(1));

  auto [nested, wn] = cmax.cylinderDistance(Cylinder{{0}}, Cylinder{{0, 1}});
  CHECK(nested == Rational(0));
  CHECK(wn.x == wn.y);

  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  auto [d2, w2] = half.cylinderDistance(Cylinder{{0, 0}}, Cylinder{{0, 1}});
  CHECK(d2 == Rational(1, 2));
  CHECK(half.pointDistance(w2.x, w2.y) == Rational(1, 2));
}

TEST_CASE("canonical points") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  LassoPoint a = cmax.canonicalPoint(Cylinder{{1}});
  CHECK(a.stem == std::vector<int>{1});
  CHECK(a.cycle == std::vector<int>{0});

  ValidatedSpace conv = validateOrThrow(makeConvergentSequence().presentation);
  LassoPoint b = conv.canonicalPoint(Cylinder{{}});
  CHECK(b.stem.empty());
  CHECK(b.cycle == std::vector<int>{0});

  ValidatedSpace pt = validateOrThrow(makePoint().presentation);
  LassoPoint c = pt.canonicalPoint(Cylinder{{}});
  CHECK(c.stem.empty());
  CHECK(c.cycle == std::vector<int>{0});
}

TEST_CASE("point radius includes the cylinder's own depth") {
  ValidatedSpace cmax = validateOrThrow(makeMaximalCantor().presentation);
  LassoPoint zeros{{}, {0}};
  CHECK(cmax.pointRadius(Cylinder{{}}, zeros) == Rational(1));

  ValidatedSpace half =
      validateOrThrow(makeScaledCantor(Rational(1, 2)).presentation);
  // oracle: sup of distances to depth-10 cells around 0^omega
  Rational sup(0);
  for (const BrutePath& p : allPaths(half, 0, 10)) {
    if (p.slots.size() != 10) continue;
    std::vector<int> z(10, 0);
    if (p.slots == z) continue;
    sup = max(sup, bruteDistance(half, z, p.slots));
  }
  CHECK(sup == Rational(1));
  CHECK(half.pointRadius(Cylinder{{}}, zeros) == Rational(1));

  ValidatedSpace pt = validateOrThrow(makePoint().presentation);
  CHECK(pt.pointRadius(Cylinder{{}}, LassoPoint{{}, {0}}) == Rational(0));

  CHECK_THROWS_AS(half.pointRadius(Cylinder{{1}}, zeros), InvalidPoint);
}

TEST_CASE("lasso canonical forms") {
  LassoPoint a{{0}, {0}};
  CHECK(a.canonical() == LassoPoint{{}, {0}});
  // 1,0,1,(0,1)^w is the purely periodic branch (1,0)^w
  LassoPoint b{{1, 0, 1}, {0, 1, 0, 1}};
  LassoPoint bc = b.canonical();
  CHECK(bc.cycle == std::vector<int>{1, 0});
  CHECK(bc.stem.empty());
  LassoPoint c{{}, {1, 1, 1}};
  CHECK(c.canonical().cycle == std::vector<int>{1});
}

TEST_CASE("metric axioms and valuation property on fuzzed samples") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    SpacePresentation p = fuzzPresentation(seed, 4);
    ValidationOutcome out = validate(p);
    REQUIRE_MESSAGE(out.ok(), "fuzzed presentation must validate (seed ",
                    seed, ")");
    const ValidatedSpace& v = *out.space;
    FuzzRng rng(seed + 1000);

    std::vector<LassoPoint> pts;
    for (int i = 0; i < 6; ++i) pts.push_back(fuzzLasso(v, rng, 4));
    for (const LassoPoint& x : pts)
      for (const LassoPoint& y : pts) {
        Rational dxy = v.pointDistance(x, y);
        CHECK(dxy == v.pointDistance(y, x));
        CHECK((dxy.isZero() == (x.canonical() == y.canonical())));
        for (const LassoPoint& z : pts)
          CHECK(v.pointDistance(x, z) <= dxy + v.pointDistance(y, z));
      }

    // valuation: disjoint cylinders realize one constant distance
    for (int i = 0; i < 8; ++i) {
      Cylinder c1 = fuzzCylinder(v, rng, 4), c2 = fuzzCylinder(v, rng, 4);
      auto [d, w] = v.cylinderDistance(c1, c2);
      if (d.isZero()) continue;
      CHECK(v.pointDistance(w.x, w.y) == d);
      for (int repeat = 0; repeat < 10; ++repeat) {
        LassoPoint x{c1.path, {}}, y{c2.path, {}};
        // random tails
        SymbolId s1 = v.symbolAt(c1), s2 = v.symbolAt(c2);
        for (int k = 0; k < 3; ++k) {
          int a1 = rng.below(v.symbol(s1).arity());
          x.stem.push_back(a1);
          s1 = v.symbol(s1).children[a1].symbol;
          int a2 = rng.below(v.symbol(s2).arity());
          y.stem.push_back(a2);
          s2 = v.symbol(s2).children[a2].symbol;
        }
        x.cycle = {0};
        y.cycle = {0};
        CHECK(v.pointDistance(x.canonical(), y.canonical()) == d);
      }
    }

    // diameter consistency: sampled pairs never exceed it, witness attains
    for (int i = 0; i < 4; ++i) {
      Cylinder c = fuzzCylinder(v, rng, 3);
      Rational diam = v.cylinderDiameter(c);
      WitnessPair w = v.diameterWitness(c);
      CHECK(w.value == diam);
      CHECK(v.pointDistance(w.x, w.y) == diam);
      CHECK(v.pointInCylinder(w.x, c));
      CHECK(v.pointInCylinder(w.y, c));
    }

    // completeness surrogate: nested cylinder chains keep their deepest
    // canonical point inside every level
    Cylinder chain{{}};
    std::vector<Cylinder> levels{chain};
    SymbolId s = v.root();
    for (int k = 0; k < 6; ++k) {
      int slot = rng.below(v.symbol(s).arity());
      s = v.symbol(s).children[slot].symbol;
      chain.path.push_back(slot);
      levels.push_back(chain);
    }
    LassoPoint deep = v.canonicalPoint(levels.back());
    for (const Cylinder& c : levels) CHECK(v.pointInCylinder(deep, c));
  }
}

TEST_CASE("refinement of the topology along sampled points") {
  // points closer than every scaled separation over the first k nodes agree
  // with x to depth k
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SpacePresentation p = fuzzPresentation(seed, 3);
    ValidatedSpace v = validateOrThrow(p);
    FuzzRng rng(seed + 77);
    LassoPoint x = fuzzLasso(v, rng, 3);
    const int k = 4;
    Rational minSep = Rational::infinity();
    {
      SymbolId s = v.root();
      Rational scale(1);
      for (int d = 0; d < k; ++d) {
        int slot = x.slotAt(d);
        const SymbolDef& def = v.symbol(s);
        for (int j = 0; j < def.arity(); ++j)
          if (j != slot) minSep = min(minSep, scale * def.delta[slot][j]);
        scale = scale * def.children[slot].scale;
        s = def.children[slot].symbol;
      }
    }
    for (int i = 0; i < 12; ++i) {
      LassoPoint y = fuzzLasso(v, rng, 5);
      Rational d = v.pointDistance(x, y);
      if (d < minSep)
        for (int depth = 0; depth < k; ++depth)
          CHECK(x.slotAt(depth) == y.slotAt(depth));
    }
  }
}
