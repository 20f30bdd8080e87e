#include "topocb/catalogue.hpp"

#include <algorithm>

namespace topocb {

namespace {

SymbolDef symbolDef(std::string name,
                    std::vector<std::pair<int, Rational>> children,
                    std::vector<std::vector<Rational>> delta) {
  SymbolDef def;
  def.name = std::move(name);
  for (auto& [sym, scale] : children) def.children.push_back({sym, scale});
  def.delta = std::move(delta);
  return def;
}

std::vector<std::vector<Rational>> binaryDelta(const Rational& sep) {
  return {{Rational(0), sep}, {sep, Rational(0)}};
}

}  // namespace

CatalogueSpace makeMaximalCantor() {
  SpacePresentation p;
  p.symbols.push_back(
      symbolDef("a", {{0, Rational(1)}, {0, Rational(1)}}, binaryDelta(Rational(1))));
  p.root = 0;
  return {"cantor_max", p, "binary branching at constant separation 1"};
}

CatalogueSpace makeScaledCantor(const Rational& lambda) {
  if (lambda.sign() <= 0 || lambda >= Rational(1))
    throw std::out_of_range("scale must lie in (0, 1)");
  SpacePresentation p;
  p.symbols.push_back(
      symbolDef("a", {{0, lambda}, {0, lambda}}, binaryDelta(Rational(1))));
  p.root = 0;
  return {"cantor_scaled", p, "binary branching with shrinking edges"};
}

CatalogueSpace makePoint() {
  SpacePresentation p;
  p.symbols.push_back(
      symbolDef("p", {{0, Rational(1)}}, {{Rational(0)}}));
  p.root = 0;
  return {"point", p, "one branch"};
}

CatalogueSpace makeConvergentSequence() {
  SpacePresentation p;
  p.symbols.push_back(symbolDef("p", {{0, Rational(1)}}, {{Rational(0)}}));
  p.symbols.push_back(symbolDef(
      "s", {{0, Rational(1)}, {1, Rational(1)}}, binaryDelta(Rational(1))));
  p.root = 1;
  return {"convseq", p, "exits at pairwise distance 1 around one limit"};
}

CatalogueSpace makeShrinkingConvergentSequence() {
  SpacePresentation p;
  p.symbols.push_back(symbolDef("p", {{0, Rational(1)}}, {{Rational(0)}}));
  p.symbols.push_back(symbolDef(
      "s", {{0, Rational(1)}, {1, Rational(1, 2)}}, binaryDelta(Rational(1))));
  p.root = 1;
  return {"convseq_shrinking", p, "exit distances halve along the spine"};
}

CatalogueSpace makeTower(int k) {
  if (k < 0) throw std::out_of_range("tower height must be >= 0");
  SpacePresentation p;
  p.symbols.push_back(symbolDef("t0", {{0, Rational(1)}}, {{Rational(0)}}));
  for (int j = 1; j <= k; ++j)
    p.symbols.push_back(symbolDef(
        "t" + std::to_string(j), {{j - 1, Rational(1)}, {j, Rational(1)}},
        binaryDelta(Rational(1))));
  p.root = k;
  return {"tower" + std::to_string(k), p,
          "k nested convergent-sequence levels"};
}

CatalogueSpace makeDisjointSum(const CatalogueSpace& a, const CatalogueSpace& b,
                               const Rational& gap) {
  ValidatedSpace va = validateOrThrow(a.presentation);
  ValidatedSpace vb = validateOrThrow(b.presentation);
  Rational maxDiam =
      max(va.maxDelta(va.root()), vb.maxDelta(vb.root()));
  if (gap < maxDiam)
    throw std::out_of_range("gap " + gap.str() +
                            " below a component diameter " + maxDiam.str());
  SpacePresentation p;
  const int offsetA = 1;
  const int offsetB = 1 + static_cast<int>(a.presentation.symbols.size());
  p.symbols.push_back(symbolDef(
      "sum", {{offsetA + a.presentation.root, Rational(1)},
              {offsetB + b.presentation.root, Rational(1)}},
      binaryDelta(gap)));
  for (const SymbolDef& def : a.presentation.symbols) {
    SymbolDef copy = def;
    copy.name = "A." + copy.name;
    for (ChildRef& c : copy.children) c.symbol += offsetA;
    p.symbols.push_back(std::move(copy));
  }
  for (const SymbolDef& def : b.presentation.symbols) {
    SymbolDef copy = def;
    copy.name = "B." + copy.name;
    for (ChildRef& c : copy.children) c.symbol += offsetB;
    p.symbols.push_back(std::move(copy));
  }
  p.root = 0;
  return {"sum(" + a.name + "," + b.name + "," + gap.str() + ")", p,
          "two components at mutual distance gap"};
}

std::vector<CatalogueSpace> standardCatalogue() {
  std::vector<CatalogueSpace> out;
  out.push_back(makeMaximalCantor());
  out.push_back(makeScaledCantor(Rational(1, 2)));
  out.push_back(makePoint());
  out.push_back(makeConvergentSequence());
  out.push_back(makeShrinkingConvergentSequence());
  out.push_back(makeTower(2));
  out.push_back(
      makeDisjointSum(makeConvergentSequence(), makeConvergentSequence(),
                      Rational(1)));
  return out;
}

std::uint64_t FuzzRng::next() {
  // splitmix64
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int FuzzRng::below(int n) {
  if (n <= 0) throw std::invalid_argument("below(n) needs n > 0");
  return static_cast<int>(next() % static_cast<std::uint64_t>(n));
}

SpacePresentation fuzzPresentation(std::uint64_t seed, int sizeBudget) {
  FuzzRng rng(seed * 0x9e3779b97f4a7c15ULL + 0x51ULL);
  const int n = 1 + rng.below(std::max(1, sizeBudget));
  static const Rational scalePool[] = {Rational(1), Rational(1), Rational(1, 2),
                                       Rational(1, 4), Rational(3, 4)};
  static const Rational deltaPool[] = {Rational(1, 4), Rational(1, 2),
                                       Rational(1),    Rational(3, 2),
                                       Rational(2),    Rational(3)};
  SpacePresentation p;
  for (int s = 0; s < n; ++s) {
    SymbolDef def;
    def.name = "s" + std::to_string(s);
    int arity = 1 + rng.below(3);
    for (int i = 0; i < arity; ++i)
      def.children.push_back({rng.below(n), scalePool[rng.below(5)]});
    def.delta.assign(arity, std::vector<Rational>(arity, Rational(0)));
    for (int i = 0; i < arity; ++i)
      for (int j = i + 1; j < arity; ++j)
        def.delta[i][j] = def.delta[j][i] = deltaPool[rng.below(6)];
    p.symbols.push_back(std::move(def));
  }
  p.root = rng.below(n);

  // Repair triangle violations by min-plus closure; the closure keeps
  // symmetry, the zero diagonal and positivity.
  for (SymbolDef& def : p.symbols) {
    const int a = def.arity();
    for (int k = 0; k < a; ++k)
      for (int i = 0; i < a; ++i)
        for (int j = 0; j < a; ++j)
          if (i != j && def.delta[i][j] > def.delta[i][k] + def.delta[k][j])
            def.delta[i][j] = def.delta[i][k] + def.delta[k][j];
  }

  // Repair nesting by capping edge scales; one recomputation settles it
  // because shrinking a scale only shrinks subtree diameters.
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<Rational> md(n, Rational(0));
    for (int s = 0; s < n; ++s)
      for (const auto& row : p.symbols[s].delta)
        for (const Rational& d : row) md[s] = max(md[s], d);
    for (int round = 0; round < n + 1; ++round)
      for (int s = 0; s < n; ++s)
        for (const ChildRef& c : p.symbols[s].children)
          md[s] = max(md[s], c.scale * md[c.symbol]);
    for (int s = 0; s < n; ++s) {
      SymbolDef& def = p.symbols[s];
      for (int i = 0; i < def.arity(); ++i) {
        if (md[def.children[i].symbol].isZero()) continue;
        for (int j = 0; j < def.arity(); ++j) {
          if (i == j) continue;
          Rational bound =
              Rational(2) * def.delta[i][j] / md[def.children[i].symbol];
          if (def.children[i].scale > bound) def.children[i].scale = bound;
        }
      }
    }
  }
  return p;
}

LassoPoint fuzzLasso(const ValidatedSpace& v, FuzzRng& rng, int maxLen) {
  for (int attempt = 0; attempt < 32; ++attempt) {
    LassoPoint x;
    int stemLen = rng.below(maxLen + 1);
    int cycleLen = 1 + rng.below(3);
    SymbolId s = v.root();
    for (int k = 0; k < stemLen; ++k) {
      int slot = rng.below(v.symbol(s).arity());
      x.stem.push_back(slot);
      s = v.symbol(s).children[slot].symbol;
    }
    for (int k = 0; k < cycleLen; ++k) {
      int slot = rng.below(v.symbol(s).arity());
      x.cycle.push_back(slot);
      s = v.symbol(s).children[slot].symbol;
    }
    try {
      v.walk(x);
      return x.canonical();
    } catch (const InvalidPoint&) {
      // cycle does not close over the symbol orbit; retry
    }
  }
  // all-leftmost always closes
  LassoPoint x{{}, {0}};
  return x.canonical();
}

Cylinder fuzzCylinder(const ValidatedSpace& v, FuzzRng& rng, int maxLen) {
  Cylinder c;
  int len = rng.below(maxLen + 1);
  SymbolId s = v.root();
  for (int k = 0; k < len; ++k) {
    int slot = rng.below(v.symbol(s).arity());
    c.path.push_back(slot);
    s = v.symbol(s).children[slot].symbol;
  }
  return c;
}

}  // namespace topocb
