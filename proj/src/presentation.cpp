#include "topocb/presentation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <sstream>

namespace topocb {

using nlohmann::json;

std::optional<SymbolId> SpacePresentation::idOf(const std::string& name) const {
  for (SymbolId i = 0; i < static_cast<SymbolId>(symbols.size()); ++i)
    if (symbols[i].name == name) return i;
  return std::nullopt;
}

namespace {

Rational parseRationalAt(const json& j, const std::string& where) {
  if (j.is_number_integer())
    return Rational(static_cast<long>(j.get<long long>()));
  if (!j.is_string()) throw ParseError(where, "expected rational string");
  try {
    return Rational::parse(j.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(where, e.what());
  }
}

}  // namespace

SpacePresentation parsePresentation(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("syntax error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("symbols") || !j.contains("root"))
    throw ParseError("", "expected object with \"symbols\" and \"root\"");
  const json& syms = j.at("symbols");
  if (!syms.is_object()) throw ParseError("symbols", "expected object");

  SpacePresentation p;
  std::map<std::string, SymbolId> ids;
  for (auto it = syms.begin(); it != syms.end(); ++it) {
    ids.emplace(it.key(), static_cast<SymbolId>(p.symbols.size()));
    p.symbols.push_back(SymbolDef{it.key(), {}, {}});
  }
  for (auto it = syms.begin(); it != syms.end(); ++it) {
    SymbolDef& def = p.symbols[ids.at(it.key())];
    const std::string base = "symbols." + it.key();
    const json& body = it.value();
    if (!body.is_object() || !body.contains("children") ||
        !body.contains("delta"))
      throw ParseError(base, "expected {\"children\": [...], \"delta\": [...]}");
    const json& children = body.at("children");
    if (!children.is_array()) throw ParseError(base + ".children", "expected array");
    for (std::size_t k = 0; k < children.size(); ++k) {
      const std::string where = base + ".children[" + std::to_string(k) + "]";
      const json& c = children[k];
      if (!c.is_object() || !c.contains("symbol") || !c.contains("scale"))
        throw ParseError(where, "expected {\"symbol\": name, \"scale\": rational}");
      const std::string target = c.at("symbol").get<std::string>();
      auto tid = ids.find(target);
      if (tid == ids.end())
        throw ParseError(where, "unknown symbol reference '" + target + "'");
      def.children.push_back(
          ChildRef{tid->second, parseRationalAt(c.at("scale"), where + ".scale")});
    }
    const json& delta = body.at("delta");
    if (!delta.is_array()) throw ParseError(base + ".delta", "expected matrix");
    for (std::size_t r = 0; r < delta.size(); ++r) {
      const json& row = delta[r];
      if (!row.is_array())
        throw ParseError(base + ".delta[" + std::to_string(r) + "]",
                         "expected row");
      std::vector<Rational> out;
      for (std::size_t cidx = 0; cidx < row.size(); ++cidx)
        out.push_back(parseRationalAt(
            row[cidx], base + ".delta[" + std::to_string(r) + "][" +
                           std::to_string(cidx) + "]"));
      def.delta.push_back(std::move(out));
    }
  }
  const std::string rootName = j.at("root").get<std::string>();
  auto rid = ids.find(rootName);
  if (rid == ids.end())
    throw ParseError("root", "unknown symbol reference '" + rootName + "'");
  p.root = rid->second;
  return p;
}

std::string presentationToJson(const SpacePresentation& p) {
  json syms = json::object();
  for (const SymbolDef& def : p.symbols) {
    json children = json::array();
    for (const ChildRef& c : def.children)
      children.push_back(
          {{"symbol", p.symbols[c.symbol].name}, {"scale", c.scale.str()}});
    json delta = json::array();
    for (const auto& row : def.delta) {
      json r = json::array();
      for (const Rational& v : row) r.push_back(v.str());
      delta.push_back(r);
    }
    syms[def.name] = {{"children", children}, {"delta", delta}};
  }
  json out = {{"root", p.symbols[p.root].name}, {"symbols", syms}};
  return out.dump();
}

std::string LassoPoint::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < stem.size(); ++i)
    os << (i ? "," : "") << stem[i];
  os << ":";
  for (std::size_t i = 0; i < cycle.size(); ++i)
    os << (i ? "," : "") << cycle[i];
  return os.str();
}

std::string Cylinder::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < path.size(); ++i)
    os << (i ? "," : "") << path[i];
  return os.str();
}

LassoPoint LassoPoint::canonical() const {
  if (cycle.empty()) throw InvalidPoint("lasso with empty cycle");
  LassoPoint out = *this;
  // Primitive cycle: smallest divisor period.
  int n = static_cast<int>(out.cycle.size());
  for (int d = 1; d < n; ++d) {
    if (n % d != 0) continue;
    bool periodic = true;
    for (int i = d; i < n && periodic; ++i)
      periodic = out.cycle[i] == out.cycle[i % d];
    if (periodic) {
      out.cycle.resize(d);
      break;
    }
  }
  // Minimal stem: absorb trailing stem entries into the cycle rotation.
  while (!out.stem.empty() && out.stem.back() == out.cycle.back()) {
    out.cycle.insert(out.cycle.begin(), out.cycle.back());
    out.cycle.pop_back();
    out.stem.pop_back();
  }
  return out;
}

void ValidatedSpace::checkPath(const Cylinder& c) const {
  SymbolId s = p_.root;
  for (std::size_t i = 0; i < c.path.size(); ++i) {
    const SymbolDef& def = p_.symbol(s);
    if (c.path[i] < 0 || c.path[i] >= def.arity())
      throw InvalidPoint("invalid path slot " + std::to_string(c.path[i]) +
                         " at depth " + std::to_string(i) + " (symbol " +
                         def.name + ")");
    s = def.children[c.path[i]].symbol;
  }
}

SymbolId ValidatedSpace::symbolAt(const Cylinder& c) const {
  checkPath(c);
  SymbolId s = p_.root;
  for (int slot : c.path) s = p_.symbol(s).children[slot].symbol;
  return s;
}

Rational ValidatedSpace::cylinderScale(const Cylinder& c) const {
  checkPath(c);
  Rational scale(1);
  SymbolId s = p_.root;
  for (int slot : c.path) {
    scale *= p_.symbol(s).children[slot].scale;
    s = p_.symbol(s).children[slot].symbol;
  }
  return scale;
}

Rational ValidatedSpace::cylinderDiameter(const Cylinder& c) const {
  return cylinderScale(c) * maxDelta(symbolAt(c));
}

LassoNodes ValidatedSpace::walk(const LassoPoint& x) const {
  if (x.cycle.empty()) throw InvalidPoint("lasso with empty cycle");
  LassoNodes out;
  SymbolId s = p_.root;
  Rational scale(1);
  const int stemLen = static_cast<int>(x.stem.size());
  const int cyc = static_cast<int>(x.cycle.size());
  // Keyed by (symbol, position in cycle); the orbit repeats once a key does.
  std::map<std::pair<SymbolId, int>, int> seen;
  int depth = 0;
  int firstRepeat = -1, repeatOf = -1;
  while (true) {
    if (depth >= stemLen) {
      auto key = std::make_pair(s, (depth - stemLen) % cyc);
      auto [it, fresh] = seen.emplace(key, depth);
      if (!fresh) {
        firstRepeat = depth;
        repeatOf = it->second;
        break;
      }
    }
    int slot = x.slotAt(depth);
    const SymbolDef& def = p_.symbol(s);
    if (slot < 0 || slot >= def.arity())
      throw InvalidPoint("lasso slot " + std::to_string(slot) +
                         " out of range at depth " + std::to_string(depth) +
                         " (symbol " + def.name + ")");
    out.symbol.push_back(s);
    out.scale.push_back(scale);
    out.slot.push_back(slot);
    scale *= def.children[slot].scale;
    s = def.children[slot].symbol;
    ++depth;
  }
  out.prefixLen = repeatOf;
  out.period = firstRepeat - repeatOf;
  out.periodScale = out.scale[repeatOf].isZero()
                        ? Rational(1)
                        : scale / out.scale[repeatOf];
  out.symbol.resize(out.totalLen());
  out.scale.resize(out.totalLen());
  out.slot.resize(out.totalLen());
  return out;
}

bool ValidatedSpace::pointInCylinder(const LassoPoint& x,
                                     const Cylinder& c) const {
  checkPath(c);
  walk(x);
  for (int k = 0; k < c.depth(); ++k)
    if (x.slotAt(k) != c.path[k]) return false;
  return true;
}

Rational ValidatedSpace::pointDistance(const LassoPoint& x,
                                       const LassoPoint& y) const {
  LassoPoint cx = x.canonical(), cy = y.canonical();
  walk(cx);
  walk(cy);
  if (cx == cy) return Rational(0);
  long bound = static_cast<long>(std::max(cx.stem.size(), cy.stem.size())) +
               std::lcm(static_cast<long>(cx.cycle.size()),
                        static_cast<long>(cy.cycle.size())) +
               1;
  SymbolId s = p_.root;
  Rational scale(1);
  for (long k = 0; k < bound; ++k) {
    int i = cx.slotAt(static_cast<int>(k));
    int j = cy.slotAt(static_cast<int>(k));
    const SymbolDef& def = p_.symbol(s);
    if (i != j) return scale * def.delta[i][j];
    scale *= def.children[i].scale;
    s = def.children[i].symbol;
  }
  throw std::logic_error("distinct canonical lassos did not diverge");
}

LassoPoint ValidatedSpace::canonicalPoint(const Cylinder& c) const {
  checkPath(c);
  LassoPoint x{c.path, {0}};
  return x.canonical();
}

Rational ValidatedSpace::pointRadius(const Cylinder& c,
                                     const LassoPoint& x) const {
  if (!pointInCylinder(x, c))
    throw InvalidPoint("point does not pass through the cylinder");
  LassoNodes nodes = walk(x);
  // Contributions repeat (scaled by the period factor <= 1) past the
  // prefix, so the sup over depths >= |c| is reached within one period.
  int from = c.depth();
  int upto = std::max(from, nodes.prefixLen) + nodes.period;
  Rational best(0);
  SymbolId s = p_.root;
  Rational scale(1);
  for (int k = 0; k < upto; ++k) {
    const SymbolDef& def = p_.symbol(s);
    int i = x.slotAt(k);
    if (k >= from) {
      for (int j = 0; j < def.arity(); ++j)
        if (j != i) best = max(best, scale * def.delta[i][j]);
    }
    scale *= def.children[i].scale;
    s = def.children[i].symbol;
  }
  return best;
}

std::pair<Rational, WitnessPair> ValidatedSpace::cylinderDistance(
    const Cylinder& a, const Cylinder& b) const {
  checkPath(a);
  checkPath(b);
  std::size_t common = 0;
  while (common < a.path.size() && common < b.path.size() &&
         a.path[common] == b.path[common])
    ++common;
  if (common == a.path.size() || common == b.path.size()) {
    const Cylinder& deeper = a.path.size() >= b.path.size() ? a : b;
    LassoPoint w = canonicalPoint(deeper);
    return {Rational(0), WitnessPair{w, w, Rational(0)}};
  }
  SymbolId s = p_.root;
  Rational scale(1);
  for (std::size_t k = 0; k < common; ++k) {
    scale *= p_.symbol(s).children[a.path[k]].scale;
    s = p_.symbol(s).children[a.path[k]].symbol;
  }
  Rational value = scale * p_.symbol(s).delta[a.path[common]][b.path[common]];
  WitnessPair w{canonicalPoint(a), canonicalPoint(b), value};
  return {value, w};
}

WitnessPair ValidatedSpace::diameterWitness(const Cylinder& c) const {
  SymbolId s = symbolAt(c);
  Rational scale = cylinderScale(c);
  if ((scale * maxDelta(s)).isZero()) {
    LassoPoint w = canonicalPoint(c);
    return WitnessPair{w, w, Rational(0)};
  }
  // Descend along the attainment chain of the maxDelta fixpoint until the
  // local pair maximum realizes the value.
  std::vector<int> path = c.path;
  while (localMax(s) != maxDelta(s)) {
    const SymbolDef& def = p_.symbol(s);
    int next = -1;
    // Prefer a child attaining the value in fewer rounds; one always exists
    // because the fixpoint value is realized on a simple path.
    for (int i = 0; i < def.arity(); ++i) {
      if (def.children[i].scale * maxDelta(def.children[i].symbol) ==
          maxDelta(s)) {
        if (next == -1 ||
            attainRound_[def.children[i].symbol] < attainRound_[def.children[next].symbol])
          next = i;
      }
    }
    if (next == -1) throw std::logic_error("maxDelta attainment chain broken");
    path.push_back(next);
    scale *= def.children[next].scale;
    s = def.children[next].symbol;
  }
  const SymbolDef& def = p_.symbol(s);
  for (int i = 0; i < def.arity(); ++i)
    for (int j = 0; j < def.arity(); ++j)
      if (i != j && def.delta[i][j] == localMax(s)) {
        Cylinder ci{path}, cj{path};
        ci.path.push_back(i);
        cj.path.push_back(j);
        Rational value = scale * def.delta[i][j];
        return WitnessPair{canonicalPoint(ci), canonicalPoint(cj), value};
      }
  throw std::logic_error("local delta maximum not found");
}

namespace {

std::string slotPair(const SpacePresentation& p, SymbolId s, int i, int j) {
  return p.symbols[s].name + "[" + std::to_string(i) + "," + std::to_string(j) +
         "]";
}

}  // namespace

ValidationOutcome validate(const SpacePresentation& p) {
  ValidationOutcome out;
  auto flag = [&](std::string code, std::string where, std::string msg) {
    out.violations.push_back(
        Violation{std::move(code), std::move(where), std::move(msg)});
  };

  if (p.symbols.empty()) {
    flag("empty-presentation", "", "no symbols defined");
    return out;
  }
  if (p.root < 0 || p.root >= static_cast<SymbolId>(p.symbols.size())) {
    flag("unresolved-root", "root", "root symbol out of range");
    return out;
  }

  bool shapeOk = true;
  for (SymbolId s = 0; s < static_cast<SymbolId>(p.symbols.size()); ++s) {
    const SymbolDef& def = p.symbols[s];
    const int n = def.arity();
    if (n < 1) {
      flag("no-children", def.name, "symbol must have at least one child");
      shapeOk = false;
      continue;
    }
    for (int i = 0; i < n; ++i) {
      if (def.children[i].symbol < 0 ||
          def.children[i].symbol >= static_cast<SymbolId>(p.symbols.size())) {
        flag("unresolved-symbol", def.name + "[" + std::to_string(i) + "]",
             "child reference out of range");
        shapeOk = false;
      }
      if (def.children[i].scale.sign() <= 0 ||
          def.children[i].scale > Rational(1)) {
        flag("scale-range", def.name + "[" + std::to_string(i) + "]",
             "scale must lie in (0, 1], got " + def.children[i].scale.str());
        shapeOk = false;
      }
    }
    if (def.delta.size() != static_cast<std::size_t>(n)) {
      flag("delta-shape", def.name, "delta must be a square matrix over slots");
      shapeOk = false;
      continue;
    }
    for (int i = 0; i < n; ++i)
      if (def.delta[i].size() != static_cast<std::size_t>(n)) {
        flag("delta-shape", def.name, "delta row " + std::to_string(i) +
                                          " has wrong length");
        shapeOk = false;
      }
    if (!shapeOk) continue;
    for (int i = 0; i < n; ++i) {
      if (!def.delta[i][i].isZero())
        flag("delta-diagonal", slotPair(p, s, i, i), "diagonal must be zero");
      for (int j = 0; j < n; ++j) {
        if (def.delta[i][j] != def.delta[j][i])
          flag("delta-symmetry", slotPair(p, s, i, j),
               "delta must be symmetric");
        if (i != j && def.delta[i][j].sign() <= 0)
          flag("delta-positivity", slotPair(p, s, i, j),
               "off-diagonal separation must be strictly positive");
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (def.delta[i][k] > def.delta[i][j] + def.delta[j][k]) {
            flag("local-triangle", slotPair(p, s, i, k),
                 "delta(" + std::to_string(i) + "," + std::to_string(k) +
                     ") exceeds the detour via " + std::to_string(j));
            j = k = n;  // one report per pair
          }
  }
  if (!out.violations.empty() || !shapeOk) return out;

  // maxDelta fixpoint in the (max, *) semiring. Edge multipliers are <= 1,
  // so the sup is attained on a simple path and |symbols| rounds settle it.
  const int V = static_cast<int>(p.symbols.size());
  std::vector<Rational> localMax(V, Rational(0));
  for (SymbolId s = 0; s < V; ++s)
    for (int i = 0; i < p.symbols[s].arity(); ++i)
      for (int j = 0; j < p.symbols[s].arity(); ++j)
        localMax[s] = max(localMax[s], p.symbols[s].delta[i][j]);
  std::vector<Rational> md = localMax;
  std::vector<int> attainRound(V, 0);
  for (int round = 1; round <= V + 1; ++round) {
    bool changed = false;
    std::vector<Rational> next = md;
    for (SymbolId s = 0; s < V; ++s)
      for (const ChildRef& c : p.symbols[s].children) {
        Rational via = c.scale * md[c.symbol];
        if (via > next[s]) {
          next[s] = via;
          attainRound[s] = round;
          changed = true;
        }
      }
    md = std::move(next);
    if (!changed) break;
    if (round == V + 1)
      throw std::logic_error("maxDelta fixpoint failed to settle");
  }

  for (SymbolId s = 0; s < V; ++s) {
    const SymbolDef& def = p.symbols[s];
    for (int i = 0; i < def.arity(); ++i)
      for (int j = 0; j < def.arity(); ++j)
        if (i != j && def.children[i].scale * md[def.children[i].symbol] >
                          Rational(2) * def.delta[i][j])
          flag("nesting", slotPair(p, s, i, j),
               "scaled child diameter " +
                   (def.children[i].scale * md[def.children[i].symbol]).str() +
                   " exceeds twice the separation " + def.delta[i][j].str());
  }
  if (!out.violations.empty()) return out;

  // Reachability of isolated branches in full subtrees: a branch whose
  // cylinder radii decay to zero exists below s iff s reaches a cycle that
  // either shrinks (contains a scale < 1 edge) or is deterministic
  // (single-child symbols only).
  std::vector<std::vector<bool>> reach(V, std::vector<bool>(V, false));
  for (SymbolId s = 0; s < V; ++s)
    for (const ChildRef& c : p.symbols[s].children) reach[s][c.symbol] = true;
  for (int k = 0; k < V; ++k)
    for (int i = 0; i < V; ++i)
      if (reach[i][k])
        for (int j = 0; j < V; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::vector<bool> goodAnchor(V, false);
  for (SymbolId s = 0; s < V; ++s) {
    for (int i = 0; i < p.symbols[s].arity(); ++i) {
      const ChildRef& c = p.symbols[s].children[i];
      if (c.scale < Rational(1) && reach[c.symbol][s]) goodAnchor[s] = true;
    }
  }
  // Deterministic cycles: cycles within the single-child subgraph.
  for (SymbolId s = 0; s < V; ++s) {
    if (p.symbols[s].arity() != 1) continue;
    SymbolId t = p.symbols[s].children[0].symbol;
    // follow single-child chain from s; a revisit of s closes the cycle
    std::vector<bool> seen(V, false);
    SymbolId cur = t;
    bool cycles = (t == s);
    while (!cycles && p.symbols[cur].arity() == 1 && !seen[cur]) {
      seen[cur] = true;
      cur = p.symbols[cur].children[0].symbol;
      if (cur == s) cycles = true;
    }
    if (cycles) goodAnchor[s] = true;
  }
  std::vector<bool> hasIsol(V, false);
  for (SymbolId s = 0; s < V; ++s) {
    hasIsol[s] = goodAnchor[s];
    for (SymbolId t = 0; t < V && !hasIsol[s]; ++t)
      hasIsol[s] = reach[s][t] && goodAnchor[t];
  }

  ValidatedSpace space(p);
  space.maxDelta_ = std::move(md);
  space.localMax_ = std::move(localMax);
  space.attainRound_ = std::move(attainRound);
  space.hasIsol_ = std::move(hasIsol);
  out.space.emplace(std::move(space));
  return out;
}

ValidatedSpace validateOrThrow(const SpacePresentation& p) {
  ValidationOutcome out = validate(p);
  if (!out.ok()) {
    std::string msg = "presentation invalid:";
    for (const Violation& v : out.violations)
      msg += "\n  [" + v.code + "] " + v.where + ": " + v.message;
    throw std::runtime_error(msg);
  }
  return std::move(*out.space);
}

}  // namespace topocb
