#include "confinv/parse.hpp"

#include <cctype>
#include <map>
#include <sstream>

#include "view.hpp"

namespace confinv {

namespace {

struct Cursor {
  const std::string& s;
  std::size_t p = 0;

  void skip() { while (p < s.size() && std::isspace(unsigned(s[p]))) ++p; }
  bool eof() { skip(); return p >= s.size(); }
  char peek() { skip(); return p < s.size() ? s[p] : '\0'; }
  bool eat(char c) {
    skip();
    if (p < s.size() && s[p] == c) { ++p; return true; }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }
  bool eat_word(const char* w) {
    skip();
    std::size_t q = p, i = 0;
    while (w[i] && q < s.size() && s[q] == w[i]) { ++q; ++i; }
    if (w[i]) return false;
    // a word match must not be a prefix of a longer identifier
    if (q < s.size() && (std::isalnum(unsigned(s[q])) || s[q] == '_')) return false;
    p = q;
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw Error("SyntaxError", msg + " at position " + std::to_string(p));
  }

  std::int64_t integer() {
    skip();
    std::size_t q = p;
    bool neg = false;
    if (q < s.size() && (s[q] == '-' || s[q] == '+')) { neg = s[q] == '-'; ++q; }
    if (q >= s.size() || !std::isdigit(unsigned(s[q]))) fail("expected integer");
    std::int64_t v = 0;
    while (q < s.size() && std::isdigit(unsigned(s[q]))) {
      v = v * 10 + (s[q] - '0');
      ++q;
    }
    p = q;
    return neg ? -v : v;
  }

  std::string ident() {
    skip();
    std::size_t q = p;
    if (q >= s.size() || !(std::isalpha(unsigned(s[q])) || s[q] == '_'))
      fail("expected index name");
    while (q < s.size() && (std::isalnum(unsigned(s[q])) || s[q] == '_')) ++q;
    std::string r = s.substr(p, q - p);
    p = q;
    return r;
  }
};

struct RawFactor {
  Factor f;
  std::vector<std::string> names;  // one per slot
};

// polynomial in N:  term := [rational ["*"]] ["N" ["^" k]]
PolyN parse_poly(Cursor& c) {
  PolyN acc;
  int sign = 1;
  if (c.eat('-')) sign = -1;
  else c.eat('+');
  for (;;) {
    Rational coef(sign);
    bool have_num = false;
    c.skip();
    if (c.p < c.s.size() && std::isdigit(unsigned(c.s[c.p]))) {
      std::int64_t num = c.integer();
      std::int64_t den = 1;
      if (c.eat('/')) den = c.integer();
      coef = Rational(sign) * Rational(num, den);
      have_num = true;
      c.eat('*');
    }
    int pow = 0;
    if (c.eat_word("N")) {
      pow = 1;
      if (c.eat('^')) pow = int(c.integer());
    } else if (!have_num) {
      c.fail("expected polynomial term");
    }
    std::vector<Rational> mono(std::size_t(pow) + 1);
    mono[std::size_t(pow)] = coef;
    acc = acc + PolyN(std::move(mono));
    if (c.eat('-')) sign = -1;
    else if (c.eat('+')) sign = 1;
    else break;
  }
  return acc;
}

std::vector<std::string> bracket_groups(Cursor& c, std::vector<std::vector<std::string>>& groups) {
  // reads "[ idx* (; idx*)* ]" into groups; returns flat list
  groups.clear();
  groups.emplace_back();
  c.expect('[');
  for (;;) {
    if (c.eat(']')) break;
    if (c.eat(';')) { groups.emplace_back(); continue; }
    groups.back().push_back(c.ident());
  }
  std::vector<std::string> flat;
  for (auto& g : groups) flat.insert(flat.end(), g.begin(), g.end());
  return flat;
}

RawFactor parse_factor(Cursor& c) {
  std::vector<std::string> dpre;
  while (c.eat_word("D")) {
    c.expect('[');
    dpre.push_back(c.ident());
    c.expect(']');
  }

  RawFactor r;
  std::vector<std::vector<std::string>> groups;
  auto arity_check = [&](bool ok) {
    if (!ok) throw Error("IndexArityError", "factor has a malformed slot list");
  };

  if (c.eat_word("Rm")) {
    auto flat = bracket_groups(c, groups);
    r.f.kind = FactorKind::Riemann;
    if (groups.size() == 1) {
      arity_check(flat.size() == 4);
      r.f.deriv = 0;
    } else {
      arity_check(groups.size() == 2 && groups[1].size() == 4);
      r.f.deriv = int(groups[0].size());
    }
    r.names = flat;
  } else if (c.eat_word("Ric")) {
    auto flat = bracket_groups(c, groups);
    r.f.kind = FactorKind::Ricci;
    if (groups.size() == 1) {
      arity_check(flat.size() == 2);
      r.f.deriv = 0;
    } else {
      arity_check(groups.size() == 2 && groups[1].size() == 2);
      r.f.deriv = int(groups[0].size());
    }
    r.names = flat;
  } else if (c.eat_word("Sc")) {
    r.f.kind = FactorKind::ScalarR;
  } else if (c.eat_word("Xi")) {
    auto flat = bracket_groups(c, groups);
    arity_check(groups.size() == 1 && flat.size() == 1);
    r.f.kind = FactorKind::Xi;
    r.names = flat;
  } else if (c.eat_word("SXi")) {
    auto flat = bracket_groups(c, groups);
    arity_check(groups.size() == 2 && groups[1].size() == 1 && !groups[0].empty());
    r.f.kind = FactorKind::SXi;
    r.f.deriv = int(groups[0].size());
    r.names = flat;
  } else if (c.eat_word("SGamma")) {
    auto flat = bracket_groups(c, groups);
    r.f.kind = FactorKind::SGamma;
    if (groups.size() == 2) {
      arity_check(groups[0].size() == 2 && groups[1].size() == 1);
      r.f.deriv = 0;
    } else {
      arity_check(groups.size() == 3 && groups[1].size() == 2 && groups[2].size() == 1);
      r.f.deriv = int(groups[0].size());
    }
    r.names = flat;
  } else if (c.eat_word("g")) {
    auto flat = bracket_groups(c, groups);
    arity_check(groups.size() == 1 && flat.size() == 2);
    r.f.kind = FactorKind::Metric;
    r.names = flat;
  } else {
    // Psi<d>, Omega<d>, SpXi<d>
    c.skip();
    auto tagged = [&](const char* w) -> int {
      std::size_t save = c.p;
      std::size_t wl = std::string(w).size();
      if (c.s.compare(c.p, wl, w) != 0) return -1;
      std::size_t q = c.p + wl;
      if (q >= c.s.size() || !std::isdigit(unsigned(c.s[q]))) { c.p = save; return -1; }
      int tag = c.s[q] - '0';
      c.p = q + 1;
      return tag;
    };
    // optional single-digit tag after Omega/SpXi, required after Psi
    auto eat_prefix = [&](const char* w) {
      c.skip();
      std::size_t wl = std::string(w).size();
      if (c.s.compare(c.p, wl, w) != 0) return false;
      std::size_t q = c.p + wl;
      // must be followed by a digit or '[' so identifiers are not split
      if (q < c.s.size() && (std::isdigit(unsigned(c.s[q])) || c.s[q] == '['))
        { c.p = q; return true; }
      return false;
    };
    auto opt_digit = [&]() {
      c.skip();
      if (c.p < c.s.size() && std::isdigit(unsigned(c.s[c.p])))
        return int(c.s[c.p++] - '0');
      return 0;
    };
    int tag;
    if ((tag = tagged("Psi")) >= 0) {
      r.f.kind = FactorKind::Psi;
      r.f.label = tag;
      if (c.peek() == '[') {
        auto flat = bracket_groups(c, groups);
        arity_check(groups.size() == 1);
        r.f.deriv = int(flat.size());
        r.names = flat;
      }
    } else if (eat_prefix("Omega")) {
      r.f.label = opt_digit();
      auto flat = bracket_groups(c, groups);
      arity_check(groups.size() == 1);
      r.f.kind = FactorKind::Omega;
      r.f.rank = int(flat.size());
      r.names = flat;
    } else if (eat_prefix("SpXi")) {
      r.f.label = opt_digit();
      auto flat = bracket_groups(c, groups);
      arity_check(groups.size() == 2 && groups[1].size() == 1);
      r.f.kind = FactorKind::SpecialXi;
      r.f.rank = int(groups[0].size());
      r.names = flat;
    } else {
      c.fail("unknown factor");
    }
  }

  if (!dpre.empty()) {
    if (r.f.kind == FactorKind::ScalarR) {
      // derivative of the curvature scalar: keep it a Ricci divergence form
      throw Error("IndexArityError",
                  "D[] on Sc is not a factor; use 2*D[...]Ric with a traced slot");
    }
    if (r.f.kind == FactorKind::Xi && dpre.size() >= 1) {
      // grad of Xi is only stored symmetrized; reject to avoid silent lies
      throw Error("IndexArityError", "D[] on Xi: use SXi");
    }
    if (r.f.kind != FactorKind::Riemann && r.f.kind != FactorKind::Ricci &&
        r.f.kind != FactorKind::Psi)
      throw Error("IndexArityError", "D[] prefix not supported for this factor");
    r.f.deriv += int(dpre.size());
    r.names.insert(r.names.begin(), dpre.begin(), dpre.end());
  }
  if (int(r.names.size()) != r.f.arity())
    throw Error("IndexArityError", "slot count does not match factor kind");
  return r;
}

Term parse_term(Cursor& c, int sign) {
  Term t;
  t.scalar = Rational(sign);

  // optional coefficient
  c.skip();
  if (c.p < c.s.size() && (std::isdigit(unsigned(c.s[c.p])))) {
    std::int64_t num = c.integer();
    std::int64_t den = 1;
    if (c.eat('/')) den = c.integer();
    t.scalar *= Rational(num, den);
    c.expect('*');
  }
  if (c.peek() == '[') {
    c.expect('[');
    PolyN numpoly = parse_poly(c);
    PolyN denpoly(Rational(1));
    if (c.eat('/')) denpoly = parse_poly(c);
    t.qofn = RationalFnN(std::move(numpoly), std::move(denpoly));
    c.expect(']');
    c.expect('*');
  }

  if (!c.eat_word("contr")) c.fail("expected contr(...)");
  c.expect('(');
  std::vector<RawFactor> raws;
  raws.push_back(parse_factor(c));
  while (c.eat('*')) raws.push_back(parse_factor(c));
  c.expect(')');

  // index names -> links
  std::map<std::string, std::vector<Slot>> uses;
  std::vector<std::string> order;
  for (int fi = 0; fi < int(raws.size()); ++fi) {
    t.c.factors.push_back(raws[fi].f);
    for (int si = 0; si < int(raws[fi].names.size()); ++si) {
      auto& u = uses[raws[fi].names[si]];
      if (u.empty()) order.push_back(raws[fi].names[si]);
      u.push_back({fi, si});
    }
  }
  std::vector<std::pair<Slot, Slot>> pairs;
  std::vector<Slot> free;
  for (const auto& name : order) {
    const auto& u = uses[name];
    if (u.size() == 1) free.push_back(u[0]);
    else if (u.size() == 2) pairs.emplace_back(u[0], u[1]);
    else throw Error("RepeatedLabelError", "index '" + name + "' used " +
                     std::to_string(u.size()) + " times");
  }
  t.c = make_contraction(std::move(t.c.factors), std::move(pairs), std::move(free));
  return t;
}

std::string link_name(int k) {
  // a, b, ..., z, aa, ab, ...
  std::string s;
  ++k;
  while (k > 0) {
    --k;
    s.insert(s.begin(), char('a' + k % 26));
    k /= 26;
  }
  return s;
}

}  // namespace

LinComb parse(const std::string& text) {
  Cursor c{text};
  LinComb l;
  l.allow_mixed_weight = true;  // homogeneity is the caller's contract
  int sign = 1;
  if (c.eat('-')) sign = -1;
  else c.eat('+');
  l.terms.push_back(parse_term(c, sign));
  for (;;) {
    if (c.eof()) break;
    if (c.eat('+')) sign = 1;
    else if (c.eat('-')) sign = -1;
    else c.fail("expected '+' or '-'");
    l.terms.push_back(parse_term(c, sign));
  }
  return l;
}

std::string serialize_text(const Term& t) {
  std::ostringstream os;
  if (t.scalar != Rational(1)) os << t.scalar.str() << " * ";
  if (!(t.qofn == RationalFnN(Rational(1))))
    os << "[" << t.qofn.num().str()
       << (t.qofn.den() == PolyN(Rational(1)) ? "" : " / " + t.qofn.den().str())
       << "] * ";
  os << "contr(";

  detail::TView v = detail::to_view(t);
  detail::tidy(v);
  std::map<int, std::string> fname;
  for (std::size_t k = 0; k < t.c.free.size(); ++k)
    fname[-1 - int(k)] = "u" + std::to_string(k);
  auto nm = [&](int l) { return l < 0 ? fname[l] : link_name(l); };

  for (int fi = 0; fi < int(v.fs.size()); ++fi) {
    if (fi) os << " * ";
    const auto& f = v.fs[fi];
    auto emit_range = [&](int a, int b) {
      for (int i = a; i < b; ++i) os << (i > a ? " " : "") << nm(f.lab[i]);
    };
    switch (f.f.kind) {
      case FactorKind::Riemann:
        os << "Rm[";
        if (f.f.deriv) { emit_range(0, f.f.deriv); os << " ; "; }
        emit_range(f.f.deriv, f.f.deriv + 4);
        os << "]";
        break;
      case FactorKind::Ricci:
        os << "Ric[";
        if (f.f.deriv) { emit_range(0, f.f.deriv); os << " ; "; }
        emit_range(f.f.deriv, f.f.deriv + 2);
        os << "]";
        break;
      case FactorKind::ScalarR: os << "Sc"; break;
      case FactorKind::Psi:
        os << "Psi" << f.f.label;
        if (f.f.deriv) { os << "["; emit_range(0, f.f.deriv); os << "]"; }
        break;
      case FactorKind::Xi: os << "Xi[" << nm(f.lab[0]) << "]"; break;
      case FactorKind::SXi:
        os << "SXi[";
        emit_range(0, f.f.deriv);
        os << " ; " << nm(f.lab[f.f.deriv]) << "]";
        break;
      case FactorKind::SGamma:
        os << "SGamma[";
        if (f.f.deriv) { emit_range(0, f.f.deriv); os << " ; "; }
        emit_range(f.f.deriv, f.f.deriv + 2);
        os << " ; " << nm(f.lab[f.f.deriv + 2]) << "]";
        break;
      case FactorKind::Omega:
        os << "Omega" << f.f.label << "[";
        emit_range(0, f.f.rank);
        os << "]";
        break;
      case FactorKind::SpecialXi:
        os << "SpXi" << f.f.label << "[";
        emit_range(0, f.f.rank);
        os << " ; " << nm(f.lab[f.f.rank]) << "]";
        break;
      case FactorKind::Metric:
        os << "g[" << nm(f.lab[0]) << " " << nm(f.lab[1]) << "]";
        break;
    }
  }
  os << ")";
  return os.str();
}

std::string serialize_text(const LinComb& l) {
  if (l.terms.empty()) return "0";
  std::ostringstream os;
  for (std::size_t i = 0; i < l.terms.size(); ++i) {
    Term t = l.terms[i];
    int sgn = t.scalar.sign();
    if (i == 0) {
      if (sgn < 0) { os << "-"; t.scalar = -t.scalar; }
    } else {
      os << (sgn < 0 ? " - " : " + ");
      if (sgn < 0) t.scalar = -t.scalar;
    }
    os << serialize_text(t);
  }
  return os.str();
}

}  // namespace confinv
