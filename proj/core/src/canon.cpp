#include "confinv/canon.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "calculus.hpp"
#include "confinv/parse.hpp"
#include "view.hpp"

namespace confinv {

namespace {

using detail::FView;
using detail::TView;
using detail::to_view;
using detail::from_view;
using detail::tidy;

struct Arrangement {
  std::vector<int> perm;  // perm[s] = source slot index
  int sign = 1;
};

std::vector<int> identity_perm(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

// all permutations of the slot block [begin, begin+count), identity outside
void block_perms(int begin, int count, int arity, std::vector<Arrangement>& out) {
  std::vector<int> idx = identity_perm(count);
  do {
    Arrangement a;
    a.perm = identity_perm(arity);
    for (int q = 0; q < count; ++q)
      a.perm[std::size_t(begin + q)] = begin + idx[std::size_t(q)];
    out.push_back(std::move(a));
  } while (std::next_permutation(idx.begin(), idx.end()));
}

// The signed slot-permutation group generated by the factor's own symmetries.
std::vector<Arrangement> arrangements(const Factor& f) {
  int ar = f.arity();
  std::vector<Arrangement> out;
  switch (f.kind) {
    case FactorKind::Riemann: {
      static constexpr int cp[8][4] = {{0, 1, 2, 3}, {1, 0, 2, 3}, {0, 1, 3, 2},
                                       {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 0, 1},
                                       {2, 3, 1, 0}, {3, 2, 1, 0}};
      static constexpr int cs[8] = {1, -1, -1, 1, 1, -1, -1, 1};
      for (int v = 0; v < 8; ++v) {
        Arrangement a;
        a.perm = identity_perm(ar);
        for (int q = 0; q < 4; ++q)
          a.perm[std::size_t(f.deriv + q)] = f.deriv + cp[v][q];
        a.sign = cs[v];
        out.push_back(std::move(a));
      }
      break;
    }
    case FactorKind::Ricci:
      block_perms(f.deriv, 2, ar, out);
      break;
    case FactorKind::Psi:
      out.push_back({identity_perm(ar), 1});
      if (f.deriv >= 2) {  // a scalar's innermost two derivatives commute
        Arrangement a;
        a.perm = identity_perm(ar);
        std::swap(a.perm[std::size_t(f.deriv) - 2], a.perm[std::size_t(f.deriv) - 1]);
        out.push_back(std::move(a));
      }
      break;
    case FactorKind::SXi:
      block_perms(0, ar, ar, out);
      break;
    case FactorKind::SGamma:
      block_perms(0, f.deriv + 2, ar, out);
      break;
    case FactorKind::Omega:
      block_perms(0, f.rank, ar, out);
      break;
    case FactorKind::SpecialXi:
      block_perms(0, f.rank, ar, out);
      break;
    case FactorKind::Metric:
      block_perms(0, 2, 2, out);
      break;
    case FactorKind::ScalarR:
    case FactorKind::Xi:
      out.push_back({identity_perm(ar), 1});
      break;
  }
  return out;
}

// Backtracking search for the lexicographically smallest link word over all
// factor reorderings within equal-header classes and all slot arrangements.
struct CanonSearch {
  const TView* v = nullptr;
  std::vector<Factor> headers;             // canonical factor sequence
  std::vector<std::vector<int>> members;   // original positions per class
  std::vector<int> class_of;               // class index per sequence position
  std::vector<std::vector<Arrangement>> arrs;  // per class
  std::vector<char> used;                  // per original factor position

  std::vector<int> word;
  std::map<int, int> linkmap;
  int next_id = 0;

  std::vector<int> best;
  int best_sign = 1;
  bool has_best = false;
  bool zero = false;

  void run() {
    rec(0, 1, 0);
  }

  // status: 0 = prefix ties the best seen when compared, -1 = ran ahead of
  // it (or no best yet). A deeper leaf can replace `best` after a sibling
  // already holds -1, so the flag only licenses skipped pruning; acceptance
  // at the leaf must re-compare the whole word.
  void rec(std::size_t gi, int sign, int status) {
    (void)status;
    if (gi == class_of.size()) {
      if (!has_best || word < best) {
        best = word;
        best_sign = sign;
        has_best = true;
        zero = false;
      } else if (word == best && sign != best_sign) {
        zero = true;
      }
      return;
    }
    int ci = class_of[gi];
    for (int m : members[std::size_t(ci)]) {
      if (used[std::size_t(m)]) continue;
      used[std::size_t(m)] = 1;
      const FView& fv = v->fs[std::size_t(m)];
      for (const Arrangement& a : arrs[std::size_t(ci)]) {
        std::size_t wmark = word.size();
        std::vector<int> added;
        int idmark = next_id;
        int st = status;
        bool pruned = false;
        for (std::size_t s = 0; s < a.perm.size() && !pruned; ++s) {
          int orig = fv.lab[std::size_t(a.perm[s])];
          int code;
          if (orig < 0) {
            code = orig;
          } else {
            auto it = linkmap.find(orig);
            if (it == linkmap.end()) {
              linkmap.emplace(orig, next_id);
              added.push_back(orig);
              code = next_id++;
            } else {
              code = it->second;
            }
          }
          if (st == 0 && has_best) {
            int b = best[word.size()];
            if (code > b) {
              pruned = true;
              break;
            }
            if (code < b) st = -1;
          } else if (!has_best) {
            st = -1;
          }
          word.push_back(code);
        }
        if (!pruned) rec(gi + 1, sign * a.sign, st);
        word.resize(wmark);
        for (int k : added) linkmap.erase(k);
        next_id = idmark;
      }
      used[std::size_t(m)] = 0;
    }
  }
};

// contraction key of a canonical term: headers then the link word
std::vector<int> term_key(const Term& t) {
  TView v = to_view(t);
  std::vector<int> key;
  key.push_back(int(v.fs.size()));
  for (const FView& f : v.fs) {
    key.push_back(int(f.f.kind));
    key.push_back(f.f.deriv);
    key.push_back(f.f.label);
    key.push_back(f.f.rank);
  }
  for (const FView& f : v.fs)
    for (int l : f.lab) key.push_back(l);
  return key;
}

// (rational content, primitive remainder) of a coefficient function; the
// remainder's numerator has coprime integer coefficients and positive lead.
std::pair<Rational, RationalFnN> split_content(const RationalFnN& q) {
  if (q.is_zero()) return {Rational(0), RationalFnN(Rational(0))};
  const auto& cs = q.num().coeffs();
  std::int64_t g = 0, l = 1;
  for (const Rational& c : cs) {
    g = std::gcd(g, c.num() < 0 ? -c.num() : c.num());
    l = std::lcm(l, c.den());
  }
  Rational content(g, l);
  if (q.num().leading().sign() < 0) content = -content;
  std::vector<Rational> prim;
  prim.reserve(cs.size());
  for (const Rational& c : cs) prim.push_back(c / content);
  return {content, RationalFnN(PolyN(std::move(prim)), q.den())};
}

Term unit_of(const Term& t) {
  Term u;
  u.c = t.c;
  return u;
}

int term_len(const Term& t) { return int(t.c.factors.size()); }

// exact-zero combinations available at a canonical shape: derivative
// commutation and the two curvature cycle identities
std::vector<LinComb> instances_of(const Term& shape) {
  std::vector<LinComb> out;
  TView v = to_view(shape);
  for (int fi = 0; fi < int(v.fs.size()); ++fi) {
    const Factor fc = v.fs[std::size_t(fi)].f;
    bool commutable = fc.kind == FactorKind::Riemann ||
                      fc.kind == FactorKind::Ricci || fc.kind == FactorKind::Psi;
    if (commutable && fc.deriv >= 2) {
      for (int s = 1; s < fc.deriv; ++s) {
        if (fc.kind == FactorKind::Psi && s == fc.deriv - 1)
          continue;  // free swap, no content
        LinComb z;
        z.allow_mixed_weight = false;
        z.terms.push_back(shape);
        for (TView& e : detail::commute_adjacent(v, fi, s)) {
          e.scalar = -e.scalar;
          tidy(e);
          z.terms.push_back(from_view(e));
        }
        out.push_back(std::move(z));
      }
    }
    if (fc.kind == FactorKind::Riemann) {
      int cb = fc.deriv;
      // first cycle identity around each fixed core slot
      for (int fixed = 0; fixed < 4; ++fixed) {
        std::vector<int> oth;
        for (int q = 0; q < 4; ++q)
          if (q != fixed) oth.push_back(q);
        LinComb z;
        z.terms.push_back(shape);
        for (int rot = 1; rot <= 2; ++rot) {
          TView e = v;
          auto& lab = e.fs[std::size_t(fi)].lab;
          const auto& ol = v.fs[std::size_t(fi)].lab;
          for (int q = 0; q < 3; ++q)
            lab[std::size_t(cb + oth[std::size_t(q)])] =
                ol[std::size_t(cb + oth[std::size_t((q + rot) % 3)])];
          tidy(e);
          z.terms.push_back(from_view(e));
        }
        out.push_back(std::move(z));
      }
      // second cycle identity: innermost derivative against either core pair
      if (fc.deriv >= 1) {
        for (int cpair = 0; cpair < 4; cpair += 2) {
          int e0 = fc.deriv - 1;
          LinComb z;
          z.terms.push_back(shape);
          for (int rot = 1; rot <= 2; ++rot) {
            TView e = v;
            auto& lab = e.fs[std::size_t(fi)].lab;
            const auto& ol = v.fs[std::size_t(fi)].lab;
            int pos[3] = {e0, cb + cpair, cb + cpair + 1};
            for (int q = 0; q < 3; ++q)
              lab[std::size_t(pos[q])] = ol[std::size_t(pos[(q + rot) % 3])];
            tidy(e);
            z.terms.push_back(from_view(e));
          }
          out.push_back(std::move(z));
        }
      }
    }
  }
  return out;
}

std::string lincomb_key(const LinComb& l) { return serialize_text(l); }

}  // namespace

CanonResult monoterm_canonical(const Term& t) {
  TView v = to_view(t);

  CanonSearch cs;
  cs.v = &v;
  std::map<Factor, std::vector<int>> classes;
  for (int q = 0; q < int(v.fs.size()); ++q) classes[v.fs[std::size_t(q)].f].push_back(q);
  int ci = 0;
  for (auto& [hdr, mem] : classes) {
    cs.members.push_back(mem);
    cs.arrs.push_back(arrangements(hdr));
    for (std::size_t q = 0; q < mem.size(); ++q) {
      cs.headers.push_back(hdr);
      cs.class_of.push_back(ci);
    }
    ++ci;
  }
  cs.used.assign(v.fs.size(), 0);
  cs.run();

  TView nv;
  nv.qofn = t.qofn;
  std::size_t off = 0;
  for (const Factor& h : cs.headers) {
    FView f;
    f.f = h;
    int ar = h.arity();
    f.lab.assign(cs.best.begin() + long(off), cs.best.begin() + long(off + std::size_t(ar)));
    off += std::size_t(ar);
    nv.fs.push_back(std::move(f));
  }
  for (int w : cs.best)
    if (w >= nv.next) nv.next = w + 1;

  CanonResult r;
  if (cs.zero) {
    r.sign = 0;
    nv.scalar = Rational(0);
  } else {
    r.sign = cs.best_sign;
    nv.scalar = cs.best_sign < 0 ? -t.scalar : t.scalar;
  }
  r.term = from_view(nv);
  return r;
}

LinComb collect(const LinComb& l) {
  struct Acc {
    RationalFnN q;
    Term ex;
  };
  std::map<std::vector<int>, Acc> acc;
  for (const Term& t : l.terms) {
    if (t.scalar.is_zero() || t.qofn.is_zero()) continue;
    CanonResult cr = monoterm_canonical(t);
    if (cr.sign == 0) continue;
    auto key = term_key(cr.term);
    auto [it, fresh] = acc.try_emplace(std::move(key));
    if (fresh) it->second.ex = unit_of(cr.term);
    it->second.q = it->second.q + RationalFnN(cr.term.scalar) * cr.term.qofn;
  }
  LinComb out;
  out.dim = l.dim;
  out.allow_mixed_weight = l.allow_mixed_weight;
  for (auto& [key, a] : acc) {
    if (a.q.is_zero()) continue;
    auto [content, prim] = split_content(a.q);
    Term t = a.ex;
    t.scalar = content;
    t.qofn = prim;
    out.terms.push_back(std::move(t));
  }
  return out;
}

LinComb commute_derivatives(const Term& t, int factor_pos, int s) {
  TView v = to_view(t);
  if (factor_pos < 0 || factor_pos >= int(v.fs.size()))
    throw Error("PositionOutOfRange", "factor position out of range");
  LinComb out;
  for (TView& e : detail::commute_adjacent(v, factor_pos, s)) {
    tidy(e);
    out.terms.push_back(from_view(e));
  }
  return out;
}

LinComb symmetrize(const Term& t, int factor_pos, const std::vector<int>& slots) {
  TView v = to_view(t);
  if (factor_pos < 0 || factor_pos >= int(v.fs.size()))
    throw Error("PositionOutOfRange", "factor position out of range");
  const FView& f = v.fs[std::size_t(factor_pos)];
  std::set<int> seen;
  for (int s : slots) {
    if (s < 0 || s >= f.f.arity() || !seen.insert(s).second)
      throw Error("PositionOutOfRange", "bad slot list for symmetrization");
  }
  std::int64_t k = 1;
  for (std::size_t q = 2; q <= slots.size(); ++q) k *= std::int64_t(q);
  std::vector<int> idx = identity_perm(int(slots.size()));
  LinComb out;
  do {
    TView e = v;
    e.scalar *= Rational(1, k);
    auto& lab = e.fs[std::size_t(factor_pos)].lab;
    for (std::size_t q = 0; q < slots.size(); ++q)
      lab[std::size_t(slots[q])] =
          f.lab[std::size_t(slots[std::size_t(idx[q])])];
    tidy(e);
    out.terms.push_back(from_view(e));
  } while (std::next_permutation(idx.begin(), idx.end()));
  out.dim = formal_dim;
  return collect(out);
}

LinComb bianchi_reduce(const LinComb& l0, BianchiKind which) {
  LinComb cur = collect(eliminate_traced_ric(l0));
  auto key = [&](const LinComb& l) {
    return std::make_pair(l.terms.size(), lincomb_key(l));
  };
  auto cur_key = key(cur);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t ti = 0; ti < cur.terms.size() && !improved; ++ti) {
      const Term& t = cur.terms[ti];
      TView v = to_view(t);
      for (int fi = 0; fi < int(v.fs.size()) && !improved; ++fi) {
        const Factor fc = v.fs[std::size_t(fi)].f;
        if (fc.kind != FactorKind::Riemann) continue;
        if (which == BianchiKind::Second && fc.deriv < 1) continue;
        int cb = fc.deriv;
        // replace the factor by minus the two cycled variants
        LinComb cand;
        cand.dim = cur.dim;
        cand.allow_mixed_weight = cur.allow_mixed_weight;
        for (std::size_t q = 0; q < cur.terms.size(); ++q)
          if (q != ti) cand.terms.push_back(cur.terms[q]);
        for (int rot = 1; rot <= 2; ++rot) {
          TView e = v;
          e.scalar = -e.scalar;
          auto& lab = e.fs[std::size_t(fi)].lab;
          const auto& ol = v.fs[std::size_t(fi)].lab;
          if (which == BianchiKind::First) {
            int pos[3] = {cb + 1, cb + 2, cb + 3};
            for (int q = 0; q < 3; ++q)
              lab[std::size_t(pos[q])] = ol[std::size_t(pos[(q + rot) % 3])];
          } else {
            int pos[3] = {cb - 1, cb, cb + 1};
            for (int q = 0; q < 3; ++q)
              lab[std::size_t(pos[q])] = ol[std::size_t(pos[(q + rot) % 3])];
          }
          tidy(e);
          cand.terms.push_back(from_view(e));
        }
        cand = collect(eliminate_traced_ric(cand));
        auto ck = key(cand);
        if (ck < cur_key) {
          cur = std::move(cand);
          cur_key = std::move(ck);
          improved = true;
        }
      }
    }
  }
  return cur;
}

bool is_formally_zero(const LinComb& l0, std::optional<int> modulo_length,
                      std::int64_t node_budget) {
  LinComb l = collect(eliminate_traced_ric(l0));
  if (l.dim != formal_dim) {
    for (Term& t : l.terms) {
      t.scalar = t.scalar * t.qofn.eval(Rational(l.dim));
      t.qofn = RationalFnN(Rational(1));
    }
  }

  struct Acc {
    RationalFnN q;
    Term ex;
  };
  using Key = std::vector<int>;
  std::map<int, std::map<Key, Acc>> pend;
  std::int64_t nodes = 0;

  auto add_canonical = [&](const Term& t, const RationalFnN& scale) {
    CanonResult cr = monoterm_canonical(t);
    if (cr.sign == 0) return;
    RationalFnN q = RationalFnN(cr.term.scalar) * cr.term.qofn * scale;
    if (q.is_zero()) return;
    int len = term_len(cr.term);
    if (modulo_length && len >= *modulo_length) return;
    auto key = term_key(cr.term);
    auto [it, fresh] = pend[len].try_emplace(std::move(key));
    if (fresh) it->second.ex = unit_of(cr.term);
    it->second.q = it->second.q + q;
  };
  for (const Term& t : l.terms) add_canonical(t, RationalFnN(Rational(1)));

  for (;;) {
    int G = -1;
    for (auto it = pend.begin(); it != pend.end();) {
      for (auto jt = it->second.begin(); jt != it->second.end();)
        jt = jt->second.q.is_zero() ? it->second.erase(jt) : std::next(jt);
      if (it->second.empty()) {
        it = pend.erase(it);
      } else {
        G = it->first;
        break;
      }
    }
    if (G < 0) return true;
    auto target = std::move(pend.begin()->second);
    pend.erase(pend.begin());

    // closure of this grade's shapes under the identity instances
    struct Row {
      std::map<Key, RationalFnN> vec;
      std::vector<Term> tail;  // canonical longer-grade terms
    };
    std::vector<Row> ech;
    std::map<Key, std::size_t> pivot_of;
    std::set<Key> shapes;
    std::deque<Term> queue;
    for (const auto& [k, a] : target) {
      shapes.insert(k);
      queue.push_back(a.ex);
    }

    auto insert_row = [&](Row r) {
      while (!r.vec.empty()) {
        const Key& k = r.vec.begin()->first;
        auto piv = pivot_of.find(k);
        if (piv == pivot_of.end()) break;
        const Row& e = ech[piv->second];
        RationalFnN mu = r.vec.begin()->second / e.vec.begin()->second;
        for (const auto& [ek, ev] : e.vec) {
          auto it = r.vec.try_emplace(ek).first;
          it->second = it->second - mu * ev;
          if (it->second.is_zero()) r.vec.erase(it);
        }
        for (const Term& tt : e.tail) {
          Term s = tt;
          RationalFnN nq = -mu * RationalFnN(s.scalar) * s.qofn;
          auto [content, prim] = split_content(nq);
          s.scalar = content;
          s.qofn = prim;
          r.tail.push_back(std::move(s));
        }
      }
      if (r.vec.empty()) return;
      pivot_of.emplace(r.vec.begin()->first, ech.size());
      ech.push_back(std::move(r));
    };

    while (!queue.empty()) {
      Term shape = std::move(queue.front());
      queue.pop_front();
      for (LinComb& z : instances_of(shape)) {
        LinComb zn = collect(eliminate_traced_ric(z));
        nodes += std::int64_t(zn.terms.size()) + 1;
        if (nodes > node_budget)
          throw Error("BudgetExceeded", "identity closure exceeded the node budget");
        Row r;
        for (const Term& t : zn.terms) {
          int len = term_len(t);
          if (len == G) {
            Key k = term_key(t);
            if (shapes.insert(k).second) queue.push_back(unit_of(t));
            auto it = r.vec.try_emplace(k).first;
            it->second = it->second + RationalFnN(t.scalar) * t.qofn;
            if (it->second.is_zero()) r.vec.erase(it);
          } else if (!modulo_length || len < *modulo_length) {
            r.tail.push_back(t);
          }
        }
        if (!r.vec.empty()) insert_row(std::move(r));
      }
    }

    // reduce the accumulated grade against the echelon
    std::map<Key, RationalFnN> tvec;
    for (const auto& [k, a] : target) tvec[k] = a.q;
    std::vector<Term> textra;
    while (!tvec.empty()) {
      const Key& k = tvec.begin()->first;
      auto piv = pivot_of.find(k);
      if (piv == pivot_of.end()) return false;
      const Row& e = ech[piv->second];
      RationalFnN mu = tvec.begin()->second / e.vec.begin()->second;
      for (const auto& [ek, ev] : e.vec) {
        auto it = tvec.try_emplace(ek).first;
        it->second = it->second - mu * ev;
        if (it->second.is_zero()) tvec.erase(it);
      }
      for (const Term& tt : e.tail) {
        Term s = tt;
        RationalFnN nq = -mu * RationalFnN(s.scalar) * s.qofn;
        auto [content, prim] = split_content(nq);
        s.scalar = content;
        s.qofn = prim;
        textra.push_back(std::move(s));
      }
    }
    for (const Term& t : textra) add_canonical(t, RationalFnN(Rational(1)));
  }
}

std::pair<LinComb, LinComb> split_intrinsic(const LinComb& l) {
  LinComb a, b;
  a.dim = b.dim = l.dim;
  a.allow_mixed_weight = b.allow_mixed_weight = l.allow_mixed_weight;
  for (const Term& t : l.terms) {
    bool has = false;
    for (const Factor& f : t.c.factors)
      if (f.kind == FactorKind::SGamma) has = true;
    (has ? b : a).terms.push_back(t);
  }
  return {std::move(a), std::move(b)};
}

std::map<int, LinComb> grade_by_length(const LinComb& l) {
  std::map<int, LinComb> out;
  for (const Term& t : l.terms) {
    auto [it, fresh] = out.try_emplace(term_len(t));
    if (fresh) {
      it->second.dim = l.dim;
      it->second.allow_mixed_weight = l.allow_mixed_weight;
    }
    it->second.terms.push_back(t);
  }
  return out;
}

}  // namespace confinv
