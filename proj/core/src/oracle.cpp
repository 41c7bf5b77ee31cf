#include "confinv/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <utility>

namespace confinv::num {

namespace {

std::uint64_t splitmix(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0xd1342543de82ef95ULL * (b + 1));
  return splitmix(s);
}

double unit01(std::mt19937_64& r) { return double(r() >> 11) * 0x1p-53; }
double sym11(std::mt19937_64& r) { return 2.0 * unit01(r) - 1.0; }

int thread_count() {
  if (const char* s = std::getenv("CONFINV_THREADS")) {
    int v = std::atoi(s);
    if (v >= 1) return v;
  }
  unsigned h = std::thread::hardware_concurrency();
  return h ? int(h) : 1;
}

// Runs f(0..jobs-1) across threads; f must be safe to run concurrently.
void parallel_for(int jobs, const std::function<void(int)>& f) {
  int tc = std::min(thread_count(), jobs);
  if (tc <= 1) {
    for (int j = 0; j < jobs; ++j) f(j);
    return;
  }
  std::atomic<int> cursor{0};
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(tc));
  for (int t = 0; t < tc; ++t)
    pool.emplace_back([&] {
      for (;;) {
        int j = cursor.fetch_add(1);
        if (j >= jobs) return;
        f(j);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace

JetSpace::JetSpace(int dim, int order) : dim_(dim), order_(order) {
  std::vector<int> cur;
  // graded, lex-descending within a degree, so lower orders are prefixes
  auto gen = [&](auto&& self, int left) -> void {
    if (int(cur.size()) == dim_ - 1) {
      cur.push_back(left);
      expo_.push_back(cur);
      cur.pop_back();
      return;
    }
    for (int e = left; e >= 0; --e) {
      cur.push_back(e);
      self(self, left - e);
      cur.pop_back();
    }
  };
  for (int d = 0; d <= order_; ++d) gen(gen, d);

  std::map<std::vector<int>, int> idx;
  deg_.resize(expo_.size());
  for (std::size_t i = 0; i < expo_.size(); ++i) {
    idx[expo_[i]] = int(i);
    int d = 0;
    for (int e : expo_[i]) d += e;
    deg_[i] = d;
  }
  std::size_t m = expo_.size();
  prod_.assign(m * m, -1);
  std::vector<int> sum(static_cast<std::size_t>(dim_));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (deg_[i] + deg_[j] > order_) continue;
      for (int d = 0; d < dim_; ++d) sum[std::size_t(d)] = expo_[i][std::size_t(d)] + expo_[j][std::size_t(d)];
      prod_[i * m + j] = idx.at(sum);
    }
  diff_.assign(m * std::size_t(dim_), -1);
  for (std::size_t i = 0; i < m; ++i)
    for (int d = 0; d < dim_; ++d) {
      if (expo_[i][std::size_t(d)] == 0) continue;
      std::vector<int> e = expo_[i];
      e[std::size_t(d)] -= 1;
      diff_[i * std::size_t(dim_) + std::size_t(d)] = idx.at(e);
    }
}

const JetSpace& jet_space(int dim, int order) {
  if (dim < 1) throw Error("BadOrder", "jet dimension must be positive");
  if (order < 0) throw Error("BadOrder", "jet order must be nonnegative");
  // every jet operation resolves its space here, so small dims get a flat
  // memo in front of the map
  constexpr int kQuick = 9;
  thread_local const JetSpace* quick[kQuick][kQuick] = {};
  bool small = dim < kQuick && order < kQuick;
  if (small) {
    if (const JetSpace* q = quick[dim][order]) return *q;
  }
  thread_local std::map<std::pair<int, int>, const JetSpace*> tl;
  auto key = std::make_pair(dim, order);
  const JetSpace* sp = nullptr;
  auto it = tl.find(key);
  if (it != tl.end()) {
    sp = it->second;
  } else {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<JetSpace>> cache;
    {
      std::lock_guard<std::mutex> lk(mu);
      auto& p = cache[key];
      if (!p) p = std::make_unique<JetSpace>(dim, order);
      sp = p.get();
    }
    tl.emplace(key, sp);
  }
  if (small) quick[dim][order] = sp;
  return *sp;
}

Jet jet_const(int dim, int order, double v) {
  Jet j;
  j.dim = dim;
  j.order = order;
  j.c.assign(std::size_t(jet_space(dim, order).size()), 0.0);
  j.c[0] = v;
  return j;
}

Jet jet_coord(int dim, int order, int i) {
  if (order < 1) throw Error("BadOrder", "a coordinate jet needs order >= 1");
  const JetSpace& sp = jet_space(dim, order);
  Jet j = jet_const(dim, order, 0.0);
  for (int k = 0; k < sp.size(); ++k) {
    if (sp.degree(k) != 1) continue;
    if (sp.exponent(k)[std::size_t(i)] == 1) {
      j.c[std::size_t(k)] = 1.0;
      return j;
    }
  }
  throw Error("InternalError", "coordinate monomial not found");
}

Jet truncate(const Jet& a, int order) {
  if (order > a.order) throw Error("BadOrder", "cannot extend a jet");
  if (order == a.order) return a;
  Jet j;
  j.dim = a.dim;
  j.order = order;
  std::size_t m = std::size_t(jet_space(a.dim, order).size());
  j.c.assign(a.c.begin(), a.c.begin() + std::ptrdiff_t(m));
  return j;
}

Jet diff(const Jet& a, int d) {
  if (a.order < 1)
    throw Error("InsufficientOrder", "derivative of an order-0 jet");
  const JetSpace& sp = jet_space(a.dim, a.order);
  Jet r = jet_const(a.dim, a.order - 1, 0.0);
  for (int i = 0; i < sp.size(); ++i) {
    int k = sp.diff_index(i, d);
    if (k < 0) continue;
    r.c[std::size_t(k)] += a.c[std::size_t(i)] * double(sp.diff_mult(i, d));
  }
  return r;
}

namespace {

// r += sgn * x * y truncated to r's order. Relies on the prefix property:
// the low-order coefficients of a longer jet are a prefix.
void mul_acc(Jet& r, const Jet& x, const Jet& y, double sgn) {
  const JetSpace& sp = jet_space(r.dim, r.order);
  std::size_t m = std::size_t(sp.size());
  std::size_t nx = std::min(x.c.size(), m);
  std::size_t ny = std::min(y.c.size(), m);
  for (std::size_t i = 0; i < nx; ++i) {
    double xi = x.c[i] * sgn;
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < ny; ++j) {
      int p = sp.prod_index(int(i), int(j));
      if (p < 0) continue;
      r.c[std::size_t(p)] += xi * y.c[j];
    }
  }
}

}  // namespace

Jet operator+(const Jet& a, const Jet& b) {
  int k = std::min(a.order, b.order);
  Jet r = truncate(a, k);
  std::size_t m = r.c.size();
  for (std::size_t i = 0; i < m; ++i) r.c[i] += b.c[i];
  return r;
}

Jet operator-(const Jet& a, const Jet& b) {
  int k = std::min(a.order, b.order);
  Jet r = truncate(a, k);
  std::size_t m = r.c.size();
  for (std::size_t i = 0; i < m; ++i) r.c[i] -= b.c[i];
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  int k = std::min(a.order, b.order);
  Jet r = jet_const(a.dim, k, 0.0);
  mul_acc(r, a, b, 1.0);
  return r;
}

Jet operator*(double s, const Jet& a) {
  Jet r = a;
  for (double& v : r.c) v *= s;
  return r;
}

Jet operator-(const Jet& a) { return -1.0 * a; }

Jet jet_exp(const Jet& a) {
  Jet u = a;
  double a0 = u.value();
  u.c[0] = 0.0;
  Jet r = jet_const(a.dim, a.order, 1.0);
  Jet term = jet_const(a.dim, a.order, 1.0);
  for (int k = 1; k <= a.order; ++k) {
    Jet nt = jet_const(a.dim, a.order, 0.0);
    mul_acc(nt, term, u, 1.0 / double(k));
    term = std::move(nt);
    for (std::size_t i = 0; i < r.c.size(); ++i) r.c[i] += term.c[i];
  }
  return std::exp(a0) * r;
}

Jet jet_inv(const Jet& a) {
  double a0 = a.value();
  if (a0 == 0.0)
    throw Error("InternalError", "reciprocal of a jet vanishing at the base point");
  Jet u = (1.0 / a0) * a;
  u.c[0] = 0.0;
  Jet r = jet_const(a.dim, a.order, 1.0);
  Jet term = jet_const(a.dim, a.order, 1.0);
  for (int k = 1; k <= a.order; ++k) {
    Jet nt = jet_const(a.dim, a.order, 0.0);
    mul_acc(nt, term, u, -1.0);
    term = std::move(nt);
    for (std::size_t i = 0; i < r.c.size(); ++i) r.c[i] += term.c[i];
  }
  return (1.0 / a0) * r;
}

MetricJet random_metric(int dim, int order, std::uint64_t seed,
                        bool normal_gauge) {
  if (dim < 1) throw Error("BadOrder", "dimension must be positive");
  if (order < 2) throw Error("BadOrder", "a metric jet needs order >= 2");
  const JetSpace& sp = jet_space(dim, order);
  std::mt19937_64 rng(seed);
  MetricJet m;
  m.dim = dim;
  m.order = order;
  m.g.assign(std::size_t(dim) * std::size_t(dim), Jet{});
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      Jet e = jet_const(dim, order, i == j ? 1.0 : 0.0);
      for (int k = 1; k < sp.size(); ++k) {
        int dg = sp.degree(k);
        double v = std::pow(0.1, dg) * sym11(rng);
        if (normal_gauge && dg == 1) continue;
        e.c[std::size_t(k)] = v;
      }
      m.g[std::size_t(i) * std::size_t(dim) + std::size_t(j)] = e;
      m.g[std::size_t(j) * std::size_t(dim) + std::size_t(i)] = std::move(e);
    }
  return m;
}

MetricJet conformal_rescale(const MetricJet& g, const Jet& omega) {
  if (omega.dim != g.dim)
    throw Error("DimensionMismatch", "conformal factor dimension differs");
  Jet w = omega.order > g.order ? truncate(omega, g.order) : omega;
  Jet e2 = jet_exp(w + w);
  MetricJet r;
  r.dim = g.dim;
  r.order = std::min(g.order, w.order);
  r.g.reserve(g.g.size());
  for (const Jet& e : g.g) r.g.push_back(e2 * e);
  return r;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

// out[a, I] = d_a T[I] - sum_slots Gamma^c_{a i_s} T[I: i_s -> c];
// every stored slot is treated covariantly (this is what makes the
// connection towers the formal derivative of the lowered connection array).
std::vector<Jet> tower_step(int n, const std::vector<Jet>& gamma,
                            const std::vector<Jet>& T, int rank) {
  std::size_t tsz = T.size();
  std::vector<Jet> out;
  out.reserve(tsz * std::size_t(n));
  for (int a = 0; a < n; ++a)
    for (std::size_t I = 0; I < tsz; ++I) {
      Jet v = diff(T[I], a);
      std::size_t st = tsz / std::size_t(n);
      for (int s = 0; s < rank; ++s) {
        int is = int((I / st) % std::size_t(n));
        std::size_t base = I - std::size_t(is) * st;
        for (int c = 0; c < n; ++c) {
          const Jet& G =
              gamma[(std::size_t(c) * std::size_t(n) + std::size_t(a)) * std::size_t(n) + std::size_t(is)];
          mul_acc(v, G, T[base + std::size_t(c) * st], -1.0);
        }
        st /= std::size_t(n);
      }
      out.push_back(std::move(v));
    }
  return out;
}

std::size_t ipow(int n, int r) {
  std::size_t v = 1;
  for (int i = 0; i < r; ++i) v *= std::size_t(n);
  return v;
}

std::vector<double> symmetrize_block(const std::vector<double>& v, int n,
                                     int rank, int block) {
  // average over permutations of the first `block` slots
  std::vector<int> perm(static_cast<std::size_t>(block));
  for (int i = 0; i < block; ++i) perm[std::size_t(i)] = i;
  std::vector<double> out(v.size(), 0.0);
  std::vector<std::size_t> stride(static_cast<std::size_t>(rank));
  for (int s = 0; s < rank; ++s) stride[std::size_t(s)] = ipow(n, rank - 1 - s);
  int cnt = 0;
  do {
    ++cnt;
    std::vector<int> digit(static_cast<std::size_t>(rank));
    for (std::size_t I = 0; I < v.size(); ++I) {
      std::size_t rem = I;
      for (int s = 0; s < rank; ++s) {
        digit[std::size_t(s)] = int(rem / stride[std::size_t(s)]);
        rem %= stride[std::size_t(s)];
      }
      std::size_t J = 0;
      for (int s = 0; s < rank; ++s) {
        int d = s < block ? digit[std::size_t(perm[std::size_t(s)])] : digit[std::size_t(s)];
        J = J * std::size_t(n) + std::size_t(d);
      }
      out[J] += v[I];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& x : out) x /= double(cnt);
  return out;
}

std::vector<double> random_symmetric(int n, int rank, int extra,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(ipow(n, rank + extra));
  for (double& x : v) x = sym11(rng);
  return symmetrize_block(v, n, rank + extra, rank);
}

}  // namespace

struct Tables::Impl {
  int dim = 0;
  int order = 0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  MetricJet g;
  std::vector<Jet> ginv;    // n*n
  std::vector<Jet> gtilde;  // n^3, [a][b][u] lowered
  std::vector<Jet> gamma;   // n^3, [c][a][b] raised
  std::vector<double> frame;  // E[i*n + a]

  std::vector<std::vector<Jet>> rm_lev;
  std::vector<std::vector<double>> rm_val;
  std::vector<std::vector<Jet>> ric_lev;
  std::vector<std::vector<double>> ric_val;
  std::map<int, std::vector<std::vector<Jet>>> psi_lev;
  std::map<int, std::vector<std::vector<double>>> psi_val;
  std::map<int, Jet> psi_override;
  bool have_scal = false;
  double scal = 0.0;
  std::vector<double> xi_val;
  std::vector<std::vector<Jet>> om_lev;  // towers of the linear potential
  std::vector<std::vector<double>> sxi_val;
  std::vector<std::vector<Jet>> sg_lev;
  std::vector<std::vector<double>> sg_val;
  std::map<int, std::vector<double>> sg_override;
  std::map<std::pair<int, int>, std::vector<double>> omega_tab;
  std::map<std::pair<int, int>, std::vector<double>> spxi_tab;

  std::vector<double> to_frame(const std::vector<Jet>& T, int rank) const {
    int n = dim;
    std::vector<double> v(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) v[i] = T[i].value();
    for (int s = 0; s < rank; ++s) {
      std::size_t st = ipow(n, rank - 1 - s);
      std::vector<double> w(v.size());
      for (std::size_t I = 0; I < v.size(); ++I) {
        int a = int((I / st) % std::size_t(n));
        std::size_t base = I - std::size_t(a) * st;
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += frame[std::size_t(i) * std::size_t(n) + std::size_t(a)] * v[base + std::size_t(i) * st];
        w[I] = acc;
      }
      v = std::move(w);
    }
    return v;
  }

  Jet psi_jet(int label) {
    auto it = psi_override.find(label);
    if (it != psi_override.end()) return it->second;
    const JetSpace& sp = jet_space(dim, order);
    std::mt19937_64 rng(mix(seed, 100 + std::uint64_t(label)));
    Jet j = jet_const(dim, order, 0.0);
    for (int k = 0; k < sp.size(); ++k)
      j.c[std::size_t(k)] = std::pow(0.1, sp.degree(k)) * sym11(rng);
    return j;
  }

  static void ensure_rm_base(Impl& im);
  static void ensure_ric_base(Impl& im);
  static void extend_tower(Impl& im, std::vector<std::vector<Jet>>& lev,
                           std::vector<std::vector<double>>& val, int rank0,
                           int upto);
};

Tables::Tables(const MetricJet& gj, std::uint64_t seed, double lambda)
    : impl_(std::make_unique<Impl>()) {
  Impl& im = *impl_;
  im.dim = gj.dim;
  im.order = gj.order;
  im.lambda = lambda;
  im.seed = seed;
  im.g = gj;
  int n = im.dim;
  if (gj.order < 2) throw Error("BadOrder", "a metric jet needs order >= 2");
  if (int(gj.g.size()) != n * n)
    throw Error("DimensionMismatch", "metric entry count does not match dim");

  // A metric of the exact shape E * delta (one shared diagonal jet, zero
  // off-diagonals) admits closed forms for the inverse and the connection;
  // the torus quadrature constructs millions of these, so the generic
  // series below would dominate its runtime.
  bool conf_flat = n > 1;
  for (int i = 0; i < n && conf_flat; ++i)
    for (int j = 0; j < n && conf_flat; ++j) {
      const Jet& e = gj.g[std::size_t(i) * std::size_t(n) + std::size_t(j)];
      if (i == j) {
        conf_flat = e.c == gj.g[0].c;
      } else {
        for (double v : e.c)
          if (v != 0.0) {
            conf_flat = false;
            break;
          }
      }
    }
  if (conf_flat) {
    const Jet& E = im.g.g[0];
    if (E.value() <= 0.0)
      throw Error("InternalError", "metric not positive definite at the base point");
    Jet einv = jet_inv(E);
    Jet zfull = jet_const(n, im.order, 0.0);
    im.ginv.assign(std::size_t(n) * std::size_t(n), zfull);
    for (int i = 0; i < n; ++i) im.ginv[std::size_t(i) * std::size_t(n) + std::size_t(i)] = einv;
    // conformal factor gradient: dphi_c = E' / (2 E); with E = e^{2 phi}
    // this is the coordinate derivative of phi
    std::vector<Jet> dphi(static_cast<std::size_t>(n));
    std::vector<Jet> edphi(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
      dphi[std::size_t(c)] = 0.5 * (diff(E, c) * einv);
      edphi[std::size_t(c)] = E * dphi[std::size_t(c)];
    }
    Jet zero1 = jet_const(n, im.order - 1, 0.0);
    im.gtilde.assign(ipow(n, 3), Jet{});
    im.gamma.assign(ipow(n, 3), Jet{});
    for (int a = 0; a < n; ++a)
      for (int bq = 0; bq < n; ++bq)
        for (int u = 0; u < n; ++u) {
          Jet tl = zero1;
          Jet gm = zero1;
          if (bq == u) {
            tl = tl + edphi[std::size_t(a)];
            gm = gm + dphi[std::size_t(a)];
          }
          if (a == u) {
            tl = tl + edphi[std::size_t(bq)];
            gm = gm + dphi[std::size_t(bq)];
          }
          if (a == bq) {
            tl = tl - edphi[std::size_t(u)];
            gm = gm - dphi[std::size_t(u)];
          }
          std::size_t idx = (std::size_t(a) * std::size_t(n) + std::size_t(bq)) * std::size_t(n) + std::size_t(u);
          im.gtilde[idx] = std::move(tl);
          // for this metric shape the raised index only swaps E for E^-1,
          // so gamma^u_{ab} has the same delta pattern over dphi
          im.gamma[(std::size_t(u) * std::size_t(n) + std::size_t(a)) * std::size_t(n) + std::size_t(bq)] =
              std::move(gm);
        }
    im.frame.assign(std::size_t(n) * std::size_t(n), 0.0);
    double root = 1.0 / std::sqrt(E.value());
    for (int i = 0; i < n; ++i) im.frame[std::size_t(i) * std::size_t(n) + std::size_t(i)] = root;
    return;
  }

  // inverse metric: A^-1 = sum_k (-A0inv P)^k A0inv with P = A - A0
  Eigen::MatrixXd a0(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a0(i, j) = im.g.g[std::size_t(i) * std::size_t(n) + std::size_t(j)].value();
  Eigen::MatrixXd a0inv = a0.inverse();
  auto matmul = [&](const std::vector<Jet>& A, const std::vector<Jet>& B) {
    std::vector<Jet> C(std::size_t(n) * std::size_t(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet v = jet_const(n, im.order, 0.0);
        for (int k = 0; k < n; ++k)
          mul_acc(v, A[std::size_t(i) * std::size_t(n) + std::size_t(k)],
                  B[std::size_t(k) * std::size_t(n) + std::size_t(j)], 1.0);
        C[std::size_t(i) * std::size_t(n) + std::size_t(j)] = std::move(v);
      }
    return C;
  };
  std::vector<Jet> b(std::size_t(n) * std::size_t(n));
  std::vector<Jet> p(std::size_t(n) * std::size_t(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      b[std::size_t(i) * std::size_t(n) + std::size_t(j)] = jet_const(n, im.order, a0inv(i, j));
      Jet pj = im.g.g[std::size_t(i) * std::size_t(n) + std::size_t(j)];
      pj.c[0] = 0.0;
      p[std::size_t(i) * std::size_t(n) + std::size_t(j)] = std::move(pj);
    }
  std::vector<Jet> cmat = matmul(b, p);  // zero value part, nilpotent
  im.ginv = b;
  std::vector<Jet> term = b;
  for (int k = 1; k <= im.order; ++k) {
    term = matmul(cmat, term);
    for (auto& t : term)
      for (double& x : t.c) x = -x;
    for (std::size_t i = 0; i < im.ginv.size(); ++i)
      im.ginv[i] = im.ginv[i] + term[i];
  }

  // lowered and raised connection coefficients
  im.gtilde.assign(ipow(n, 3), Jet{});
  for (int a = 0; a < n; ++a)
    for (int bq = 0; bq < n; ++bq)
      for (int u = 0; u < n; ++u) {
        Jet v = diff(im.g.g[std::size_t(bq) * std::size_t(n) + std::size_t(u)], a) +
                diff(im.g.g[std::size_t(a) * std::size_t(n) + std::size_t(u)], bq) -
                diff(im.g.g[std::size_t(a) * std::size_t(n) + std::size_t(bq)], u);
        im.gtilde[(std::size_t(a) * std::size_t(n) + std::size_t(bq)) * std::size_t(n) + std::size_t(u)] = 0.5 * v;
      }
  im.gamma.assign(ipow(n, 3), Jet{});
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int bq = 0; bq < n; ++bq) {
        Jet v = jet_const(n, im.order - 1, 0.0);
        for (int u = 0; u < n; ++u)
          mul_acc(v, im.ginv[std::size_t(c) * std::size_t(n) + std::size_t(u)],
                  im.gtilde[(std::size_t(a) * std::size_t(n) + std::size_t(bq)) * std::size_t(n) + std::size_t(u)],
                  1.0);
        im.gamma[(std::size_t(c) * std::size_t(n) + std::size_t(a)) * std::size_t(n) + std::size_t(bq)] = std::move(v);
      }

  // orthonormal frame at the base point: E = (L^T)^-1 with g(0) = L L^T
  Eigen::LLT<Eigen::MatrixXd> llt(a0);
  if (llt.info() != Eigen::Success)
    throw Error("InternalError", "metric not positive definite at the base point");
  Eigen::MatrixXd e =
      llt.matrixL().transpose().solve(Eigen::MatrixXd::Identity(n, n));
  im.frame.assign(std::size_t(n) * std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a) im.frame[std::size_t(i) * std::size_t(n) + std::size_t(a)] = e(i, a);
}

Tables::~Tables() = default;
Tables::Tables(Tables&&) noexcept = default;
Tables& Tables::operator=(Tables&&) noexcept = default;

int Tables::dim() const { return impl_->dim; }
int Tables::order() const { return impl_->order; }

// builds curvature base jets on demand
void Tables::Impl::ensure_rm_base(Impl& im) {
  if (!im.rm_lev.empty()) return;
  int n = im.dim;
  if (im.order < 2) throw Error("InsufficientOrder", "curvature needs order >= 2");
  auto at4 = [n](int i, int j, int k, int l) {
    return ((std::size_t(i) * std::size_t(n) + std::size_t(j)) * std::size_t(n) + std::size_t(k)) * std::size_t(n) +
           std::size_t(l);
  };
  auto G = [&](int c, int a, int bq) -> const Jet& {
    return im.gamma[(std::size_t(c) * std::size_t(n) + std::size_t(a)) * std::size_t(n) + std::size_t(bq)];
  };
  // cache the connection derivatives; the (i, j) antisymmetry of the curvature
  // is structural here, so only i < j is computed and the rest mirrored
  std::vector<Jet> dG(ipow(n, 4));
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int bq = 0; bq < n; ++bq)
        for (int d = 0; d < n; ++d) dG[at4(c, a, bq, d)] = diff(G(c, a, bq), d);
  std::vector<Jet> rup(ipow(n, 4));
  Jet zero4 = jet_const(n, im.order - 2, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int m = 0; m < n; ++m) rup[at4(i, i, k, m)] = zero4;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          Jet v = dG[at4(m, i, k, j)] - dG[at4(m, j, k, i)];
          for (int s = 0; s < n; ++s) {
            mul_acc(v, G(s, i, k), G(m, j, s), 1.0);
            mul_acc(v, G(s, j, k), G(m, i, s), -1.0);
          }
          Jet neg = v;
          for (double& x : neg.c) x = -x;
          rup[at4(j, i, k, m)] = std::move(neg);
          rup[at4(i, j, k, m)] = std::move(v);
        }
  std::vector<Jet> rm(ipow(n, 4));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) rm[at4(i, i, k, l)] = zero4;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Jet v = jet_const(n, im.order - 2, 0.0);
          for (int m = 0; m < n; ++m)
            mul_acc(v, rup[at4(i, j, k, m)],
                    im.g.g[std::size_t(m) * std::size_t(n) + std::size_t(l)], 1.0);
          Jet neg = v;
          for (double& x : neg.c) x = -x;
          rm[at4(j, i, k, l)] = std::move(neg);
          rm[at4(i, j, k, l)] = std::move(v);
        }
  im.rm_lev.push_back(std::move(rm));
  im.rm_val.push_back(im.to_frame(im.rm_lev[0], 4));
}

void Tables::Impl::ensure_ric_base(Impl& im) {
  if (!im.ric_lev.empty()) return;
  Impl::ensure_rm_base(im);
  int n = im.dim;
  std::vector<Jet> ric(ipow(n, 2));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      Jet v = jet_const(n, im.order - 2, 0.0);
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l)
          mul_acc(v,
                  im.rm_lev[0][((std::size_t(i) * std::size_t(n) + std::size_t(j)) * std::size_t(n) + std::size_t(k)) *
                                   std::size_t(n) + std::size_t(l)],
                  im.ginv[std::size_t(j) * std::size_t(n) + std::size_t(l)], 1.0);
      ric[std::size_t(i) * std::size_t(n) + std::size_t(k)] = std::move(v);
    }
  im.ric_lev.push_back(std::move(ric));
  im.ric_val.push_back(im.to_frame(im.ric_lev[0], 2));
}

void Tables::Impl::extend_tower(Impl& im, std::vector<std::vector<Jet>>& lev,
                                std::vector<std::vector<double>>& val,
                                int rank0, int upto) {
  while (int(lev.size()) <= upto) {
    int l = int(lev.size());
    lev.push_back(tower_step(im.dim, im.gamma, lev[std::size_t(l - 1)], rank0 + l - 1));
    val.push_back(im.to_frame(lev[std::size_t(l)], rank0 + l));
  }
}

double Tables::scalar_curvature() {
  Impl& im = *impl_;
  if (!im.have_scal) {
    Impl::ensure_ric_base(im);
    double s = 0.0;
    for (int a = 0; a < im.dim; ++a)
      s += im.ric_val[0][std::size_t(a) * std::size_t(im.dim) + std::size_t(a)];
    im.scal = s;
    im.have_scal = true;
  }
  return im.scal;
}

const std::vector<double>& Tables::riemann(int deriv) {
  Impl& im = *impl_;
  Impl::ensure_rm_base(im);
  Impl::extend_tower(im, im.rm_lev, im.rm_val, 4, deriv);
  return im.rm_val[std::size_t(deriv)];
}

const std::vector<double>& Tables::ricci(int deriv) {
  Impl& im = *impl_;
  Impl::ensure_ric_base(im);
  Impl::extend_tower(im, im.ric_lev, im.ric_val, 2, deriv);
  return im.ric_val[std::size_t(deriv)];
}

const std::vector<double>& Tables::psi(int label, int deriv) {
  Impl& im = *impl_;
  auto& lev = im.psi_lev[label];
  auto& val = im.psi_val[label];
  if (lev.empty()) {
    lev.push_back({im.psi_jet(label)});
    val.push_back(im.to_frame(lev[0], 0));
  }
  Impl::extend_tower(im, lev, val, 0, deriv);
  return val[std::size_t(deriv)];
}

const std::vector<double>& Tables::xi() {
  Impl& im = *impl_;
  if (im.xi_val.empty()) {
    int n = im.dim;
    std::mt19937_64 rng(mix(im.seed, 31));
    std::vector<Jet> cov(static_cast<std::size_t>(n));
    Jet om = jet_const(n, im.order, 0.0);
    for (int i = 0; i < n; ++i) {
      double c = sym11(rng);
      cov[std::size_t(i)] = jet_const(n, im.order, c);
      om = om + c * jet_coord(n, im.order, i);
    }
    im.om_lev.push_back({om});
    im.xi_val = im.to_frame(cov, 1);
  }
  return im.xi_val;
}

const std::vector<double>& Tables::sxi(int m) {
  Impl& im = *impl_;
  xi();  // seeds the potential tower
  while (int(im.om_lev.size()) <= m + 1) {
    int l = int(im.om_lev.size());
    im.om_lev.push_back(tower_step(im.dim, im.gamma, im.om_lev[std::size_t(l - 1)], l - 1));
  }
  while (int(im.sxi_val.size()) <= m) {
    int k = int(im.sxi_val.size());  // builds S(grad^{k+1} potential)
    std::vector<double> v = im.to_frame(im.om_lev[std::size_t(k + 1)], k + 1);
    im.sxi_val.push_back(symmetrize_block(v, im.dim, k + 1, k + 1));
  }
  return im.sxi_val[std::size_t(m)];
}

const std::vector<double>& Tables::sgamma(int p) {
  Impl& im = *impl_;
  if (im.sg_lev.empty()) im.sg_lev.push_back(im.gtilde);
  while (int(im.sg_lev.size()) <= p) {
    int l = int(im.sg_lev.size());
    im.sg_lev.push_back(tower_step(im.dim, im.gamma, im.sg_lev[std::size_t(l - 1)], l + 2));
  }
  while (int(im.sg_val.size()) <= p) {
    int k = int(im.sg_val.size());
    auto ov = im.sg_override.find(k);
    if (ov != im.sg_override.end()) {
      im.sg_val.push_back(ov->second);
      continue;
    }
    std::vector<double> v = im.to_frame(im.sg_lev[std::size_t(k)], k + 3);
    v = symmetrize_block(v, im.dim, k + 3, k + 2);
    for (double& x : v) x *= im.lambda;
    im.sg_val.push_back(std::move(v));
  }
  return im.sg_val[std::size_t(p)];
}

void Tables::prescribe_psi(int label, const Jet& j) {
  Impl& im = *impl_;
  if (j.dim != im.dim) throw Error("DimensionMismatch", "psi jet dimension");
  if (im.psi_lev.count(label))
    throw Error("InternalError", "psi tower already built for this label");
  im.psi_override[label] = j;
}

void Tables::prescribe_sgamma(int p, std::vector<double> vals) {
  Impl& im = *impl_;
  if (p < 0) throw Error("PositionOutOfRange", "tower order");
  if (vals.size() != ipow(im.dim, p + 3))
    throw Error("DimensionMismatch", "connection tower entry count");
  if (int(im.sg_val.size()) > p)
    throw Error("InternalError", "connection tower already built at this order");
  im.sg_override[p] = symmetrize_block(vals, im.dim, p + 3, p + 2);
}

void Tables::prescribe_omega(int label, int rank, std::vector<double> vals) {
  Impl& im = *impl_;
  if (vals.size() != ipow(im.dim, rank))
    throw Error("DimensionMismatch", "free tensor entry count");
  im.omega_tab[{label, rank}] = symmetrize_block(vals, im.dim, rank, rank);
}

void Tables::prescribe_special_xi(int label, int rank,
                                  std::vector<double> vals) {
  Impl& im = *impl_;
  if (vals.size() != ipow(im.dim, rank + 1))
    throw Error("DimensionMismatch", "free tensor entry count");
  im.spxi_tab[{label, rank}] = symmetrize_block(vals, im.dim, rank + 1, rank);
}

const std::vector<double>& Tables::omega(int label, int rank) {
  Impl& im = *impl_;
  auto it = im.omega_tab.find({label, rank});
  if (it == im.omega_tab.end())
    throw Error("MissingTable", "free symmetric tensor was not prescribed");
  return it->second;
}

const std::vector<double>& Tables::special_xi(int label, int rank) {
  Impl& im = *impl_;
  auto it = im.spxi_tab.find({label, rank});
  if (it == im.spxi_tab.end())
    throw Error("MissingTable", "free symmetric tensor was not prescribed");
  return it->second;
}

// ---------------------------------------------------------------------------
// evaluation

double eval_term(const Term& t, Tables& tb, int nsub) {
  if (!t.c.free.empty())
    throw Error("UncoveredSlot", "pointwise evaluation needs a complete contraction");
  int n = tb.dim();
  double coeff =
      t.scalar.to_double() * t.qofn.eval(Rational(nsub)).to_double();
  if (coeff == 0.0) return 0.0;

  std::size_t nf = t.c.factors.size();
  std::vector<const std::vector<double>*> tab(nf, nullptr);
  std::vector<bool> is_metric(nf, false);
  for (std::size_t i = 0; i < nf; ++i) {
    const Factor& f = t.c.factors[i];
    switch (f.kind) {
      case FactorKind::Riemann: tab[i] = &tb.riemann(f.deriv); break;
      case FactorKind::Ricci: tab[i] = &tb.ricci(f.deriv); break;
      case FactorKind::ScalarR: coeff *= tb.scalar_curvature(); break;
      case FactorKind::Psi: tab[i] = &tb.psi(f.label, f.deriv); break;
      case FactorKind::Xi: tab[i] = &tb.xi(); break;
      case FactorKind::SXi: tab[i] = &tb.sxi(f.deriv); break;
      case FactorKind::SGamma: tab[i] = &tb.sgamma(f.deriv); break;
      case FactorKind::Omega: tab[i] = &tb.omega(f.label, f.rank); break;
      case FactorKind::SpecialXi: tab[i] = &tb.special_xi(f.label, f.rank); break;
      case FactorKind::Metric: is_metric[i] = true; break;
    }
  }

  int np = int(t.c.pairs.size());
  std::vector<std::vector<int>> pid(nf);
  for (std::size_t i = 0; i < nf; ++i)
    pid[i].assign(std::size_t(t.c.factors[i].arity()), -1);
  for (int p = 0; p < np; ++p) {
    const auto& pr = t.c.pairs[std::size_t(p)];
    pid[std::size_t(pr.first.factor)][std::size_t(pr.first.slot)] = p;
    pid[std::size_t(pr.second.factor)][std::size_t(pr.second.slot)] = p;
  }

  std::vector<int> val(std::size_t(std::max(np, 1)), 0);
  double total = 0.0;
  for (;;) {
    double prod = 1.0;
    for (std::size_t i = 0; i < nf && prod != 0.0; ++i) {
      if (is_metric[i]) {
        prod *= (val[std::size_t(pid[i][0])] == val[std::size_t(pid[i][1])]) ? 1.0 : 0.0;
        continue;
      }
      if (!tab[i]) continue;
      std::size_t idx = 0;
      const auto& slots = pid[i];
      for (int s : slots) idx = idx * std::size_t(n) + std::size_t(val[std::size_t(s)]);
      prod *= (*tab[i])[idx];
    }
    total += prod;
    int ax = np - 1;
    while (ax >= 0 && ++val[std::size_t(ax)] == n) {
      val[std::size_t(ax)] = 0;
      --ax;
    }
    if (ax < 0) break;
  }
  return coeff * total;
}

double eval(const LinComb& l, Tables& tb) {
  int nsub = tb.dim();
  if (l.dim != formal_dim && l.dim != tb.dim())
    throw Error("DimensionMismatch", "lincomb pinned to a different dimension");
  double s = 0.0;
  for (const Term& t : l.terms) s += eval_term(t, tb, nsub);
  return s;
}

int required_order(const LinComb& l) {
  int k = 2;
  for (const Term& t : l.terms)
    for (const Factor& f : t.c.factors) switch (f.kind) {
        case FactorKind::Riemann:
        case FactorKind::Ricci: k = std::max(k, f.deriv + 2); break;
        case FactorKind::Psi: k = std::max(k, f.deriv); break;
        case FactorKind::SXi:
        case FactorKind::SGamma: k = std::max(k, f.deriv + 1); break;
        default: break;
      }
  return k;
}

double check_vanishes(const LinComb& l, int dim, int jets, std::uint64_t seed,
                      int order, double lambda) {
  if (order <= 0) order = required_order(l);
  if (l.dim != formal_dim && l.dim != dim)
    throw Error("DimensionMismatch", "lincomb pinned to a different dimension");
  int nsub = dim;

  // free tensors present in l get seeded random prescriptions
  std::vector<std::pair<std::pair<int, int>, bool>> frees;  // ((label,rank), is_special)
  for (const Term& t : l.terms)
    for (const Factor& f : t.c.factors)
      if (f.kind == FactorKind::Omega || f.kind == FactorKind::SpecialXi) {
        std::pair<std::pair<int, int>, bool> key{{f.label, f.rank},
                                                 f.kind == FactorKind::SpecialXi};
        if (std::find(frees.begin(), frees.end(), key) == frees.end())
          frees.push_back(key);
      }

  std::vector<double> res(std::size_t(jets), 0.0);
  parallel_for(jets, [&](int j) {
    MetricJet g = random_metric(dim, order, mix(seed, std::uint64_t(j)));
    Tables tb(g, mix(seed, 1000 + std::uint64_t(j)), lambda);
    for (const auto& fr : frees) {
      std::uint64_t s2 = mix(mix(seed, 7000 + std::uint64_t(j)),
                             std::uint64_t(fr.first.first * 64 + fr.first.second +
                                           (fr.second ? 4096 : 0)));
      if (fr.second)
        tb.prescribe_special_xi(fr.first.first, fr.first.second,
                                random_symmetric(dim, fr.first.second, 1, s2));
      else
        tb.prescribe_omega(fr.first.first, fr.first.second,
                           random_symmetric(dim, fr.first.second, 0, s2));
    }
    double sum = 0.0, scale = 0.0;
    for (const Term& t : l.terms) {
      double v = eval_term(t, tb, nsub);
      sum += v;
      scale = std::max(scale, std::fabs(v));
    }
    res[std::size_t(j)] = std::fabs(sum) / std::max(1.0, scale);
  });
  double worst = 0.0;
  for (double r : res) worst = std::max(worst, r);
  return worst;
}

std::vector<double> linearized_random(int dim, std::uint64_t seed) {
  int n = dim;
  std::mt19937_64 rng(seed);
  std::vector<double> T(ipow(n, 4));
  for (double& x : T) x = sym11(rng);
  auto at = [&](const std::vector<double>& v, int i, int j, int k, int l) {
    return v[((std::size_t(i) * std::size_t(n) + std::size_t(j)) * std::size_t(n) + std::size_t(k)) * std::size_t(n) +
             std::size_t(l)];
  };
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> w(T.size());
    double delta = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 0.25 * (at(T, i, j, k, l) - at(T, j, i, k, l) -
                               at(T, i, j, l, k) + at(T, j, i, l, k));
            w[((std::size_t(i) * std::size_t(n) + std::size_t(j)) * std::size_t(n) + std::size_t(k)) * std::size_t(n) +
              std::size_t(l)] = v;
          }
    std::vector<double> w2(T.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            w2[((std::size_t(i) * std::size_t(n) + std::size_t(j)) * std::size_t(n) + std::size_t(k)) * std::size_t(n) +
               std::size_t(l)] = 0.5 * (at(w, i, j, k, l) + at(w, k, l, i, j));
    std::vector<double> out(T.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double b = (at(w2, i, j, k, l) + at(w2, i, k, l, j) +
                        at(w2, i, l, j, k)) / 3.0;
            double v = at(w2, i, j, k, l) - b;
            out[((std::size_t(i) * std::size_t(n) + std::size_t(j)) * std::size_t(n) + std::size_t(k)) * std::size_t(n) +
                std::size_t(l)] = v;
          }
    for (std::size_t x = 0; x < T.size(); ++x)
      delta = std::max(delta, std::fabs(out[x] - T[x]));
    T = std::move(out);
    if (delta < 1e-12) return T;
  }
  throw Error("ProjectionDidNotConverge",
              "curvature symmetry projection did not reach 1e-12");
}

// ---------------------------------------------------------------------------
// torus integrals

double TrigPoly::value(const std::vector<double>& x) const {
  double s = 0.0;
  for (const TrigMode& m : modes) {
    double th = m.phase;
    for (int i = 0; i < dim; ++i) th += double(m.freq[std::size_t(i)]) * x[std::size_t(i)];
    s += m.amp * std::cos(th);
  }
  return s;
}

Jet TrigPoly::taylor(const std::vector<double>& x, int order) const {
  Jet r = jet_const(dim, order, 0.0);
  for (const TrigMode& m : modes) {
    double th0 = m.phase;
    for (int i = 0; i < dim; ++i) th0 += double(m.freq[std::size_t(i)]) * x[std::size_t(i)];
    Jet lin = jet_const(dim, order, 0.0);
    for (int i = 0; i < dim; ++i)
      if (m.freq[std::size_t(i)] != 0)
        lin = lin + double(m.freq[std::size_t(i)]) * jet_coord(dim, order, i);
    // cos(th0 + L) = cos th0 cos L - sin th0 sin L with L nilpotent
    Jet cosl = jet_const(dim, order, 1.0);
    Jet sinl = jet_const(dim, order, 0.0);
    Jet pw = jet_const(dim, order, 1.0);
    for (int k = 1; k <= order; ++k) {
      Jet nt = jet_const(dim, order, 0.0);
      mul_acc(nt, pw, lin, 1.0 / double(k));
      pw = std::move(nt);
      int rmod = k % 4;
      if (rmod == 1)
        for (std::size_t q = 0; q < pw.c.size(); ++q) sinl.c[q] += pw.c[q];
      else if (rmod == 2)
        for (std::size_t q = 0; q < pw.c.size(); ++q) cosl.c[q] -= pw.c[q];
      else if (rmod == 3)
        for (std::size_t q = 0; q < pw.c.size(); ++q) sinl.c[q] -= pw.c[q];
      else
        for (std::size_t q = 0; q < pw.c.size(); ++q) cosl.c[q] += pw.c[q];
    }
    r = r + m.amp * (std::cos(th0) * cosl - std::sin(th0) * sinl);
  }
  return r;
}

TrigPoly random_trig(int dim, int max_freq, int mode_count, double amp,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrigPoly p;
  p.dim = dim;
  for (int m = 0; m < mode_count; ++m) {
    TrigMode md;
    md.freq.assign(std::size_t(dim), 0);
    bool nonzero = false;
    for (int i = 0; i < dim; ++i) {
      int f = int(std::floor(unit01(rng) * double(2 * max_freq + 1))) - max_freq;
      f = std::max(-max_freq, std::min(max_freq, f));
      md.freq[std::size_t(i)] = f;
      nonzero = nonzero || f != 0;
    }
    if (!nonzero) md.freq[0] = 1;
    md.phase = 6.283185307179586476925286766559 * unit01(rng);
    md.amp = amp * (0.5 + 0.5 * unit01(rng));
    p.modes.push_back(std::move(md));
  }
  return p;
}

double torus_integral(const LinComb& l, int dim, int grid, std::uint64_t seed,
                      double* scale_out) {
  if (grid < 8) throw Error("GridTooCoarse", "need at least 8 points per axis");
  if (l.dim != formal_dim && l.dim != dim)
    throw Error("DimensionMismatch", "lincomb pinned to a different dimension");
  for (const Term& t : l.terms)
    for (const Factor& f : t.c.factors)
      if (f.kind != FactorKind::Riemann && f.kind != FactorKind::Ricci &&
          f.kind != FactorKind::ScalarR && f.kind != FactorKind::Psi &&
          f.kind != FactorKind::Metric)
        throw Error("UnsupportedFactor",
                    "torus integration covers intrinsic and scalar-tower factors");
  int order = required_order(l);
  TrigPoly phi = random_trig(dim, 1, 2 * dim, 0.05, mix(seed, 7));
  std::map<int, TrigPoly> psis;
  for (const Term& t : l.terms)
    for (const Factor& f : t.c.factors)
      if (f.kind == FactorKind::Psi && !psis.count(f.label))
        psis[f.label] = random_trig(dim, 1, 2 * dim, 0.3, mix(seed, 100 + std::uint64_t(f.label)));

  std::size_t total = ipow(grid, dim);
  const double two_pi = 6.283185307179586476925286766559;
  double cell = std::pow(two_pi / double(grid), dim);
  int nblocks = int(std::min<std::size_t>(256, total));
  std::vector<double> bsum(std::size_t(nblocks), 0.0);
  std::vector<double> bscale(std::size_t(nblocks), 0.0);

  parallel_for(nblocks, [&](int b) {
    std::size_t lo = total * std::size_t(b) / std::size_t(nblocks);
    std::size_t hi = total * std::size_t(b + 1) / std::size_t(nblocks);
    std::vector<double> x(static_cast<std::size_t>(dim));
    double acc = 0.0, asc = 0.0;
    for (std::size_t pt = lo; pt < hi; ++pt) {
      std::size_t rem = pt;
      for (int i = dim - 1; i >= 0; --i) {
        x[std::size_t(i)] = two_pi * double(rem % std::size_t(grid)) / double(grid);
        rem /= std::size_t(grid);
      }
      Jet ph = phi.taylor(x, order);
      Jet e2 = jet_exp(ph + ph);
      MetricJet m;
      m.dim = dim;
      m.order = order;
      m.g.assign(std::size_t(dim) * std::size_t(dim), Jet{});
      Jet zero = jet_const(dim, order, 0.0);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
          m.g[std::size_t(i) * std::size_t(dim) + std::size_t(j)] = (i == j) ? e2 : zero;
      Tables tb(m, mix(seed, 555), 1.0);
      for (auto& kv : psis) tb.prescribe_psi(kv.first, kv.second.taylor(x, order));
      double vol = std::exp(double(dim) * ph.value()) * cell;
      for (const Term& t : l.terms) {
        double v = eval_term(t, tb, dim) * vol;
        acc += v;
        asc += std::fabs(v);
      }
    }
    bsum[std::size_t(b)] = acc;
    bscale[std::size_t(b)] = asc;
  });
  double s = 0.0, sc = 0.0;
  for (int b = 0; b < nblocks; ++b) {
    s += bsum[std::size_t(b)];
    sc += bscale[std::size_t(b)];
  }
  if (scale_out) *scale_out = sc;
  return s;
}

}  // namespace confinv::num
