#pragma once

// Internal workbench representation: per-slot integer links instead of slot
// pairs. Link ids >= 0 appear exactly twice (a contracted pair, one inverse
// metric each); ids -1-k mark the k-th free slot. All expansion engines
// operate on this form and convert at the API boundary.

#include <vector>

#include "confinv/expr.hpp"

namespace confinv::detail {

struct FView {
  Factor f;
  std::vector<int> lab;  // one link id per slot
};

struct TView {
  Rational scalar{1};
  RationalFnN qofn{Rational(1)};
  std::vector<FView> fs;
  int next = 0;  // next unused nonnegative link id

  int fresh() { return next++; }
};

TView to_view(const Term& t);
Term from_view(const TView& v);

// Renumbers nonnegative links to 0..L-1 in first-occurrence order and
// recomputes next. Free ids unchanged.
void tidy(TView& v);

int free_count(const TView& v);

}  // namespace confinv::detail
