#include "cfsim/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfsim::matching {

Matching Matching::identity(int n) {
  Matching m;
  m.assign.resize(n);
  for (int i = 0; i < n; ++i) m.assign[i] = i;
  return m;
}

bool is_feasible(const Matching& m) {
  const int n = m.n();
  std::vector<char> seen(n, 0);
  for (int a : m.assign) {
    if (a == Matching::kIdle) continue;
    if (a < 0 || a >= n || seen[a]) return false;
    seen[a] = 1;
  }
  return true;
}

namespace {

// Kuhn augmenting path over an arbitrary edge predicate. visited uses a
// stamp so callers can reuse the buffer without clearing. Free columns are
// tried before recursing into occupied ones: on dense supports a direct hit
// is the common case and keeps repairs near O(n).
template <class HasEdge>
bool kuhn_augment(int row, int n, const HasEdge& has_edge, std::vector<int>& col_owner,
                  std::vector<int>& row_match, std::vector<int>& visited, int stamp) {
  for (int j = 0; j < n; ++j) {
    if (visited[j] == stamp || col_owner[j] >= 0 || !has_edge(row, j)) continue;
    visited[j] = stamp;
    col_owner[j] = row;
    row_match[row] = j;
    return true;
  }
  for (int j = 0; j < n; ++j) {
    if (visited[j] == stamp || !has_edge(row, j)) continue;
    visited[j] = stamp;
    if (kuhn_augment(col_owner[j], n, has_edge, col_owner, row_match, visited, stamp)) {
      col_owner[j] = row;
      row_match[row] = j;
      return true;
    }
  }
  return false;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// O(n^3) shortest-augmenting-path assignment (minimization). Produces an
// optimal row->col assignment and dual potentials with
// u[i] + v[j] <= cost(i,j), tight on every optimal assignment's edges.
void hungarian_min(int n, const std::vector<double>& cost, std::vector<int>& row_to_col,
                   std::vector<double>& u, std::vector<double>& v) {
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> uu(n + 1, 0.0), vv(n + 1, 0.0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - uu[i0] - vv[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          uu[p[j]] += delta;
          vv[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  row_to_col.assign(n, -1);
  u.assign(n, 0.0);
  v.assign(n, 0.0);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  for (int i = 1; i <= n; ++i) u[i - 1] = uu[i];
  for (int j = 1; j <= n; ++j) v[j - 1] = vv[j];
}

}  // namespace

Matching max_weight_matching(int n, const std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("max_weight_matching: n must be >= 1");
  if (w.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("max_weight_matching: weight size mismatch");
  double wmax = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::invalid_argument("max_weight_matching: weights must be finite and >= 0");
    wmax = std::max(wmax, x);
  }

  // Maximize w  <=>  minimize wmax - w.
  std::vector<double> cost(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) cost[k] = wmax - w[k];
  std::vector<int> row_to_col;
  std::vector<double> u, v;
  hungarian_min(n, cost, row_to_col, u, v);

  // Every maximum-weight assignment lies in the tight subgraph of the duals.
  const double eps = 1e-9 * std::max(1.0, wmax);
  auto tight = [&](int i, int j) {
    return cost[static_cast<std::size_t>(i) * n + j] - u[i] - v[j] <= eps;
  };

  // Lexicographically smallest perfect matching inside the tight subgraph,
  // maintained incrementally: fixing (i,j) keeps a perfect matching alive on
  // the unfixed rows if the displaced row can be re-augmented.
  std::vector<int> col_owner(n, -1);
  for (int i = 0; i < n; ++i) col_owner[row_to_col[i]] = i;
  std::vector<char> fixed_col(n, 0);
  std::vector<int> visited(n, -1);
  int stamp = 0;

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (fixed_col[j] || !tight(i, j)) continue;
      if (row_to_col[i] == j) break;  // already matched here; lex-minimal so far
      int displaced = col_owner[j];
      int old_col = row_to_col[i];
      // Tentatively give j to row i, then reroute the displaced row.
      col_owner[j] = i;
      row_to_col[i] = j;
      col_owner[old_col] = -1;
      row_to_col[displaced] = -1;
      auto usable = [&](int r, int c) { return !fixed_col[c] && c != j && tight(r, c); };
      ++stamp;
      if (kuhn_augment(displaced, n, usable, col_owner, row_to_col, visited, stamp)) break;
      // Revert.
      row_to_col[displaced] = j;
      col_owner[j] = displaced;
      row_to_col[i] = old_col;
      col_owner[old_col] = i;
    }
    fixed_col[row_to_col[i]] = 1;
  }

  Matching m;
  m.assign = row_to_col;
  return m;
}

Matching max_weight_matching(const std::vector<std::vector<double>>& weights) {
  const int n = static_cast<int>(weights.size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& row : weights) {
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("max_weight_matching: ragged weights");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return max_weight_matching(n, flat);
}

BvnDecomposition bvn_decompose(int n, const std::vector<double>& rate) {
  if (n < 1) throw std::invalid_argument("bvn_decompose: n must be >= 1");
  if (rate.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("bvn_decompose: rate size mismatch");
  constexpr double kSlack = 1e-12;
  std::vector<double> row_sum(n, 0.0), col_sum(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = rate[static_cast<std::size_t>(i) * n + j];
      if (x < 0.0 || !std::isfinite(x))
        throw std::invalid_argument("bvn_decompose: entries must be finite and >= 0");
      row_sum[i] += x;
      col_sum[j] += x;
    }
  for (int i = 0; i < n; ++i)
    if (row_sum[i] > 1.0 + kSlack || col_sum[i] > 1.0 + kSlack)
      throw std::invalid_argument("bvn_decompose: rate matrix is not sub-stochastic");

  // Pad to doubly stochastic.
  std::vector<double> d = rate;
  {
    std::vector<double> rdef(n), cdef(n);
    for (int i = 0; i < n; ++i) rdef[i] = std::max(0.0, 1.0 - row_sum[i]);
    for (int j = 0; j < n; ++j) cdef[j] = std::max(0.0, 1.0 - col_sum[j]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n && rdef[i] > 0.0; ++j) {
        double add = std::min(rdef[i], cdef[j]);
        if (add <= 0.0) continue;
        d[static_cast<std::size_t>(i) * n + j] += add;
        rdef[i] -= add;
        cdef[j] -= add;
      }
  }

  constexpr double kTol = 1e-12;
  auto has_edge = [&](int i, int j) { return d[static_cast<std::size_t>(i) * n + j] > kTol; };

  BvnDecomposition out;
  std::vector<int> col_owner(n, -1), row_match(n, -1), visited(n, -1);
  int stamp = 0;
  const int max_terms = n * n - 2 * n + 2 + 1;
  for (int term = 0; term < max_terms; ++term) {
    // Rebuild a perfect matching on the current support.
    std::fill(col_owner.begin(), col_owner.end(), -1);
    std::fill(row_match.begin(), row_match.end(), -1);
    bool perfect = true;
    for (int i = 0; i < n; ++i) {
      ++stamp;
      if (!kuhn_augment(i, n, has_edge, col_owner, row_match, visited, stamp)) {
        perfect = false;
        break;
      }
    }
    if (!perfect) break;  // residual below tolerance on some line; discard it

    double theta = kInf;
    for (int i = 0; i < n; ++i)
      theta = std::min(theta, d[static_cast<std::size_t>(i) * n + row_match[i]]);
    if (theta <= kTol) break;
    Matching m;
    m.assign = row_match;
    out.matchings.push_back(std::move(m));
    out.probabilities.push_back(theta);
    for (int i = 0; i < n; ++i) {
      double& cell = d[static_cast<std::size_t>(i) * n + row_match[i]];
      cell -= theta;
      if (cell < kTol) cell = 0.0;
    }
    bool done = true;
    for (double x : d)
      if (x > kTol) {
        done = false;
        break;
      }
    if (done) break;
  }
  return out;
}

BvnDecomposition bvn_decompose(const std::vector<std::vector<double>>& rate) {
  const int n = static_cast<int>(rate.size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& row : rate) {
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("bvn_decompose: ragged rate matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return bvn_decompose(n, flat);
}

ClearanceSchedule clearance_schedule(const traffic::TrafficMatrix& x) {
  const int n = x.n();
  ClearanceSchedule out;
  out.covers = x;
  const std::int64_t tau = traffic::clearance_time(x);
  if (tau == 0) return out;
  out.matchings.reserve(static_cast<std::size_t>(tau));

  // Pad with dummy packets until every row and column sum equals tau; the
  // dummies are never transmitted, they only regularize the support.
  std::vector<std::int64_t> p(x.data().begin(), x.data().end());
  {
    std::vector<std::int64_t> rdef = x.row_sums(), cdef = x.col_sums();
    for (int i = 0; i < n; ++i) rdef[i] = tau - rdef[i];
    for (int j = 0; j < n; ++j) cdef[j] = tau - cdef[j];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n && rdef[i] > 0; ++j) {
        std::int64_t add = std::min(rdef[i], cdef[j]);
        if (add <= 0) continue;
        p[static_cast<std::size_t>(i) * n + j] += add;
        rdef[i] -= add;
        cdef[j] -= add;
      }
  }

  auto has_edge = [&](int i, int j) { return p[static_cast<std::size_t>(i) * n + j] > 0; };
  std::vector<int> col_owner(n, -1), row_match(n, -1), visited(n, -1);
  int stamp = 0;
  for (int i = 0; i < n; ++i) {
    ++stamp;
    if (!kuhn_augment(i, n, has_edge, col_owner, row_match, visited, stamp))
      throw std::logic_error("clearance_schedule: no perfect matching on padded support");
  }

  std::int64_t remaining = tau;
  while (remaining > 0) {
    std::int64_t mult = remaining;
    for (int i = 0; i < n; ++i)
      mult = std::min(mult, p[static_cast<std::size_t>(i) * n + row_match[i]]);
    Matching m;
    m.assign = row_match;
    for (std::int64_t k = 0; k < mult; ++k) out.matchings.push_back(m);
    remaining -= mult;
    if (remaining == 0) break;
    // Peel off the multiplicity and re-augment the rows whose matched entry
    // hit zero; all line sums stay equal, so Hall keeps this feasible.
    for (int i = 0; i < n; ++i) {
      std::int64_t& cell = p[static_cast<std::size_t>(i) * n + row_match[i]];
      cell -= mult;
    }
    for (int i = 0; i < n; ++i) {
      if (p[static_cast<std::size_t>(i) * n + row_match[i]] == 0) {
        col_owner[row_match[i]] = -1;
        row_match[i] = -1;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (row_match[i] >= 0) continue;
      ++stamp;
      if (!kuhn_augment(i, n, has_edge, col_owner, row_match, visited, stamp))
        throw std::logic_error("clearance_schedule: matching repair failed");
    }
  }
  return out;
}

}  // namespace cfsim::matching
