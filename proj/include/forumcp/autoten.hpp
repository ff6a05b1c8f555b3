#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "forumcp/corcondia.hpp"
#include "forumcp/cp_apr.hpp"

namespace forumcp {

enum class FitFamily { als, apr };

inline const char* family_name(FitFamily f) { return f == FitFamily::als ? "cp_als" : "cp_apr"; }

struct RankCandidate {
  FitFamily family = FitFamily::als;
  Index rank = 0;
  double score = 0.0;
  bool pinv_fallback = false;
  /// Largest three-mode congruence between two components.
  double congruence = 0.0;
  /// Some component lies inside another's support in all three modes.
  bool nested = false;
  /// A component vanished or overlaps another by congruence or nesting.
  bool degenerate = false;
  int sweeps = 0;
  double objective = 0.0;
};

/// Knobs of the rank search.
struct RankSearch {
  double threshold = 50.0;
  /// A family stops after this many consecutive ineligible ranks; 0 sweeps
  /// every rank up to r_max.
  int patience = 5;
};

struct RankSelection {
  Index rank = 0;
  /// Largest eligible rank per family, 0 when the family has none.
  Index als_rank = 0;
  Index apr_rank = 0;
  /// No candidate was eligible; `rank` is the best-scoring candidate.
  bool fallback = false;
  double threshold = 50.0;
  std::vector<RankCandidate> table;
};

/// min(50, smallest tensor dimension).
inline Index default_max_rank(const std::array<Index, 3>& shape) {
  return std::max<Index>(1, std::min<Index>({Index{50}, shape[0], shape[1], shape[2]}));
}

namespace detail {

// A Poisson component explaining less than this share of the fitted mass
// counts as vanished.
inline constexpr double kMinPoissonShare = 0.01;

// Two components whose three-mode congruence reaches this describe one event.
inline constexpr double kMaxCongruence = 0.3;

/// Largest Tucker congruence (product of the per-mode column cosines) over
/// all component pairs; zero columns count as orthogonal.
template <typename Scalar>
double max_congruence(const CPModel<Scalar>& m) {
  double best = 0.0;
  std::array<Vector<Scalar>, 3> norms;
  for (Mode mode : kModes) norms[static_cast<int>(mode)] = m.factor(mode).colwise().norm().transpose();
  for (Index a = 0; a < m.rank(); ++a)
    for (Index b = a + 1; b < m.rank(); ++b) {
      double c = 1.0;
      for (Mode mode : kModes) {
        const auto& A = m.factor(mode);
        const auto& n = norms[static_cast<int>(mode)];
        const Scalar denom = n(a) * n(b);
        c *= denom > Scalar(0) ? static_cast<double>(A.col(a).dot(A.col(b)) / denom) : 0.0;
      }
      best = std::max(best, c);
    }
  return best;
}

// A component sharing at least this fraction of its smaller support with
// another component in every mode is a piece of the same event.
inline constexpr double kMaxNestedOverlap = 0.8;

/// True when, for some pair of components, every mode's supports overlap by
/// at least kMaxNestedOverlap of the smaller one. Only meaningful for fits
/// with exact zeros.
template <typename Scalar>
bool has_nested_components(const CPModel<Scalar>& m) {
  for (Index a = 0; a < m.rank(); ++a)
    for (Index b = a + 1; b < m.rank(); ++b) {
      bool nested = true;
      for (Mode mode : kModes) {
        const auto& A = m.factor(mode);
        const auto in_a = (A.col(a).array() > Scalar(0)).eval();
        const auto in_b = (A.col(b).array() > Scalar(0)).eval();
        const Index common = (in_a && in_b).count();
        const Index smaller = std::min(in_a.count(), in_b.count());
        if (smaller == 0 || static_cast<double>(common) < kMaxNestedOverlap * static_cast<double>(smaller)) {
          nested = false;
          break;
        }
      }
      if (nested) return true;
    }
  return false;
}

template <typename Scalar>
bool has_vanished_component(const CPModel<Scalar>& m, FitFamily family) {
  if (!m.dead_components().empty()) return true;
  if (family == FitFamily::als) return false;
  const auto weight = (m.U.colwise().sum().array() * m.T.colwise().sum().array() * m.W.colwise().sum().array()).eval();
  return (weight < Scalar(kMinPoissonShare) * weight.sum()).any();
}

inline std::uint64_t rank_seed(std::uint64_t seed, Index rank) {
  return seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(rank));
}

inline bool eligible(const RankCandidate& c, double threshold) { return c.score >= threshold && !c.degenerate; }

template <typename Scalar>
RankCandidate assess(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& m, FitFamily family) {
  const CoreConsistency<Scalar> cc = corcondia(x, m);
  RankCandidate c;
  c.family = family;
  c.rank = m.rank();
  c.score = cc.score;
  c.pinv_fallback = cc.pinv_fallback;
  c.congruence = max_congruence(m);
  c.nested = family == FitFamily::als && has_nested_components(m);
  c.degenerate = has_vanished_component(m, family) || c.congruence >= kMaxCongruence || c.nested;
  c.sweeps = m.sweeps;
  c.objective = static_cast<double>(m.objective_trace.back());
  return c;
}

}  // namespace detail

/// Rank selection by core consistency. Candidate ranks 1..r_max are fitted
/// with both the L1 least-squares model and the Poisson model. A candidate is
/// eligible when it scores at least the threshold and keeps every component
/// distinct and alive. Least-squares components count as distinct only when
/// no component's support sits inside another's in every mode. The selected
/// rank is the largest eligible rank over both families, or the
/// best-scoring candidate (flagged) when none is.
///
/// Least-squares candidates start from power_start_model with `opts.seed`,
/// so cp_als_nn_l1(x, rank, opts) reproduces the candidate fit exactly.
/// Poisson candidates start from random_poisson_model seeded per rank.
template <typename Scalar>
RankSelection autoten_rank(const SparseTensor3<Scalar>& x, Index r_max, const SolverOptions& opts,
                           const RankSearch& search = {}) {
  if (r_max < 1) throw ValidationError("r_max must be >= 1");
  if (x.empty()) throw ValidationError("cannot select a rank for an empty tensor");
  if (search.patience < 0) throw ValidationError("patience must be >= 0");
  RankSelection sel;
  sel.threshold = search.threshold;
  for (FitFamily family : {FitFamily::als, FitFamily::apr}) {
    PowerStart<Scalar> start(x, opts.seed);
    CPModel<Scalar> init;
    for (Mode m : kModes) init.factor(m).resize(x.dim(m), 0);
    int misses = 0;
    for (Index r = 1; r <= r_max; ++r) {
      CPModel<Scalar> m;
      if (family == FitFamily::als) {
        const auto v = start.next();
        for (Mode mode : kModes) {
          Matrix<Scalar>& A = init.factor(mode);
          A.conservativeResize(Eigen::NoChange, r);
          A.col(r - 1) = v[static_cast<int>(mode)];
        }
        m = cp_als_nn_l1(x, init, opts);
      } else {
        m = cp_apr(x, random_poisson_model(x, r, detail::rank_seed(opts.seed, r)), opts);
      }
      const RankCandidate c = detail::assess(x, m, family);
      sel.table.push_back(c);
      Index& best = family == FitFamily::als ? sel.als_rank : sel.apr_rank;
      if (detail::eligible(c, search.threshold)) {
        best = r;
        misses = 0;
      } else if (search.patience > 0 && ++misses >= search.patience) {
        break;
      }
    }
  }
  sel.rank = std::max(sel.als_rank, sel.apr_rank);
  if (sel.rank == 0) {
    sel.fallback = true;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& c : sel.table) {
      if (c.score > best_score || (c.score == best_score && c.rank < sel.rank)) {
        best_score = c.score;
        sel.rank = c.rank;
      }
    }
  }
  return sel;
}

}  // namespace forumcp
