#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "forumcp/ingest.hpp"
#include "forumcp/tensor.hpp"

namespace forumcp::testing {

inline Date day(int y, unsigned m, unsigned d) {
  return std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

inline PostRecord post(std::string thread, std::string id, std::string user, Date date, std::string content,
                       std::string title = {}, std::string forum = "f") {
  return {std::move(forum), std::move(thread), std::move(id), std::move(user), date, std::move(content), std::move(title)};
}

inline PostTable table_of(std::vector<PostRecord> records) { return PostTable::from_records(std::move(records)); }

/// Dense value X(i,j,k) of a column-major I*J*K array.
inline double at(const Eigen::VectorXd& dense, const std::array<Index, 3>& s, Index i, Index j, Index k) {
  return dense(i + s[0] * (j + s[1] * k));
}

/// Triple loop over r: sum U(i,r) T(j,r) W(k,r), for every cell.
inline Eigen::VectorXd dense_model(const CPModel<double>& m) {
  const auto s = m.shape();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(s[0] * s[1] * s[2]);
  for (Index k = 0; k < s[2]; ++k)
    for (Index j = 0; j < s[1]; ++j)
      for (Index i = 0; i < s[0]; ++i) {
        double v = 0;
        for (Index r = 0; r < m.rank(); ++r) v += m.U(i, r) * m.T(j, r) * m.W(k, r);
        d(i + s[0] * (j + s[1] * k)) = v;
      }
  return d;
}

/// Mode-n unfolding: rows follow mode n, columns run over the remaining two
/// modes with the lower one fastest.
inline Eigen::MatrixXd unfold(const Eigen::VectorXd& dense, const std::array<Index, 3>& s, int mode) {
  const int a = mode == 0 ? 1 : 0;
  const int b = mode == 2 ? 1 : 2;
  Eigen::MatrixXd out(s[mode], s[a] * s[b]);
  for (Index k = 0; k < s[2]; ++k)
    for (Index j = 0; j < s[1]; ++j)
      for (Index i = 0; i < s[0]; ++i) {
        const Index idx[3] = {i, j, k};
        out(idx[mode], idx[a] + s[a] * idx[b]) = at(dense, s, i, j, k);
      }
  return out;
}

/// Khatri-Rao product B (.) A: row a + A.rows() * b is A(a,:) .* B(b,:).
inline Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& B, const Eigen::MatrixXd& A) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols());
  for (Index b = 0; b < B.rows(); ++b)
    for (Index a = 0; a < A.rows(); ++a) out.row(a + A.rows() * b) = A.row(a).cwiseProduct(B.row(b));
  return out;
}

/// Textbook MTTKRP: unfold, then multiply by the Khatri-Rao product.
inline Eigen::MatrixXd dense_mttkrp(const Eigen::VectorXd& dense, const std::array<Index, 3>& s, const CPModel<double>& m,
                                    int mode) {
  const Eigen::MatrixXd* f[3] = {&m.U, &m.T, &m.W};
  const int a = mode == 0 ? 1 : 0;
  const int b = mode == 2 ? 1 : 2;
  return unfold(dense, s, mode) * khatri_rao(*f[b], *f[a]);
}

/// Least-squares core through the full (IJK) x R^3 Kronecker matrix.
inline Eigen::VectorXd dense_core(const Eigen::VectorXd& dense, const CPModel<double>& m) {
  const Index R = m.rank();
  const auto s = m.shape();
  Eigen::MatrixXd K(s[0] * s[1] * s[2], R * R * R);
  for (Index k = 0; k < s[2]; ++k)
    for (Index j = 0; j < s[1]; ++j)
      for (Index i = 0; i < s[0]; ++i)
        for (Index r3 = 0; r3 < R; ++r3)
          for (Index r2 = 0; r2 < R; ++r2)
            for (Index r1 = 0; r1 < R; ++r1)
              K(i + s[0] * (j + s[1] * k), r1 + R * (r2 + R * r3)) = m.U(i, r1) * m.T(j, r2) * m.W(k, r3);
  return K.completeOrthogonalDecomposition().solve(dense);
}

/// Random nonnegative sparse tensor with roughly `density` of its cells set.
inline SparseTensor3<double> random_tensor(std::array<Index, 3> s, double density, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Entry<double>> e;
  for (Index k = 0; k < s[2]; ++k)
    for (Index j = 0; j < s[1]; ++j)
      for (Index i = 0; i < s[0]; ++i)
        if (uniform01(gen) < density) e.push_back({i, j, k, 1.0 + std::floor(uniform01(gen) * 5.0)});
  return SparseTensor3<double>::from_triplets(s, std::move(e));
}

/// Random nonnegative factors; every column has at least one positive entry.
inline CPModel<double> random_factors(std::array<Index, 3> s, Index rank, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  CPModel<double> m;
  Eigen::MatrixXd* f[3] = {&m.U, &m.T, &m.W};
  for (int d = 0; d < 3; ++d) {
    f[d]->resize(s[d], rank);
    for (Index r = 0; r < rank; ++r)
      for (Index n = 0; n < s[d]; ++n) (*f[d])(n, r) = 0.1 + uniform01(gen);
  }
  return m;
}

inline SparseTensor3<double> tensor_of(const CPModel<double>& m) {
  return SparseTensor3<double>::from_dense(m.shape(), dense_model(m));
}

template <typename T>
double set_jaccard(const std::vector<T>& a, const std::vector<T>& b) {
  const std::set<T> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& x : sa) common += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("forumcp-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace forumcp::testing

namespace forumcp::testing {

/// Disjoint planted block by index ranges: users [u0, u0+nu), threads
/// [t0, t0+nt), slots [w0, w0+nw).
struct IndexBlock {
  Index u0, nu, t0, nt, w0, nw;
};

/// Poisson(intensity) counts on every block cell plus Poisson(noise) counts
/// on every other cell.
inline SparseTensor3<double> planted_tensor(std::array<Index, 3> s, const std::vector<IndexBlock>& blocks,
                                            double intensity, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::poisson_distribution<int> hit(intensity);
  std::poisson_distribution<int> bg(noise > 0 ? noise : 1.0);
  std::vector<Entry<double>> e;
  for (Index k = 0; k < s[2]; ++k)
    for (Index j = 0; j < s[1]; ++j)
      for (Index i = 0; i < s[0]; ++i) {
        bool inside = false;
        for (const auto& b : blocks) {
          inside = inside || (i >= b.u0 && i < b.u0 + b.nu && j >= b.t0 && j < b.t0 + b.nt && k >= b.w0 && k < b.w0 + b.nw);
        }
        const int v = inside ? hit(gen) : (noise > 0 ? bg(gen) : 0);
        if (v > 0) e.push_back({i, j, k, static_cast<double>(v)});
      }
  return SparseTensor3<double>::from_triplets(s, std::move(e));
}

inline std::vector<Index> range_of(Index start, Index n) {
  std::vector<Index> out;
  for (Index v = start; v < start + n; ++v) out.push_back(v);
  return out;
}

/// Indices whose entry in column `r` is at least `floor` times the column max.
inline std::vector<Index> support(const Eigen::MatrixXd& A, Index r, double floor) {
  std::vector<Index> out;
  const double top = A.col(r).maxCoeff();
  if (!(top > 0)) return out;
  for (Index n = 0; n < A.rows(); ++n)
    if (A(n, r) > 0 && A(n, r) >= floor * top) out.push_back(n);
  return out;
}

/// Non-increasing within a relative slack per step.
inline bool non_increasing(const std::vector<double>& trace, double slack = 1e-8) {
  for (std::size_t t = 1; t < trace.size(); ++t)
    if (trace[t] > trace[t - 1] * (1.0 + slack)) return false;
  return true;
}

}  // namespace forumcp::testing

#include "forumcp/synthetic.hpp"

namespace forumcp::testing {

/// Small two-block forum that runs through the whole pipeline in seconds.
inline std::vector<PostRecord> small_forum(std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.forum_id = "small";
  spec.users = 50;
  spec.threads = 60;
  spec.weeks = 10;
  spec.noise_rate = 0.1;
  spec.seed = seed;
  for (int b = 0; b < 2; ++b) {
    PlantedBlock p;
    p.users = 10;
    p.threads = 12;
    p.week_start = 1 + 4 * b;
    p.weeks = 3;
    p.intensity = 2.0;
    spec.blocks.push_back(p);
  }
  return generate_synthetic(spec).posts;
}

/// Every file under `dir` with its bytes, keyed by relative path.
inline std::map<std::string, std::string> tree_of(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

}  // namespace forumcp::testing
