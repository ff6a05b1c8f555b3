#include "forumcp/factor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "forumcp/error.hpp"

namespace forumcp {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'F', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw ValidationError("factor file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_factors(std::ostream& out, const CPModel<double>& model) {
  const auto shape = model.shape();
  for (Index d : {shape[0], shape[1], shape[2], model.rank()}) {
    if (d < 0 || d > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("factor dimension does not fit in 32 bits");
  }
  out.write(kMagic, sizeof kMagic);
  for (Index d : {shape[0], shape[1], shape[2], model.rank()}) put_le(out, static_cast<std::uint32_t>(d));
  for (Mode m : kModes) {
    const Matrix<double>& A = model.factor(m);
    for (Index r = 0; r < A.rows(); ++r)
      for (Index c = 0; c < A.cols(); ++c) put_le(out, A(r, c));
  }
  if (!out) throw Error("io_error", "failed to write factor file");
}

CPModel<double> read_factors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ValidationError("not a CPF1 factor file");
  }
  std::array<Index, 4> dims;
  for (Index& d : dims) d = get_le<std::uint32_t>(in);
  CPModel<double> model;
  for (Mode m : kModes) {
    Matrix<double>& A = model.factor(m);
    A.resize(dims[static_cast<int>(m)], dims[3]);
    for (Index r = 0; r < A.rows(); ++r)
      for (Index c = 0; c < A.cols(); ++c) A(r, c) = get_le<double>(in);
  }
  return model;
}

nlohmann::ordered_json rank_selection_json(const RankSelection& selection) {
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& c : selection.table) {
    table.push_back({{"family", family_name(c.family)},
                     {"rank", c.rank},
                     {"score", c.score},
                     {"pinv_fallback", c.pinv_fallback},
                     {"congruence", c.congruence},
                     {"nested", c.nested},
                     {"degenerate", c.degenerate},
                     {"sweeps", c.sweeps},
                     {"objective", c.objective}});
  }
  return {{"selected", selection.rank},
          {"cp_als_rank", selection.als_rank},
          {"cp_apr_rank", selection.apr_rank},
          {"fallback", selection.fallback},
          {"threshold", selection.threshold},
          {"table", std::move(table)}};
}

nlohmann::ordered_json factor_manifest(const CPModel<double>& model, const SolverOptions& opts,
                                       const RankSelection* selection) {
  const auto shape = model.shape();
  nlohmann::ordered_json j = {{"format", "CPF1"},
                              {"shape", {shape[0], shape[1], shape[2]}},
                              {"rank", model.rank()},
                              {"lambda", opts.lambda},
                              {"seed", opts.seed},
                              {"max_sweeps", opts.max_sweeps},
                              {"tolerance", opts.tolerance},
                              {"sweeps", model.sweeps},
                              {"converged", model.converged},
                              {"objective_trace", model.objective_trace},
                              {"warnings", model.warnings}};
  j["corcondia"] = selection ? rank_selection_json(*selection) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace forumcp
