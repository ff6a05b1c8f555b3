#pragma once

#include <iosfwd>

#include <json.hpp>

#include "forumcp/autoten.hpp"
#include "forumcp/tensor.hpp"

namespace forumcp {

/// Binary factor file: a 20-byte header ("CPF1", then I, J, K and R as
/// little-endian uint32) followed by U, T and W in row-major order as
/// little-endian float64.
void write_factors(std::ostream& out, const CPModel<double>& model);
CPModel<double> read_factors(std::istream& in);

/// Sidecar manifest for a factor file: solver settings, sweep count,
/// objective trace and, when a rank search ran, its full candidate table.
nlohmann::ordered_json factor_manifest(const CPModel<double>& model, const SolverOptions& opts,
                                       const RankSelection* selection);

nlohmann::ordered_json rank_selection_json(const RankSelection& selection);

}  // namespace forumcp
