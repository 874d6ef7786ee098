#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrsm/bootstrap.hpp"
#include "lrsm/common.hpp"
#include "lrsm/effects.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/model.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

// Comma-separated table: one header row, then rows of numeric cells. A
// non-numeric first column is treated as unit ids and kept out of `values`.
struct CsvTable {
  std::vector<std::string> header;  // numeric column names, in file order
  std::string id_name;              // label of the id column, if any
  std::vector<std::string> ids;     // empty when there is no id column
  Matrix values;                    // rows × numeric columns
};

// ParseError messages carry "path:line:column".
CsvTable read_csv(const std::string& path);

// Builds the regression frame: response column selected by name, every other
// numeric column a covariate, intercept prepended.
DesignData load_data(const std::string& path, const std::string& response);

// n×2 coordinates: columns named x/y when present, otherwise the first two
// numeric columns.
Matrix read_coords(const std::string& path);

// Writes via a temporary file in the same directory plus rename, so readers
// never observe a partial file.
void atomic_write(const std::string& path, const std::string& content);

// Shortest representation that round-trips exactly (report determinism).
std::string format_double(double v);

std::string effects_csv(const EffectsEstimate& est);
std::string bootstrap_csv(const FittedModel& fitted, const EffectsEstimate& est,
                          const BootstrapResult& res);
std::string fit_report_json(const FittedModel& fitted,
                            const EffectsEstimate* effects,
                            const double* moran, Index n, Index l);

// FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t h = 14695981039346656037ULL);

// Content identity of a scaled matrix plus requested rank, for naming the
// eigenpair cache file.
std::uint64_t weights_content_hash(const SpatialWeights& w, Index l);

void save_basis(const std::string& path, const EigenBasis& basis,
                std::uint64_t content_hash);
// Returns false (leaving `out` untouched) when the file is absent or its
// stored hash disagrees.
bool load_basis(const std::string& path, std::uint64_t content_hash,
                EigenBasis& out);

}  // namespace lrsm
