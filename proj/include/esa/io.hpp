#pragma once

// CSV panels, site tables and atomic file output. Numbers are written with 17
// significant digits so every value reloads bit-exactly.

#include "esa/error.hpp"
#include "esa/fn_core.hpp"
#include "esa/registration.hpp"
#include "esa/spatial.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace esa {

// Row-level CSV failure; the message carries file and line number.
class ParseError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

std::string format_double(double v);

// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

using Panel = std::vector<std::vector<SampledFunction>>;  // [i][j]

// Long format: header i,j,t,value. Rows may come in any order. Curves whose t
// values are not the uniform grid with their sample count are linearly
// resampled onto it; every curve must end up on one grid.
Panel read_panel_csv(const std::filesystem::path& path);
std::string panel_csv(const Panel& panel);

// j,t,value
std::vector<SampledFunction> read_functions_csv(const std::filesystem::path& path);
std::string functions_csv(const std::vector<SampledFunction>& fs);

// i,j,t,value
std::string warps_csv(const std::vector<std::vector<Warp>>& warps);
// i,t,value: one warp per observation.
std::string observation_warps_csv(const std::vector<Warp>& warps);
std::vector<std::vector<Warp>> read_warps_csv(const std::filesystem::path& path);

struct SiteTable {
  SpatialLayout layout;
  std::vector<std::string> labels;  // empty unless a label column is present
};
// Header j,x,y[,z][,label]; rows sorted by j on load and j must be 0..K-1.
SiteTable read_sites_csv(const std::filesystem::path& path);
std::string sites_csv(const SpatialLayout& layout, const std::vector<std::string>& labels = {});

MvSample read_sample(const std::filesystem::path& panel, const std::filesystem::path& sites);

// bin_center,count,estimate,fitted_value (nan when no model).
std::string variogram_csv(const EmpiricalVariogram& emp, const std::optional<VariogramModel>& model);

}  // namespace esa
