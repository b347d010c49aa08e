#pragma once

// Dataset CSV files: header x1..xd,a,y with an optional tau_oracle column.

#include "permucate/dgp.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace permucate {

/// Shortest form that still carries 17 significant digits ("%.17g").
std::string format_double(double v);

/// Writes tau_oracle when `with_tau` and the dataset has a true CATE.
void write_dataset_csv(std::ostream& out, const Dataset& data, bool with_tau = true);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, bool with_tau = true);

/// Throws DataError naming the offending line for malformed input.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace permucate
