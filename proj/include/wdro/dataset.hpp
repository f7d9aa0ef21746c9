#ifndef WDRO_DATASET_HPP
#define WDRO_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "wdro/types.hpp"

namespace wdro {

/// Which CSV columns hold what. An empty feature list means "every column
/// that is not the label or the target".
struct ColumnSchema {
  std::vector<std::string> features;
  std::optional<std::string> label = std::string("y");
  std::optional<std::string> target;
  std::optional<int> num_labels;
};

/// Reads a headered CSV of decimal literals. Row order is preserved; J is
/// the largest label seen unless the schema overrides it. A schema without
/// a label column yields J = 1 with every label set to 1 (regression).
Dataset load_dataset(const std::string& path, const ColumnSchema& schema);
Dataset parse_dataset(const std::string& csv_text, const ColumnSchema& schema);

/// Median of the pairwise Euclidean feature distances; nullopt when n < 2.
std::optional<double> median_pairwise_distance(const Dataset& data);

}  // namespace wdro

#endif  // WDRO_DATASET_HPP
