#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "caml/divergence.hpp"

namespace caml::harness {

enum class ColType { integer, real, text };

/// Column names and types for one CSV kind. Emitted files must parse against
/// their schema exactly (header match, each cell parseable).
struct CsvSchema {
  std::string name;
  std::vector<std::pair<std::string, ColType>> columns;
};

const CsvSchema& curves_schema();      // update,mean_return,std_return,learner,query_id,seed
const CsvSchema& endpoints_schema();   // learner,query_id,seed,update,episode,end_x,end_y
const CsvSchema& bandit_schema();      // learner,query_id,seed,pull,medoid_index,episode_return,chosen
const CsvSchema& assignment_schema();  // index,label,is_medoid

/// Whole file as rows of cells. No quoting; the writers never emit commas
/// inside cells.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// Throws std::invalid_argument naming the offending row/column.
void validate_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Distance matrices carry a dynamic header (id,<id0>,<id1>,...); validated
/// structurally instead of against a fixed schema.
DistanceMatrix read_distance_csv(const std::filesystem::path& path,
                                 std::vector<int>* ids = nullptr);

}  // namespace caml::harness
