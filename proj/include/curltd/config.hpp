#pragma once

#include "curltd/optimizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace curltd {

struct TablePaths {
  std::string iron_into_air = "tables/a1-into-a2.json";
  std::string air_into_iron = "tables/a2-into-a1.json";
};

/// JSON run configuration. Unknown keys anywhere are rejected with
/// Error::Configuration; relative paths are taken relative to the config
/// file's directory.
struct RunConfig {
  GeometrySpec geometry;
  SaturationLaw material;
  MagnetSpec magnet;
  TargetSpec target;
  SolveSettings solve;
  CellSettings cell;
  GridSpec grid;
  TablePaths tables;
  OptimizeSettings optimize;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  std::string base_dir = ".";

  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  std::string resolve(const std::string& path) const;
};

GeometrySpec geometry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeometrySpec& g);

}  // namespace curltd
