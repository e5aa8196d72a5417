#include "curltd/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace curltd {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(Error::Kind::Configuration, msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) config_error(where + ": unknown key '" + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec3(const json& j, const char* key, Vec3& out) {
  if (j.contains(key)) out = vec3_from_json(j.at(key));
}

}  // namespace

GeometrySpec geometry_from_json(const json& j) {
  check_keys(j, {"kind", "extents", "cells", "h", "layout", "outer_radius", "grading", "inclusion_radius", "center",
                 "magnet_slab"},
             "geometry");
  GeometrySpec g;
  if (j.contains("kind")) g.kind = geometry_kind_from_string(j.at("kind").get<std::string>());
  read_vec3(j, "extents", g.extents);
  read(j, "cells", g.cells);
  read(j, "h", g.h);
  if (j.contains("layout")) {
    const auto& l = j.at("layout");
    check_keys(l, {"bottom_air", "magnet", "air_gap", "design"}, "geometry.layout");
    read(l, "bottom_air", g.layout.bottom_air);
    read(l, "magnet", g.layout.magnet);
    read(l, "air_gap", g.layout.air_gap);
    read(l, "design", g.layout.design);
  }
  read(j, "outer_radius", g.outer_radius);
  read(j, "grading", g.grading);
  read(j, "inclusion_radius", g.inclusion_radius);
  read_vec3(j, "center", g.center);
  read(j, "magnet_slab", g.magnet_slab);
  validate(g);
  return g;
}

json to_json(const GeometrySpec& g) {
  return {{"kind", to_string(g.kind)},
          {"extents", curltd::to_json(g.extents)},
          {"cells", g.cells},
          {"h", g.h},
          {"layout",
           {{"bottom_air", g.layout.bottom_air},
            {"magnet", g.layout.magnet},
            {"air_gap", g.layout.air_gap},
            {"design", g.layout.design}}},
          {"outer_radius", g.outer_radius},
          {"grading", g.grading},
          {"inclusion_radius", g.inclusion_radius},
          {"center", curltd::to_json(g.center)},
          {"magnet_slab", g.magnet_slab}};
}

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  try {
    check_keys(j, {"geometry", "material", "magnet", "target", "solve", "cell", "grid", "tables", "optimize",
                   "output_dir", "seed"},
               "config");
    RunConfig c;
    c.base_dir = base_dir;
    c.geometry.kind = GeometryKind::ToyMotor;
    c.geometry.extents = Vec3(0.08, 0.05, 0.02);
    c.geometry.h = 0.005;
    if (j.contains("geometry")) {
      json g = j.at("geometry");
      if (!g.contains("kind")) g["kind"] = "toy-motor";
      c.geometry = geometry_from_json(g);
    }
    if (c.geometry.kind != GeometryKind::ToyMotor) config_error("config: optimization needs a toy-motor geometry");
    if (j.contains("material")) {
      const auto& m = j.at("material");
      check_keys(m, {"nu0", "q1", "q2", "q3"}, "material");
      read(m, "nu0", c.material.nu0);
      read(m, "q1", c.material.q1);
      read(m, "q2", c.material.q2);
      read(m, "q3", c.material.q3);
      c.material.validate();
    }
    if (j.contains("magnet")) {
      const auto& m = j.at("magnet");
      check_keys(m, {"magnitude", "poles", "direction"}, "magnet");
      read(m, "magnitude", c.magnet.magnitude);
      read(m, "poles", c.magnet.poles);
      read_vec3(m, "direction", c.magnet.direction);
      if (c.magnet.poles < 1) config_error("magnet: poles must be positive");
    }
    if (j.contains("target")) {
      const auto& t = j.at("target");
      check_keys(t, {"mode", "amplitude", "periods", "phase", "direction"}, "target");
      if (t.contains("mode")) c.target.mode = target_mode_from_string(t.at("mode").get<std::string>());
      read(t, "amplitude", c.target.amplitude);
      read(t, "periods", c.target.periods);
      read(t, "phase", c.target.phase);
      read_vec3(t, "direction", c.target.direction);
      if (c.target.direction.norm() == 0.0) config_error("target: direction must be nonzero");
      c.target.direction.normalize();
    }
    if (j.contains("solve")) {
      const auto& s = j.at("solve");
      check_keys(s, {"kappa", "newton_tol", "max_newton", "line_search_halvings", "linear_tol"}, "solve");
      read(s, "kappa", c.solve.kappa);
      read(s, "newton_tol", c.solve.newton_tol);
      read(s, "max_newton", c.solve.max_newton);
      read(s, "line_search_halvings", c.solve.line_search_halvings);
      read(s, "linear_tol", c.solve.linear_tol);
      c.solve.validate();
    }
    c.cell.solve = c.solve;
    if (j.contains("cell")) {
      const auto& s = j.at("cell");
      check_keys(s, {"epsilon", "h", "grading"}, "cell");
      read(s, "epsilon", c.cell.epsilon);
      read(s, "h", c.cell.h);
      read(s, "grading", c.cell.grading);
      validate(c.cell.geometry());
    }
    if (j.contains("grid")) {
      const auto& s = j.at("grid");
      check_keys(s, {"delta_t", "t_max"}, "grid");
      read(s, "delta_t", c.grid.delta_t);
      read(s, "t_max", c.grid.t_max);
    }
    c.grid.validate();
    if (j.contains("tables")) {
      const auto& s = j.at("tables");
      check_keys(s, {"a1_into_a2", "a2_into_a1"}, "tables");
      read(s, "a1_into_a2", c.tables.iron_into_air);
      read(s, "a2_into_a1", c.tables.air_into_iron);
    }
    if (j.contains("optimize")) {
      const auto& s = j.at("optimize");
      check_keys(s, {"s", "iterations", "clamp"}, "optimize");
      read(s, "s", c.optimize.s);
      read(s, "iterations", c.optimize.iterations);
      read(s, "clamp", c.optimize.clamp);
    }
    if (!(c.optimize.s > 0.0 && c.optimize.s < 1.0)) config_error("optimize: s must lie in (0, 1)");
    if (c.optimize.iterations < 0) config_error("optimize: iterations must be nonnegative");
    read(j, "output_dir", c.output_dir);
    read(j, "seed", c.seed);
    return c;
  } catch (const json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("config not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    config_error(path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return from_json(j, dir.empty() ? "." : dir.string());
}

json RunConfig::to_json() const {
  return {{"geometry", curltd::to_json(geometry)},
          {"material", {{"nu0", material.nu0}, {"q1", material.q1}, {"q2", material.q2}, {"q3", material.q3}}},
          {"magnet",
           {{"magnitude", magnet.magnitude}, {"poles", magnet.poles}, {"direction", curltd::to_json(magnet.direction)}}},
          {"target",
           {{"mode", to_string(target.mode)},
            {"amplitude", target.amplitude},
            {"periods", target.periods},
            {"phase", target.phase},
            {"direction", curltd::to_json(target.direction)}}},
          {"solve",
           {{"kappa", solve.kappa},
            {"newton_tol", solve.newton_tol},
            {"max_newton", solve.max_newton},
            {"line_search_halvings", solve.line_search_halvings},
            {"linear_tol", solve.linear_tol}}},
          {"cell", {{"epsilon", cell.epsilon}, {"h", cell.h}, {"grading", cell.grading}}},
          {"grid", {{"delta_t", grid.delta_t}, {"t_max", grid.t_max}}},
          {"tables", {{"a1_into_a2", tables.iron_into_air}, {"a2_into_a1", tables.air_into_iron}}},
          {"optimize", {{"s", optimize.s}, {"iterations", optimize.iterations}, {"clamp", optimize.clamp}}},
          {"output_dir", output_dir},
          {"seed", seed}};
}

std::string RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace curltd
