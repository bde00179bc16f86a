#pragma once

#include <flownet/dynamics.hpp>
#include <flownet/neuralode.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace flownet {

/// Numeric CSV with optional leading `# key=value` comment lines.
struct CsvTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a header column; throws ParseError when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

/// Header t,w_<node>...,Z_<node>...,F_<branch>..., 17 significant digits.
std::string trajectory_csv(const Trajectory& traj);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);

/// Trajectory-shaped CSV: noisy w, noiseless Z and F, preceded by metadata
/// comments (generator, seed, noise, dt, boundary potentials).
std::string dataset_csv(const Dataset& data);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
/// Reads t and the w_ columns plus the metadata; clean series stay empty.
Dataset parse_dataset(const std::string& text);
Dataset read_dataset(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace flownet
