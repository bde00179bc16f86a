#pragma once

#include <flownet/control.hpp>
#include <flownet/dynamics.hpp>
#include <flownet/topology.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace flownet {

inline constexpr const char* kDocumentVersion = "1.0";

/// Everything a network file describes: graph and laws, boundary values and
/// controllers.
struct NetworkDocument {
  std::string format_version = kDocumentVersion;
  NetworkDefinition network;
  BoundaryConditions boundary;
  std::vector<ControllerSpec> controllers;

  friend bool operator==(const NetworkDocument&, const NetworkDocument&) = default;
};

/// JSON text to document. Syntax, schema and unknown keys raise ParseError;
/// graph and parameter checks are left to build_network.
NetworkDocument parse_document(const std::string& text);
std::string serialize_document(const NetworkDocument& doc);

NetworkDocument load_document(const std::filesystem::path& path);
void save_document(const NetworkDocument& doc, const std::filesystem::path& path);

/// Builds the network and checks the boundary conditions and controllers
/// against it.
ProcessNetwork build_network(const NetworkDocument& doc, BuildOptions options = {});

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace flownet
