#include <flownet/csv.hpp>
#include <flownet/document.hpp>
#include <flownet/version.hpp>

#include <charconv>
#include <cstdio>
#include <sstream>

namespace flownet {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ParseError("line " + std::to_string(line) + ": '" + t + "' is not a number");
  return v;
}

void append_row(std::string& out, const std::vector<const Vector*>& parts, double t) {
  out += format_double(t);
  for (const Vector* v : parts)
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      out += ',';
      out += format_double((*v)[i]);
    }
  out += '\n';
}

std::string header_line(const std::vector<std::string>& dyn, const std::vector<std::string>& branches) {
  std::string h = "t";
  for (const auto& id : dyn) h += ",w_" + id;
  for (const auto& id : dyn) h += ",Z_" + id;
  for (const auto& id : branches) h += ",F_" + id;
  return h + "\n";
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("CSV has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!table.header.empty()) throw ParseError("line " + std::to_string(lineno) + ": comment after the header");
      const std::string body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) table.metadata[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      continue;
    }
    if (table.header.empty()) {
      for (const auto& h : split(line, ',')) table.header.push_back(trim(h));
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, lineno));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ParseError("CSV has no header");
  return table;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = header_line(traj.dynamic_ids, traj.branch_ids);
  for (std::size_t k = 0; k < traj.size(); ++k) append_row(out, {&traj.w[k], &traj.Z[k], &traj.F[k]}, traj.times[k]);
  return out;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  write_text(path, trajectory_csv(traj));
}

std::string dataset_csv(const Dataset& d) {
  if (d.clean_Z.size() != d.size() || d.clean_F.size() != d.size())
    throw ValidationError("dataset has no simulator series to write");
  std::string out;
  out += "# generator=flownet " + std::string(kVersion) + "\n";
  out += "# seed=" + std::to_string(d.seed) + "\n";
  out += "# noise_frac=" + format_double(d.noise_frac) + "\n";
  out += "# noise_model=gaussian, std = noise_frac * per-node trajectory std, applied to w only\n";
  out += "# dt=" + format_double(d.dt) + "\n";
  std::string boundary;
  for (std::size_t i = 0; i < d.boundary_ids.size(); ++i) {
    if (i) boundary += ';';
    boundary += d.boundary_ids[i] + ":" + format_double(d.boundary_potentials[static_cast<Eigen::Index>(i)]);
  }
  out += "# boundary=" + boundary + "\n";
  out += header_line(d.dynamic_ids, d.branch_ids);
  for (std::size_t k = 0; k < d.size(); ++k) append_row(out, {&d.observed[k], &d.clean_Z[k], &d.clean_F[k]}, d.times[k]);
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) { write_text(path, dataset_csv(data)); }

Dataset parse_dataset(const std::string& text) {
  const CsvTable t = parse_csv(text);
  Dataset d;
  const auto meta = [&](const char* key) -> const std::string& {
    auto it = t.metadata.find(key);
    if (it == t.metadata.end()) throw ParseError(std::string("dataset lacks '# ") + key + "=' metadata");
    return it->second;
  };
  d.dt = parse_double(meta("dt"), 0);
  d.noise_frac = parse_double(meta("noise_frac"), 0);
  try {
    d.seed = std::stoull(meta("seed"));
  } catch (const std::logic_error&) {
    throw ParseError("dataset seed is not an unsigned integer");
  }
  std::vector<double> potentials;
  for (const auto& entry : split(meta("boundary"), ';')) {
    const auto colon = entry.rfind(':');
    if (colon == std::string::npos) throw ParseError("malformed boundary metadata '" + entry + "'");
    d.boundary_ids.push_back(trim(entry.substr(0, colon)));
    potentials.push_back(parse_double(entry.substr(colon + 1), 0));
  }
  d.boundary_potentials = Eigen::Map<const Vector>(potentials.data(), static_cast<Eigen::Index>(potentials.size()));

  if (t.header.empty() || t.header[0] != "t") throw ParseError("dataset's first column must be t");
  std::vector<std::size_t> wcols;
  for (std::size_t i = 1; i < t.header.size(); ++i) {
    const std::string& h = t.header[i];
    if (h.rfind("w_", 0) == 0) {
      d.dynamic_ids.push_back(h.substr(2));
      wcols.push_back(i);
    } else if (h.rfind("F_", 0) == 0) {
      d.branch_ids.push_back(h.substr(2));
    }
  }
  if (wcols.empty()) throw ParseError("dataset has no w_ columns");
  for (const auto& row : t.rows) {
    d.times.push_back(row[0]);
    Vector w(static_cast<Eigen::Index>(wcols.size()));
    for (std::size_t i = 0; i < wcols.size(); ++i) w[static_cast<Eigen::Index>(i)] = row[wcols[i]];
    d.observed.push_back(std::move(w));
  }
  for (std::size_t k = 1; k < d.times.size(); ++k) {
    const double step = d.times[k] - d.times[k - 1];
    if (std::abs(step - d.dt) > 1e-9 * std::max(1.0, d.dt))
      throw ParseError("dataset time grid is not uniform with spacing dt");
  }
  return d;
}

Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_text(path)); }

}  // namespace flownet
