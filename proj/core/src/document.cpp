#include <flownet/document.hpp>

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace flownet {

namespace {

using json = nlohmann::ordered_json;

void allow_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError("missing key '" + std::string(key) + "' in " + where);
  return obj.at(key);
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ParseError("'" + std::string(key) + "' in " + where + " must be a number");
  return v.get<double>();
}

std::string text(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError("'" + std::string(key) + "' in " + where + " must be a string");
  return v.get<std::string>();
}

std::vector<std::pair<double, double>> points(const json& obj, const std::string& where) {
  const json& v = require(obj, "points", where);
  if (!v.is_array()) throw ParseError("'points' in " + where + " must be an array of pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& p : v) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ParseError("'points' in " + where + " must be an array of [x, y] number pairs");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

ResistiveLaw parse_law(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be an object");
  const std::string form = text(j, "form", where);
  try {
    if (form == "linear" || form == "relu") {
      allow_keys(j, {"form", "conductance"}, where);
      const double K = number(j, "conductance", where);
      return form == "linear" ? ResistiveLaw::linear(K) : ResistiveLaw::relu(K);
    }
    if (form == "tanh") {
      allow_keys(j, {"form", "conductance", "scale"}, where);
      return ResistiveLaw::tanh(number(j, "conductance", where), number(j, "scale", where));
    }
    if (form == "tabulated") {
      allow_keys(j, {"form", "points"}, where);
      return ResistiveLaw::tabulated(points(j, where));
    }
  } catch (const ValidationError& e) {
    throw ParseError(where + ": " + e.what());
  }
  if (form == "inductive") {
    try {
      require_supported(LawKind::inductive);
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  throw ParseError("unknown law form '" + form + "' in " + where);
}

json law_json(const ResistiveLaw& law) {
  json j;
  j["form"] = std::string(law.form_name());
  std::visit(
      [&j](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, LinearResistance> || std::is_same_v<T, ReluResistance>) {
          j["conductance"] = f.conductance;
        } else if constexpr (std::is_same_v<T, TanhResistance>) {
          j["conductance"] = f.conductance;
          j["scale"] = f.scale;
        } else {
          json pts = json::array();
          for (const auto& [x, y] : f.curve.points()) pts.push_back({x, y});
          j["points"] = pts;
        }
      },
      law.form());
  return j;
}

CapacitiveLaw parse_capacity(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be an object");
  const std::string form = text(j, "form", where);
  try {
    if (form == "linear") {
      allow_keys(j, {"form", "capacitance"}, where);
      return CapacitiveLaw::linear(number(j, "capacitance", where));
    }
    if (form == "tabulated") {
      allow_keys(j, {"form", "points"}, where);
      return CapacitiveLaw::tabulated(points(j, where));
    }
  } catch (const ValidationError& e) {
    throw ParseError(where + ": " + e.what());
  }
  throw ParseError("unknown capacity form '" + form + "' in " + where);
}

NodeKind parse_node_kind(const std::string& s, const std::string& where) {
  if (s == "dynamic") return NodeKind::dynamic;
  if (s == "terminal") return NodeKind::terminal;
  if (s == "datum") return NodeKind::datum;
  throw ParseError("unknown node kind '" + s + "' in " + where);
}

BranchKind parse_branch_kind(const std::string& s, const std::string& where) {
  if (s == "resistive") return BranchKind::resistive;
  if (s == "controlled") return BranchKind::controlled;
  if (s == "terminal-source") return BranchKind::terminal_source;
  if (s == "production") return BranchKind::production;
  throw ParseError("unknown branch kind '" + s + "' in " + where);
}

json array_of(const json& root, const char* key, bool required) {
  if (!root.contains(key)) {
    if (required) throw ParseError(std::string("missing key '") + key + "'");
    return json::array();
  }
  if (!root.at(key).is_array()) throw ParseError(std::string("'") + key + "' must be an array");
  return root.at(key);
}

}  // namespace

NetworkDocument parse_document(const std::string& source) {
  json root;
  try {
    root = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  allow_keys(root, {"format_version", "nodes", "terminals", "branches", "controllers"}, "document");

  NetworkDocument doc;
  doc.format_version = text(root, "format_version", "document");
  if (doc.format_version != kDocumentVersion)
    throw ParseError("unsupported format_version '" + doc.format_version + "' (expected " + kDocumentVersion + ")");

  for (const auto& n : array_of(root, "nodes", true)) {
    const std::string where = "node " + (n.is_object() && n.contains("id") ? n["id"].dump() : std::string("entry"));
    allow_keys(n, {"id", "kind", "capacitance", "capacity"}, where);
    Node node;
    node.id = text(n, "id", where);
    node.kind = parse_node_kind(text(n, "kind", where), where);
    if (n.contains("capacitance") && n.contains("capacity"))
      throw ParseError(where + " gives both 'capacitance' and 'capacity'");
    if (n.contains("capacitance")) node.capacity = CapacitiveLaw::linear(number(n, "capacitance", where));
    if (n.contains("capacity")) node.capacity = parse_capacity(n.at("capacity"), where + " capacity");
    doc.network.nodes.push_back(std::move(node));
  }

  for (const auto& t : array_of(root, "terminals", false)) {
    const std::string where = "terminal " + (t.is_object() && t.contains("id") ? t["id"].dump() : std::string("entry"));
    allow_keys(t, {"id", "boundary", "value"}, where);
    const std::string id = text(t, "id", where);
    const std::string boundary = text(t, "boundary", where);
    const double value = number(t, "value", where);
    if (doc.boundary.potentials.count(id) || doc.boundary.flows.count(id))
      throw ParseError("terminal '" + id + "' is listed twice");
    if (boundary == "potential")
      doc.boundary.potentials[id] = value;
    else if (boundary == "flow")
      doc.boundary.flows[id] = value;
    else
      throw ParseError(where + ": boundary must be 'potential' or 'flow'");
  }

  for (const auto& b : array_of(root, "branches", true)) {
    const std::string where = "branch " + (b.is_object() && b.contains("id") ? b["id"].dump() : std::string("entry"));
    allow_keys(b, {"id", "from", "to", "kind", "law", "flow"}, where);
    Branch br;
    br.id = text(b, "id", where);
    br.from = text(b, "from", where);
    br.to = text(b, "to", where);
    br.kind = b.contains("kind") ? parse_branch_kind(text(b, "kind", where), where) : BranchKind::resistive;
    if (b.contains("law")) br.law = parse_law(b.at("law"), where + " law");
    if (b.contains("flow")) {
      if (br.kind != BranchKind::terminal_source) throw ParseError(where + ": 'flow' is only valid on terminal sources");
      br.source_flow = number(b, "flow", where);
    } else if (br.kind == BranchKind::terminal_source) {
      throw ParseError(where + ": terminal sources need 'flow'");
    }
    doc.network.branches.push_back(std::move(br));
  }

  for (const auto& c : array_of(root, "controllers", false)) {
    const std::string where = "controller " + (c.is_object() && c.contains("node") ? c["node"].dump() : std::string("entry"));
    allow_keys(c, {"node", "branch", "gain", "setpoint", "bounds"}, where);
    ControllerSpec spec;
    spec.node = text(c, "node", where);
    spec.branch = text(c, "branch", where);
    spec.gain = number(c, "gain", where);
    spec.setpoint = number(c, "setpoint", where);
    if (c.contains("bounds")) {
      const json& bj = c.at("bounds");
      allow_keys(bj, {"lower", "upper"}, where + " bounds");
      spec.bounds = FlowBounds{number(bj, "lower", where + " bounds"), number(bj, "upper", where + " bounds")};
    }
    doc.controllers.push_back(std::move(spec));
  }
  return doc;
}

std::string serialize_document(const NetworkDocument& doc) {
  json root;
  root["format_version"] = doc.format_version;
  json nodes = json::array();
  for (const auto& n : doc.network.nodes) {
    json j;
    j["id"] = n.id;
    j["kind"] = std::string(to_string(n.kind));
    if (n.capacity) {
      if (n.capacity->is_linear()) {
        j["capacitance"] = n.capacity->capacitance();
      } else {
        json pts = json::array();
        for (const auto& [x, y] : std::get<TabulatedCapacity>(n.capacity->form()).curve.points()) pts.push_back({x, y});
        j["capacity"] = {{"form", "tabulated"}, {"points", pts}};
      }
    }
    nodes.push_back(std::move(j));
  }
  root["nodes"] = nodes;

  json terminals = json::array();
  for (const auto& n : doc.network.nodes) {
    if (auto it = doc.boundary.potentials.find(n.id); it != doc.boundary.potentials.end())
      terminals.push_back({{"id", n.id}, {"boundary", "potential"}, {"value", it->second}});
    if (auto it = doc.boundary.flows.find(n.id); it != doc.boundary.flows.end())
      terminals.push_back({{"id", n.id}, {"boundary", "flow"}, {"value", it->second}});
  }
  // Entries naming unknown nodes survive the round trip; build_network rejects them.
  for (const auto& [id, v] : doc.boundary.potentials)
    if (std::none_of(doc.network.nodes.begin(), doc.network.nodes.end(), [&](const Node& n) { return n.id == id; }))
      terminals.push_back({{"id", id}, {"boundary", "potential"}, {"value", v}});
  for (const auto& [id, v] : doc.boundary.flows)
    if (std::none_of(doc.network.nodes.begin(), doc.network.nodes.end(), [&](const Node& n) { return n.id == id; }))
      terminals.push_back({{"id", id}, {"boundary", "flow"}, {"value", v}});
  root["terminals"] = terminals;

  json branches = json::array();
  for (const auto& b : doc.network.branches) {
    json j;
    j["id"] = b.id;
    j["from"] = b.from;
    j["to"] = b.to;
    j["kind"] = std::string(to_string(b.kind));
    if (b.law) j["law"] = law_json(*b.law);
    if (b.kind == BranchKind::terminal_source) j["flow"] = b.source_flow;
    branches.push_back(std::move(j));
  }
  root["branches"] = branches;

  if (!doc.controllers.empty()) {
    json ctrls = json::array();
    for (const auto& c : doc.controllers) {
      json j{{"node", c.node}, {"branch", c.branch}, {"gain", c.gain}, {"setpoint", c.setpoint}};
      if (c.bounds) j["bounds"] = {{"lower", c.bounds->lower}, {"upper", c.bounds->upper}};
      ctrls.push_back(std::move(j));
    }
    root["controllers"] = ctrls;
  }
  return root.dump(2) + "\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

NetworkDocument load_document(const std::filesystem::path& path) { return parse_document(read_text(path)); }

void save_document(const NetworkDocument& doc, const std::filesystem::path& path) {
  write_text(path, serialize_document(doc));
}

ProcessNetwork build_network(const NetworkDocument& doc, BuildOptions options) {
  ProcessNetwork net = ProcessNetwork::build(doc.network, options);
  validate_boundary(net, doc.boundary);
  if (!doc.controllers.empty()) validate_controllers(net, doc.controllers);
  return net;
}

}  // namespace flownet
