#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pklab/constants.hpp"
#include "pklab/domain.hpp"
#include "pklab/green.hpp"
#include "pklab/verify.hpp"
#include "pklab/version.hpp"
#include "pklab/wos.hpp"

namespace pklab {

using ordered_json = nlohmann::ordered_json;

inline std::string tool_version() {
  return std::string("pklab ") + kVersion;
}

// Fixed-width round-trip formatting for CSV cells. JSON fields rely on the
// serializer's shortest-round-trip output instead; both are deterministic
// for a given value.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
  return buf;
}

inline const std::vector<std::string>& check_registry() {
  static const std::vector<std::string> names = {
      "kernel_sandwich", "ball_closeness", "flatness_window",
      "reifenberg_sigma", "normal_bmo",     "ahlfors_band",
      "ahlfors_coarse",   "pole_gradient",  "graph_map"};
  return names;
}

// One experiment: a domain recipe, sampling and probe budgets, and the set
// of checks whose verdicts gate the run.
struct ScenarioSpec {
  int schema = kSchemaVersion;
  int dim = 2;
  double base_radius = 1.0;
  std::vector<Mode> modes;
  double amplitude = 0.0;
  bool normalize = true;
  std::int64_t cloud_samples = 150000;
  WosConfig wos;
  ChainBudgets budgets;
  std::vector<std::string> checks;  // empty = every registered check
  std::vector<double> family;      // optional amplitude ladder
  std::uint64_t seed = 1;
  std::string out_dir;
};

inline void validate_checks(const std::vector<std::string>& names) {
  const auto& reg = check_registry();
  for (const std::string& n : names) {
    bool known = false;
    for (const std::string& r : reg) known = known || r == n;
    if (!known)
      throw std::invalid_argument("scenario: unknown check '" + n + "'");
  }
}

inline ordered_json scenario_to_json(const ScenarioSpec& s) {
  ordered_json modes = ordered_json::array();
  for (const Mode& m : s.modes)
    modes.push_back(
        {{"degree", m.degree}, {"order", m.order}, {"coeff", m.coeff}});
  ordered_json j;
  j["schema"] = s.schema;
  j["domain"] = {{"dim", s.dim},
                 {"base_radius", s.base_radius},
                 {"modes", modes},
                 {"amplitude", s.amplitude},
                 {"normalize", s.normalize}};
  j["cloud_samples"] = s.cloud_samples;
  j["wos"] = {{"stop_shell", s.wos.stop_shell},
              {"far_skip", s.wos.far_skip},
              {"max_steps", s.wos.max_steps},
              {"censor_limit", s.wos.censor_limit}};
  j["budgets"] = {{"kernel_sites", s.budgets.kernel_sites},
                  {"cap_fraction", s.budgets.cap_fraction},
                  {"kernel_trajectories", s.budgets.kernel_trajectories},
                  {"center_count", s.budgets.center_count},
                  {"sigma_target", s.budgets.sigma_target},
                  {"sup_width_frac", s.budgets.sup_width_frac},
                  {"sup_width_count", s.budgets.sup_width_count},
                  {"sup_width_shrink", s.budgets.sup_width_shrink},
                  {"sup_probes", s.budgets.sup_probes},
                  {"sup_per_node", s.budgets.sup_per_node},
                  {"sup_nodes", s.budgets.sup_nodes}};
  j["checks"] = s.checks;
  j["family"] = s.family;
  j["seed"] = s.seed;
  j["out_dir"] = s.out_dir;
  return j;
}

inline ScenarioSpec scenario_from_json(const ordered_json& j) {
  ScenarioSpec s;
  if (!j.is_object()) throw std::invalid_argument("scenario: not an object");
  s.schema = j.value("schema", kSchemaVersion);
  if (s.schema != kSchemaVersion)
    throw std::invalid_argument("scenario: unsupported schema version");
  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    s.dim = d.value("dim", 2);
    s.base_radius = d.value("base_radius", 1.0);
    s.amplitude = d.value("amplitude", 0.0);
    s.normalize = d.value("normalize", true);
    for (const auto& m : d.value("modes", ordered_json::array()))
      s.modes.push_back({m.value("degree", 0), m.value("order", 0),
                         m.value("coeff", 0.0)});
  }
  if (s.dim != 2)
    throw std::invalid_argument(
        "scenario: only boundary dimension 2 is supported");
  s.cloud_samples = j.value("cloud_samples", std::int64_t(150000));
  if (j.contains("wos")) {
    const auto& w = j.at("wos");
    s.wos.stop_shell = w.value("stop_shell", s.wos.stop_shell);
    s.wos.far_skip = w.value("far_skip", s.wos.far_skip);
    s.wos.max_steps = w.value("max_steps", s.wos.max_steps);
    s.wos.censor_limit = w.value("censor_limit", s.wos.censor_limit);
  }
  if (j.contains("budgets")) {
    const auto& b = j.at("budgets");
    auto& g = s.budgets;
    g.kernel_sites = b.value("kernel_sites", g.kernel_sites);
    g.cap_fraction = b.value("cap_fraction", g.cap_fraction);
    g.kernel_trajectories =
        b.value("kernel_trajectories", g.kernel_trajectories);
    g.center_count = b.value("center_count", g.center_count);
    g.sigma_target = b.value("sigma_target", g.sigma_target);
    g.sup_width_frac = b.value("sup_width_frac", g.sup_width_frac);
    g.sup_width_count = b.value("sup_width_count", g.sup_width_count);
    g.sup_width_shrink = b.value("sup_width_shrink", g.sup_width_shrink);
    g.sup_probes = b.value("sup_probes", g.sup_probes);
    g.sup_per_node = b.value("sup_per_node", g.sup_per_node);
    g.sup_nodes = b.value("sup_nodes", g.sup_nodes);
  }
  s.checks = j.value("checks", std::vector<std::string>{});
  validate_checks(s.checks);
  s.family = j.value("family", std::vector<double>{});
  s.seed = j.value("seed", std::uint64_t(1));
  s.out_dir = j.value("out_dir", std::string{});
  s.budgets.seed = s.seed;
  return s;
}

// Dotted-path override, applied after file parse: "budgets.sup_probes=32".
// Values parse as JSON when they can, else as strings.
inline void apply_override(ordered_json& j, const std::string& entry) {
  auto eq = entry.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key=value: " +
                                entry);
  std::string path = entry.substr(0, eq);
  std::string value = entry.substr(eq + 1);
  ordered_json* node = &j;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    std::string key = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty())
      throw std::invalid_argument("override has an empty key: " + entry);
    if (dot == std::string::npos) {
      ordered_json parsed =
          ordered_json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? ordered_json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline ordered_json check_to_json(const CheckResult& c) {
  ordered_json j;
  j["name"] = c.name;
  j["measured"] = c.measured;
  j["bound"] = c.bound;
  j["slack"] = c.slack;
  j["margin"] = c.margin;
  j["pass"] = c.pass;
  j["applicable"] = c.applicable;
  j["note"] = c.note;
  return j;
}

inline ordered_json domain_facts_json(const StarDomain& domain,
                                      const DimensionConstants& dims) {
  return {{"scale", domain.scale()},
          {"min_radius", domain.min_radius()},
          {"max_radius", domain.max_radius()},
          {"min_radius_bound", domain.min_radius_bound()},
          {"max_radius_bound", domain.max_radius_bound()},
          {"surface_area", domain.surface_area()},
          {"unit_measure_radius", dims.unit_measure_radius()}};
}

struct ReportMember {
  double amplitude = 0.0;
  const StarDomain* domain = nullptr;
  const ChainReport* chain = nullptr;
};

// Full run record: one member per amplitude (a plain run has one member).
// Numerical fields depend only on (spec, seed), so two runs of the same
// scenario produce identical bytes; wall-clock facts live in the manifest
// instead.
inline ordered_json report_to_json(const ScenarioSpec& spec,
                                   const DimensionConstants& dims,
                                   const std::vector<ReportMember>& members) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["tool"] = tool_version();
  j["scenario"] = scenario_to_json(spec);
  // Where the artifacts land is plumbing, not an input: the same scenario
  // must produce the same report bytes wherever it runs.
  j["scenario"].erase("out_dir");
  ordered_json arr = ordered_json::array();
  bool all = true;
  for (const ReportMember& m : members) {
    ordered_json e;
    e["amplitude"] = m.amplitude;
    e["domain"] = domain_facts_json(*m.domain, dims);
    e["kernel"] = {{"eps_hat", m.chain->eps_hat},
                   {"noise_floor", m.chain->noise_floor},
                   {"coverage", m.chain->coverage}};
    ordered_json checks = ordered_json::array();
    for (const CheckResult& c : m.chain->checks)
      checks.push_back(check_to_json(c));
    e["checks"] = checks;
    e["all_pass"] = m.chain->all_pass();
    all = all && m.chain->all_pass();
    arr.push_back(std::move(e));
  }
  j["members"] = std::move(arr);
  j["all_pass"] = all;
  return j;
}

inline CheckResult check_from_json(const ordered_json& j) {
  CheckResult c;
  c.name = j.value("name", std::string{});
  c.measured = j.value("measured", 0.0);
  c.bound = j.value("bound", 0.0);
  c.slack = j.value("slack", 0.0);
  c.margin = j.value("margin", 0.0);
  c.pass = j.value("pass", false);
  c.applicable = j.value("applicable", true);
  c.note = j.value("note", std::string{});
  return c;
}

// Rebuilds the in-memory verdicts from one report member, enough to render
// tables without recomputing anything.
inline ChainReport chain_from_member_json(const ordered_json& member) {
  ChainReport chain;
  const auto& k = member.at("kernel");
  chain.eps_hat = k.value("eps_hat", 0.0);
  chain.noise_floor = k.value("noise_floor", 0.0);
  chain.coverage = k.value("coverage", 0.0);
  for (const auto& c : member.at("checks"))
    chain.checks.push_back(check_from_json(c));
  return chain;
}

inline std::string dump_json(const ordered_json& j) {
  return j.dump(2) + "\n";
}

// Margin table for terminals: one row per check, widest headroom last.
inline std::string text_margin_table(const ChainReport& chain) {
  std::ostringstream out;
  out << "eps_hat " << format_double(chain.eps_hat) << "  noise_floor "
      << format_double(chain.noise_floor) << "  coverage "
      << format_double(chain.coverage) << "\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-18s %12s %12s %12s %12s  %s\n",
                "check", "measured", "bound", "slack", "margin", "verdict");
  out << line;
  for (const CheckResult& c : chain.checks) {
    const char* verdict =
        !c.applicable ? "unresolvable" : (c.pass ? "pass" : "FAIL");
    std::snprintf(line, sizeof(line),
                  "%-18s %12.5g %12.5g %12.5g %12.5g  %s\n", c.name.c_str(),
                  c.measured, c.bound, c.slack, c.margin, verdict);
    out << line;
    if (!c.note.empty()) out << "    note: " << c.note << "\n";
  }
  return out.str();
}

// Amplitude ladder summary: one row per family member, margins for every
// registered check (blank when a check was not run or not applicable).
inline std::string trend_table_csv(
    const std::vector<std::pair<double, const ChainReport*>>& rows) {
  std::ostringstream out;
  out << "amplitude,eps_hat,noise_floor,closeness,closeness_bound";
  for (const std::string& name : check_registry()) out << ",margin_" << name;
  out << "\n";
  for (const auto& [amplitude, report] : rows) {
    out << format_double(amplitude) << ","
        << format_double(report->eps_hat) << ","
        << format_double(report->noise_floor);
    double d_hat = 0.0, d_bound = 0.0;
    for (const CheckResult& c : report->checks)
      if (c.name == "ball_closeness") {
        d_hat = c.measured;
        d_bound = c.bound;
      }
    out << "," << format_double(d_hat) << "," << format_double(d_bound);
    for (const std::string& name : check_registry()) {
      out << ",";
      for (const CheckResult& c : report->checks)
        if (c.name == name && c.applicable) out << format_double(c.margin);
    }
    out << "\n";
  }
  return out.str();
}

inline std::string cloud_csv(const BoundaryCloud& cloud) {
  std::ostringstream out;
  out << "x0,x1,x2,n0,n1,n2,weight\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points.points[i];
    const Vec3& n = cloud.normals[i];
    out << format_double(p.x) << "," << format_double(p.y) << ","
        << format_double(p.z) << "," << format_double(n.x) << ","
        << format_double(n.y) << "," << format_double(n.z) << ","
        << format_double(cloud.weights[i]) << "\n";
  }
  return out.str();
}

// Inverse of cloud_csv up to the covering radius, which rides in a JSON
// sidecar because it is a property of the whole sample.
inline BoundaryCloud cloud_from_csv(const std::string& text, double spacing) {
  BoundaryCloud cloud;
  cloud.spacing = spacing;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.compare(0, pos, "x0,x1,x2,n0,n1,n2,weight") != 0)
    throw std::invalid_argument("cloud csv: unexpected header");
  const char* p = text.c_str() + pos + 1;
  while (*p) {
    double f[7];
    for (int k = 0; k < 7; ++k) {
      char* end = nullptr;
      f[k] = std::strtod(p, &end);
      if (end == p) throw std::invalid_argument("cloud csv: malformed row");
      p = end;
      if (*p == ',' || *p == '\n') ++p;
    }
    cloud.points.points.push_back({f[0], f[1], f[2]});
    cloud.normals.push_back({f[3], f[4], f[5]});
    cloud.weights.push_back(f[6]);
  }
  if (cloud.size() == 0) throw std::invalid_argument("cloud csv: no rows");
  return cloud;
}

inline std::string exits_csv(const std::vector<std::int32_t>& exit_indices) {
  std::ostringstream out;
  out << "trajectory,sample\n";
  for (std::size_t t = 0; t < exit_indices.size(); ++t)
    out << t << "," << exit_indices[t] << "\n";
  return out.str();
}

inline std::string kernel_csv(const KernelField& field) {
  std::ostringstream out;
  out << "x0,x1,x2,density,rel_stderr,cap_mass,hits,flagged\n";
  for (const KernelSite& s : field.sites)
    out << format_double(s.point.x) << "," << format_double(s.point.y) << ","
        << format_double(s.point.z) << "," << format_double(s.density) << ","
        << format_double(s.rel_stderr) << "," << format_double(s.cap_mass)
        << "," << s.hits << "," << (s.flagged ? 1 : 0) << "\n";
  return out.str();
}

inline ordered_json kernel_summary_json(const KernelField& field) {
  ordered_json j;
  j["eps_hat"] = field.eps_hat;
  j["noise_floor"] = field.noise_floor;
  j["coverage"] = field.coverage;
  j["cap_radius"] = field.cap_radius;
  j["area"] = field.area;
  j["min_density"] = field.min_density;
  j["max_density"] = field.max_density;
  j["total"] = field.total;
  return j;
}

struct FileRecord {
  std::string path;
  std::uint64_t hash = 0;
  std::uint64_t bytes = 0;
};

// Wall-clock and provenance record for one invocation. This is the only
// artifact allowed to differ between identical reruns.
struct RunManifest {
  std::string tool = tool_version();
  int schema = kSchemaVersion;
  std::string command;
  std::string started;
  std::string finished;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
};

inline ordered_json manifest_to_json(const RunManifest& m) {
  auto files = [](const std::vector<FileRecord>& list) {
    ordered_json arr = ordered_json::array();
    for (const FileRecord& f : list)
      arr.push_back({{"path", f.path},
                     {"fnv1a64", hex64(f.hash)},
                     {"bytes", f.bytes}});
    return arr;
  };
  ordered_json j;
  j["tool"] = m.tool;
  j["schema"] = m.schema;
  j["command"] = m.command;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["seed"] = m.seed;
  j["overrides"] = m.overrides;
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  return j;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes and records in one motion so nothing the run produces can escape
// the manifest.
inline void write_artifact(RunManifest& manifest, const std::string& path,
                           const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write on " + path);
  manifest.outputs.push_back({path, fnv1a64(content), content.size()});
}

inline void record_input(RunManifest& manifest, const std::string& path,
                         const std::string& content) {
  manifest.inputs.push_back({path, fnv1a64(content), content.size()});
}

}  // namespace pklab
