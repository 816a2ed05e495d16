// Command-line front end: builds perturbed-ball domains, runs the harmonic
// measure engine, and evaluates the stability checks, leaving reproducible
// artifacts (JSON records, CSV tables, one manifest per run) in --out.
//
// Exit codes are a CI contract: 0 success, 1 a requested check failed,
// 2 usage or configuration error, 3 runtime or budget error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pklab/constants.hpp"
#include "pklab/domain.hpp"
#include "pklab/flatness.hpp"
#include "pklab/green.hpp"
#include "pklab/io.hpp"
#include "pklab/verify.hpp"
#include "pklab/wos.hpp"

namespace fs = std::filesystem;
using namespace pklab;

namespace {

std::string iso_utc_now() {
  std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int resolve_threads(int flag, bool flag_given) {
  if (flag_given) return flag;
  const char* env = std::getenv("PFL_THREADS");
  if (env && *env) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 0) return int(v);
  }
  return 0;
}

struct RunInputs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  int threads = 0;
  bool threads_given = false;
};

struct RunContext {
  ScenarioSpec spec;
  fs::path out;
  int threads = 0;
  RunManifest manifest;
};

RunContext begin_run(const RunInputs& in, const std::string& command) {
  RunContext ctx;
  ctx.manifest.command = command;
  ctx.manifest.started = iso_utc_now();
  ctx.manifest.overrides = in.overrides;

  if (!fs::exists(in.config_path))
    throw std::invalid_argument("config file not found: " + in.config_path);
  std::string text = read_text_file(in.config_path);
  record_input(ctx.manifest, in.config_path, text);
  ordered_json j = ordered_json::parse(text);
  for (const std::string& o : in.overrides) apply_override(j, o);
  ctx.spec = scenario_from_json(j);

  if (in.seed_given) {
    ctx.spec.seed = in.seed;
    ctx.spec.budgets.seed = in.seed;
  }
  if (!in.out_dir.empty()) ctx.spec.out_dir = in.out_dir;
  if (ctx.spec.out_dir.empty())
    throw std::invalid_argument(
        "no output directory: set out_dir in the config or pass --out");
  ctx.out = ctx.spec.out_dir;
  fs::create_directories(ctx.out);

  ctx.threads = resolve_threads(in.threads, in.threads_given);
  ctx.spec.budgets.threads = ctx.threads;
  ctx.manifest.seed = ctx.spec.seed;
  return ctx;
}

// The manifest is the index of everything the run wrote; it goes last and
// does not list itself.
void finish_run(RunContext& ctx) {
  ctx.manifest.finished = iso_utc_now();
  std::ofstream out(ctx.out / "manifest.json", std::ios::binary);
  out << dump_json(manifest_to_json(ctx.manifest));
}

StarDomain build_domain(const ScenarioSpec& spec,
                        const DimensionConstants& dims) {
  StarDomain d =
      StarDomain::perturbed_ball(spec.base_radius, spec.modes, spec.amplitude);
  return spec.normalize ? d.normalized(dims) : d;
}

std::string require_artifact(const RunContext& ctx, const char* name) {
  fs::path p = ctx.out / name;
  if (!fs::exists(p))
    throw std::invalid_argument(std::string(name) +
                                " not found in " + ctx.out.string() +
                                " (run the earlier stage first)");
  return p.string();
}

BoundaryCloud load_cloud(RunContext& ctx) {
  std::string csv_path = require_artifact(ctx, "cloud.csv");
  std::string meta_path = require_artifact(ctx, "cloud.json");
  std::string csv = read_text_file(csv_path);
  std::string meta_text = read_text_file(meta_path);
  record_input(ctx.manifest, csv_path, csv);
  record_input(ctx.manifest, meta_path, meta_text);
  ordered_json meta = ordered_json::parse(meta_text);
  return cloud_from_csv(csv, meta.at("spacing").get<double>());
}

int cmd_generate(const RunInputs& in) {
  RunContext ctx = begin_run(in, "generate");
  DimensionConstants dims = DimensionConstants::make(ctx.spec.dim);
  StarDomain domain = build_domain(ctx.spec, dims);
  BoundaryCloud cloud = domain.sample_boundary(int(ctx.spec.cloud_samples));

  double total = 0.0;
  for (double w : cloud.weights) total += w;

  ordered_json dj;
  dj["schema"] = kSchemaVersion;
  dj["tool"] = tool_version();
  dj["construction"] = scenario_to_json(ctx.spec)["domain"];
  dj["derived"] = domain_facts_json(domain, dims);
  write_artifact(ctx.manifest, (ctx.out / "domain.json").string(),
                 dump_json(dj));

  write_artifact(ctx.manifest, (ctx.out / "cloud.csv").string(),
                 cloud_csv(cloud));
  ordered_json cj;
  cj["count"] = cloud.size();
  cj["spacing"] = cloud.spacing;
  cj["total_weight"] = total;
  write_artifact(ctx.manifest, (ctx.out / "cloud.json").string(),
                 dump_json(cj));

  finish_run(ctx);
  std::printf("generate: %zu boundary samples, total weight %.6f, into %s\n",
              cloud.size(), total, ctx.out.string().c_str());
  return 0;
}

int cmd_solve(const RunInputs& in) {
  RunContext ctx = begin_run(in, "solve");
  DimensionConstants dims = DimensionConstants::make(ctx.spec.dim);
  StarDomain domain = build_domain(ctx.spec, dims);
  BoundaryCloud cloud = load_cloud(ctx);
  WosSampler sampler(domain, std::move(cloud), ctx.spec.wos);

  const Vec3 pole{0, 0, 0};
  std::vector<std::int32_t> exits =
      sampler.exit_indices(pole, ctx.spec.budgets.kernel_trajectories,
                           ctx.spec.seed, ctx.threads);
  write_artifact(ctx.manifest, (ctx.out / "exits.csv").string(),
                 exits_csv(exits));
  ordered_json ej;
  ej["trajectories"] = exits.size();
  ej["cloud_size"] = sampler.cloud().size();
  write_artifact(ctx.manifest, (ctx.out / "exits.json").string(),
                 dump_json(ej));

  KernelField field = estimate_poisson_kernel(
      sampler, pole, ctx.spec.budgets.kernel_sites,
      ctx.spec.budgets.cap_fraction, ctx.spec.budgets.kernel_trajectories,
      ctx.spec.seed, ctx.threads);
  write_artifact(ctx.manifest, (ctx.out / "kernel.csv").string(),
                 kernel_csv(field));
  write_artifact(ctx.manifest, (ctx.out / "kernel.json").string(),
                 dump_json(kernel_summary_json(field)));

  finish_run(ctx);
  std::printf("solve: %zu trajectories, eps_hat %.4f, noise floor %.4f\n",
              exits.size(), field.eps_hat, field.noise_floor);
  return 0;
}

int cmd_analyze(const RunInputs& in) {
  RunContext ctx = begin_run(in, "analyze");
  DimensionConstants dims = DimensionConstants::make(ctx.spec.dim);
  StarDomain domain = build_domain(ctx.spec, dims);
  BoundaryCloud cloud = load_cloud(ctx);

  double r1 = domain.min_radius_bound();
  ordered_json gj;
  gj["schema"] = kSchemaVersion;
  gj["tool"] = tool_version();

  ordered_json theta = ordered_json::array();
  for (const DecayRow& row :
       decay_scan(cloud, 0.5 * r1, 5, ctx.spec.budgets.center_count))
    theta.push_back({{"scale", row.scale},
                     {"worst_theta", row.worst_theta},
                     {"slack", row.slack},
                     {"degenerate", row.degenerate}});
  gj["theta"] = std::move(theta);

  double rb = dims.unit_measure_radius();
  ordered_json ahlfors = ordered_json::array();
  for (const AhlforsRow& row :
       ahlfors_ratios(cloud, dims, {0.25 * rb, 0.5 * rb, rb}, 32))
    ahlfors.push_back({{"radius", row.radius},
                       {"lo", row.lo},
                       {"hi", row.hi},
                       {"slack", row.slack}});
  gj["ahlfors"] = std::move(ahlfors);

  ordered_json osc = ordered_json::array();
  for (double s : {0.125 * r1, 0.0625 * r1}) {
    OscillationRow row =
        normal_oscillation(cloud, s, ctx.spec.budgets.center_count);
    osc.push_back(
        {{"scale", row.scale}, {"worst", row.worst}, {"slack", row.slack}});
  }
  gj["oscillation"] = std::move(osc);

  write_artifact(ctx.manifest, (ctx.out / "geometry.json").string(),
                 dump_json(gj));
  finish_run(ctx);
  std::printf("analyze: geometry tables written to %s\n",
              ctx.out.string().c_str());
  return 0;
}

// Keeps only the checks the scenario asked for, in registry order. An empty
// request means everything.
void filter_checks(ChainReport& chain, const std::vector<std::string>& names) {
  if (names.empty()) return;
  std::vector<CheckResult> kept;
  for (const CheckResult& c : chain.checks)
    for (const std::string& n : names)
      if (c.name == n) kept.push_back(c);
  chain.checks = std::move(kept);
}

int exit_code_for(const std::vector<ReportMember>& members) {
  bool failed = false;
  for (const ReportMember& m : members)
    for (const CheckResult& c : m.chain->checks) {
      if (c.applicable && !c.pass) failed = true;
      if (!c.applicable)
        std::fprintf(stderr,
                     "warning: amplitude %g: %s unresolvable (%s)\n",
                     m.amplitude, c.name.c_str(), c.note.c_str());
    }
  return failed ? 1 : 0;
}

int cmd_verify(const RunInputs& in) {
  RunContext ctx = begin_run(in, "verify");
  DimensionConstants dims = DimensionConstants::make(ctx.spec.dim);

  bool want_gradient = ctx.spec.checks.empty();
  for (const std::string& n : ctx.spec.checks)
    want_gradient = want_gradient || n == "pole_gradient";

  std::vector<double> amplitudes = ctx.spec.family;
  if (amplitudes.empty()) amplitudes = {ctx.spec.amplitude};

  std::vector<StarDomain> domains;
  std::vector<ChainReport> chains;
  domains.reserve(amplitudes.size());
  chains.reserve(amplitudes.size());
  for (double amp : amplitudes) {
    ScenarioSpec member = ctx.spec;
    member.amplitude = amp;
    StarDomain domain = build_domain(member, dims);
    BoundaryCloud cloud = domain.sample_boundary(int(member.cloud_samples));
    WosSampler sampler(domain, std::move(cloud), member.wos);
    ChainBudgets budgets = member.budgets;
    budgets.run_gradient = want_gradient;
    ChainReport chain = run_stability_chain(sampler, dims, budgets);
    filter_checks(chain, ctx.spec.checks);
    domains.push_back(domain);
    chains.push_back(std::move(chain));
  }

  std::vector<ReportMember> members;
  std::string margins;
  std::vector<std::pair<double, const ChainReport*>> trend_rows;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    members.push_back({amplitudes[i], &domains[i], &chains[i]});
    margins += "amplitude " + format_double(amplitudes[i]) + "\n" +
               text_margin_table(chains[i]) + "\n";
    trend_rows.push_back({amplitudes[i], &chains[i]});
  }

  write_artifact(ctx.manifest, (ctx.out / "report.json").string(),
                 dump_json(report_to_json(ctx.spec, dims, members)));
  write_artifact(ctx.manifest, (ctx.out / "margins.txt").string(), margins);
  write_artifact(ctx.manifest, (ctx.out / "trend.csv").string(),
                 trend_table_csv(trend_rows));

  finish_run(ctx);
  std::fputs(margins.c_str(), stdout);
  return exit_code_for(members);
}

// Re-renders tables from a stored report without recomputing anything;
// the re-emitted report is byte-identical to the stored one.
int cmd_report(const RunInputs& in) {
  RunContext ctx = begin_run(in, "report");
  std::string path = require_artifact(ctx, "report.json");
  std::string text = read_text_file(path);
  record_input(ctx.manifest, path, text);
  ordered_json parsed = ordered_json::parse(text);
  if (dump_json(parsed) != text)
    throw std::runtime_error("report.json is not in canonical form");

  std::vector<double> amplitudes;
  std::vector<ChainReport> chains;
  for (const auto& member : parsed.at("members")) {
    amplitudes.push_back(member.at("amplitude").get<double>());
    chains.push_back(chain_from_member_json(member));
  }

  std::string margins;
  std::vector<std::pair<double, const ChainReport*>> trend_rows;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    margins += "amplitude " + format_double(amplitudes[i]) + "\n" +
               text_margin_table(chains[i]) + "\n";
    trend_rows.push_back({amplitudes[i], &chains[i]});
  }

  write_artifact(ctx.manifest, path, text);
  write_artifact(ctx.manifest, (ctx.out / "margins.txt").string(), margins);
  write_artifact(ctx.manifest, (ctx.out / "trend.csv").string(),
                 trend_table_csv(trend_rows));
  finish_run(ctx);
  std::fputs(margins.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonic measure stability laboratory"};
  app.require_subcommand(1);

  RunInputs in;
  std::string command;
  for (const char* name : {"generate", "solve", "analyze", "verify", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", in.config_path, "scenario JSON path")
        ->required();
    sub->add_option("--seed", in.seed, "override the scenario seed");
    sub->add_option("--out", in.out_dir, "output directory");
    sub->add_option("--override", in.overrides,
                    "config override key=value, repeatable");
    sub->add_option("--threads", in.threads,
                    "worker threads, 0 = auto (PFL_THREADS as fallback)");
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }
  CLI::App* sub = app.get_subcommand(command);
  in.seed_given = sub->count("--seed") > 0;
  in.threads_given = sub->count("--threads") > 0;

  try {
    if (command == "generate") return cmd_generate(in);
    if (command == "solve") return cmd_solve(in);
    if (command == "analyze") return cmd_analyze(in);
    if (command == "verify") return cmd_verify(in);
    return cmd_report(in);
  } catch (const ordered_json::exception& e) {
    std::fprintf(stderr, "pklab: config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "pklab: config error: %s\n", e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "pklab: runtime error: %s\n", e.what());
    return 3;
  }
}
