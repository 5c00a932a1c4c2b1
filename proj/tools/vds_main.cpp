// vds — structural audits, flow integration, kinetic grid evolution, and
// particle experiments, driven by JSON configs.
//
// Verbs:
//   run      execute an experiment config; prints one line per check and
//            writes report.json / metadata.json / artifacts when an output
//            directory is set (flag --out, env VDS_OUT, or the config key).
//   list     print the builtin catalog.
//   compare  line up the checks of two report.json files (step-halving aid).
//   schema   print the config schema and the catalog as JSON.
//
// Exit codes: 0 all checks passed; 1 at least one check failed; 2 config or
// usage error; 3 numerical refusal (stability bound, degenerate input);
// 4 internal error.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "vds/config.hpp"
#include "vds/errors.hpp"
#include "vds/report.hpp"
#include "vds/runner.hpp"
#include "vds/version.hpp"

namespace {

using nlohmann::json;

std::string show_number(const json& v) {
  if (!v.is_number()) return "nan";
  std::ostringstream os;
  os << v.get<double>();
  return os.str();
}

std::string show_scientific(double v) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream os;
  os << std::scientific << std::setprecision(4) << v;
  return os.str();
}

void print_check_lines(const json& report) {
  for (const json& c : report["checks"]) {
    std::cout << c["check_name"].get<std::string>() << ": ";
    const std::string v = c["verdict"].get<std::string>();
    if (v == "not-applicable") {
      std::cout << "NOT-APPLICABLE (" << c.value("note", std::string()) << ")\n";
      continue;
    }
    std::cout << (v == "pass" ? "PASS" : "FAIL") << " (residual=" << show_number(c["residual"])
              << ", tol=" << show_number(c["tolerance"])
              << ", samples=" << c["sample_count"].get<long>();
    const std::string worst = c.value("worst_case_location", std::string());
    if (!worst.empty()) std::cout << ", worst at " << worst;
    std::cout << ")\n";
  }
}

json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw vds::ConfigError("/", std::string("cannot open ") + what + " " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw vds::ConfigError("/", path + " is not valid JSON: " + e.what());
  }
  return j;
}

int do_run(const std::string& config_path, bool have_out, const std::string& out_dir,
           bool have_threads, int threads, bool have_seed, std::uint64_t seed,
           bool have_tol, double tol_scale) {
  json raw = read_json_file(config_path, "config file");
  if (raw.is_object()) {
    if (have_seed) raw["seed"] = seed;
    if (have_tol) raw["tol_scale"] = tol_scale;
    if (have_out)
      raw["out"] = out_dir;
    else if (const char* e = std::getenv("VDS_OUT"); e && *e)
      raw["out"] = std::string(e);
    if (have_threads) {
      raw["threads"] = threads;
    } else if (const char* e = std::getenv("VDS_THREADS"); e && *e) {
      char* end = nullptr;
      const long v = std::strtol(e, &end, 10);
      if (end == e || *end != '\0' || v < 1)
        throw vds::ConfigError("/threads", "VDS_THREADS is not a positive integer");
      raw["threads"] = v;
    }
  }
  const vds::ExperimentConfig cfg = vds::parse_config(raw);

  const auto t0 = std::chrono::steady_clock::now();
  const vds::RunOutcome out = vds::run_experiment(cfg);
  const long elapsed_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                std::chrono::steady_clock::now() - t0)
                                                .count());

  print_check_lines(out.report);
  const json& s = out.report["summary"];
  std::cout << cfg.builtin << " [" << vds::experiment_kind_name(cfg.kind) << "]: "
            << s["checks"].get<long>() << " checks, " << s["passed"].get<long>()
            << " passed, " << s["failed"].get<long>() << " failed, "
            << s["not_applicable"].get<long>() << " not applicable ("
            << elapsed_ms << " ms)\n";
  if (!cfg.out_dir.empty()) {
    vds::write_outputs(out, cfg, cfg.out_dir, elapsed_ms);
    std::cout << "report: " << cfg.out_dir << "/report.json\n";
  }
  return out.all_passed ? 0 : 1;
}

int do_list() {
  for (const vds::BuiltinInfo& b : vds::builtin_catalog())
    std::cout << std::left << std::setw(24) << b.name << std::setw(17)
              << vds::experiment_kind_name(b.kind) << b.summary << "\n";
  return 0;
}

int do_schema() {
  std::cout << vds::config_schema().dump(2) << "\n";
  return 0;
}

int do_compare(const std::string& path_a, const std::string& path_b) {
  const json a = read_json_file(path_a, "report");
  const json b = read_json_file(path_b, "report");
  const vds::CompareResult res = vds::compare_reports(a, b);
  if (res.refused) {
    std::cerr << "compare refused: " << res.message << "\n";
    return 2;
  }
  std::cout << "comparing " << path_a << " vs " << path_b << "\n";
  if (res.identical) std::cout << "reports are byte-identical\n";
  std::cout << std::left << std::setw(44) << "check" << std::right << std::setw(12)
            << "residual_a" << std::setw(12) << "residual_b" << std::setw(10) << "ratio"
            << "  order\n";
  for (const vds::CompareRow& r : res.rows) {
    std::ostringstream ratio;
    if (std::isfinite(r.ratio))
      ratio << std::fixed << std::setprecision(2) << r.ratio;
    else
      ratio << "-";
    std::cout << std::left << std::setw(44) << r.check_name << std::right << std::setw(12)
              << show_scientific(r.residual_a) << std::setw(12)
              << show_scientific(r.residual_b) << std::setw(10) << ratio.str() << "  "
              << r.order;
    if (r.order == "h2") std::cout << " (~4 expected)";
    std::cout << "\n";
  }
  for (const std::string& n : res.only_a) std::cout << "only in " << path_a << ": " << n << "\n";
  for (const std::string& n : res.only_b) std::cout << "only in " << path_b << ": " << n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(vds::kToolName) +
               " — variational-structure audits and kinetic experiments"};
  app.set_version_flag("--version",
                       std::string(vds::kToolName) + " " + vds::kToolVersion);
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "execute an experiment from a JSON config");
  std::string config_path, out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
  double tol_scale = 1.0;
  run_cmd->add_option("--config,-c", config_path, "experiment config (JSON)")->required();
  auto* out_opt = run_cmd->add_option("--out,-o", out_dir, "output directory");
  auto* thr_opt = run_cmd->add_option("--threads", threads, "worker thread budget");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "override the config seed");
  auto* tol_opt =
      run_cmd->add_option("--tol-scale", tol_scale, "multiply every check tolerance");

  auto* list_cmd = app.add_subcommand("list", "print the builtin catalog");
  auto* schema_cmd = app.add_subcommand("schema", "print the config schema as JSON");

  auto* cmp_cmd = app.add_subcommand("compare", "line up the checks of two reports");
  std::string path_a, path_b;
  cmp_cmd->add_option("report_a", path_a, "first report.json (e.g. the coarse run)")
      ->required();
  cmp_cmd->add_option("report_b", path_b, "second report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (*run_cmd)
      return do_run(config_path, out_opt->count() > 0, out_dir, thr_opt->count() > 0,
                    threads, seed_opt->count() > 0, seed, tol_opt->count() > 0, tol_scale);
    if (*list_cmd) return do_list();
    if (*schema_cmd) return do_schema();
    if (*cmp_cmd) return do_compare(path_a, path_b);
    return 2;
  } catch (const vds::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vds::NumericalRefusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 3;
  } catch (const vds::DegenerateFunction& e) {
    std::cerr << "degenerate input: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
