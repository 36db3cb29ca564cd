// Command-line front end: synthesize environments, build the RP database,
// localize single queries, generate trial sets, evaluate and serve the API.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "arloc/arloc.hpp"
#include "arloc/service.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

std::vector<std::string> device_list(const std::string& arg) {
  // Either a count ("3") or a comma-separated list of names.
  if (!arg.empty() && arg.find_first_not_of("0123456789") == std::string::npos) {
    const int n = std::stoi(arg);
    if (n < 1) throw arloc::InvalidArgument("--devices needs at least one device");
    return arloc::default_devices(n);
  }
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= arg.size()) {
    const auto comma = arg.find(',', start);
    const auto token = arg.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!token.empty()) out.push_back(token);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw arloc::InvalidArgument("--devices needs at least one device");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor AR localization: RP database tools and localization server"};
  app.require_subcommand(1);

  // gen
  std::uint64_t gen_seed = 42;
  double gen_width = 4.0, gen_depth = 2.0, gen_interval = arloc::kDefaultGridInterval;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Synthesize an environment (map, world, stored observations)");
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--width", gen_width, "RP area width in metres")->capture_default_str();
  gen->add_option("--depth", gen_depth, "RP area depth in metres")->capture_default_str();
  gen->add_option("--interval", gen_interval, "RP grid interval in metres")->capture_default_str();
  gen->add_option("--out", gen_out, "Output environment file")->required();

  // build-db
  std::string build_in, build_out;
  int build_k = 3;
  std::uint64_t build_seed = 42;
  auto* build = app.add_subcommand("build-db", "Cluster an environment into subareas and write the RP database");
  build->add_option("--input", build_in, "Environment file from gen")->required()->check(CLI::ExistingFile);
  build->add_option("--k", build_k, "Number of subareas")->capture_default_str();
  build->add_option("--cluster-seed", build_seed, "K-medoids initialization seed")->capture_default_str();
  build->add_option("--out", build_out, "Output database file")->required();

  // localize
  std::string loc_db, loc_query, loc_method = "combined_dr";
  auto* loc = app.add_subcommand("localize", "Localize one query against a database");
  loc->add_option("--db", loc_db, "Database file")->required()->check(CLI::ExistingFile);
  loc->add_option("--query", loc_query, "Query JSON file")->required()->check(CLI::ExistingFile);
  loc->add_option("--method", loc_method, "wifi_only | image_only | combined | combined_dr")->capture_default_str();

  // simulate
  std::string sim_db, sim_out, sim_devices = "3";
  int sim_trials = 300;
  std::uint64_t sim_seed = 42;
  auto* sim = app.add_subcommand("simulate", "Generate a seeded trial set from a synthetic database");
  sim->add_option("--db", sim_db, "Database or environment file")->required()->check(CLI::ExistingFile);
  sim->add_option("--trials", sim_trials, "Number of trials")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Trial seed")->capture_default_str();
  sim->add_option("--devices", sim_devices, "Device count or comma-separated device names")->capture_default_str();
  sim->add_option("--out", sim_out, "Output trials file")->required();

  // evaluate
  std::string eval_db, eval_trials, eval_methods = "all", eval_report;
  unsigned eval_workers = 0;
  auto* eval = app.add_subcommand("evaluate", "Matching rate and average error per method");
  eval->add_option("--db", eval_db, "Database file")->required()->check(CLI::ExistingFile);
  eval->add_option("--trials", eval_trials, "Trials file from simulate")->required()->check(CLI::ExistingFile);
  eval->add_option("--methods", eval_methods, "'all' or comma-separated method names")->capture_default_str();
  eval->add_option("--report", eval_report, "Output report file")->required();
  eval->add_option("--workers", eval_workers, "Worker threads (0 = hardware concurrency)");

  // serve
  std::string serve_db, serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the localization HTTP API");
  serve->add_option("--db", serve_db, "Database file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", serve_port, "TCP port")->capture_default_str()->check(CLI::Range(1, 65535));
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*gen) {
      arloc::SynthConfig cfg;
      cfg.seed = gen_seed;
      const auto env = arloc::gen_environment(gen_width, gen_depth, gen_interval, cfg);
      arloc::save_db(gen_out, arloc::db_from_environment(env));
      std::printf("wrote %s: %zu RPs, %zu objects\n", gen_out.c_str(), env.map.rps.size(), env.map.objects.size());
    } else if (*build) {
      auto db = arloc::load_db(build_in);
      db.cluster.k = build_k;
      db.cluster.seed = build_seed;
      db.map.subareas = arloc::build_subareas(db.map, db.cluster);
      arloc::save_db(build_out, db);
      std::printf("wrote %s: %zu subareas over %zu RPs\n", build_out.c_str(), db.map.subareas.size(),
                  db.map.rps.size());
    } else if (*loc) {
      const auto db = arloc::load_db(loc_db);
      const auto query = arloc::query_from_json(arloc::read_json(loc_query));
      const auto method = arloc::parse_method(loc_method);
      const arloc::Localizer localizer(db.map, db.cluster, db.match);
      const auto result = localizer.localize(query, method);
      std::cout << arloc::result_to_json(result).dump(2) << "\n";
    } else if (*sim) {
      const auto db = arloc::load_db(sim_db);
      const auto env = arloc::environment_from_db(db);
      const auto devices = device_list(sim_devices);
      const auto trials = arloc::gen_trials(env, sim_trials, devices, sim_seed);
      arloc::write_json(sim_out, arloc::trials_to_json(trials, sim_seed));
      std::printf("wrote %s: %zu trials\n", sim_out.c_str(), trials.size());
    } else if (*eval) {
      const auto db = arloc::load_db(eval_db);
      const auto file = arloc::trials_from_json(arloc::read_json(eval_trials));
      const auto methods = arloc::parse_methods(eval_methods);
      const arloc::Localizer localizer(db.map, db.cluster, db.match);
      const unsigned workers = eval_workers == 0 ? std::thread::hardware_concurrency() : eval_workers;
      const auto report = arloc::evaluate(file.trials, localizer, methods, file.seed, workers);
      arloc::write_json(eval_report, arloc::report_to_json(report));
      std::cout << arloc::report_table(report);
    } else if (*serve) {
      arloc::ServiceCore core(arloc::load_db(serve_db));
      httplib::Server server;
      arloc::mount_routes(server, core);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::printf("serving on http://%s:%d/api/v1\n", serve_host.c_str(), serve_port);
      std::fflush(stdout);
      if (!server.listen(serve_host, serve_port)) {
        std::fprintf(stderr, "error: cannot listen on %s:%d\n", serve_host.c_str(), serve_port);
        return kRuntimeError;
      }
    }
  } catch (const arloc::InvalidArgument& e) {
    // Bad option values that only the library can judge (method names, k, ...).
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return 0;
}
