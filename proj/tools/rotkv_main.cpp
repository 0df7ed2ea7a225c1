// Command-line front end: closed-loop benchmarks over the simulator or a
// local socket cluster, scripted scenario replays, and offline trace checks.
//
// Every option can also come from the environment (prefix ROTKV_, e.g.
// ROTKV_ENGINE=cure) or from a run-config file of key=value lines passed
// with --config; see the README for the file format.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rotkv/bench.hpp"
#include "rotkv/checker.hpp"
#include "rotkv/scenario.hpp"
#include "rotkv/socket_rt.hpp"
#include "rotkv/trace.hpp"

using namespace rotkv;

namespace {

std::string upper_snake(std::string s) {
  for (char& c : s) c = c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return s;
}

// Registers the option under the ROTKV_ environment prefix; hyphenated
// options carry an underscore alias in their name list, so config files may
// use either spelling.
CLI::Option* env(CLI::Option* o) {
  return o->envname("ROTKV_" + upper_snake(o->get_lnames().front()));
}

void write_trace_file(const std::string& path, const ExperimentConfig& cfg,
                      const ExperimentResult& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open trace output: " + path);
  TraceMeta meta{cfg.partitions, cfg.dcs, cfg.clients, engine_name(cfg.engine.engine)};
  write_trace_jsonl(os, meta, r.topo, r.trace);
}

int report(const ExperimentConfig& cfg, const ExperimentResult& r, const std::string& format) {
  if (format == "csv") {
    std::cout << metrics_csv_header() << "\n" << metrics_csv_row(cfg, r) << "\n";
  } else if (format == "jsonl") {
    std::cout << metrics_json(cfg, r) << "\n";
  } else {
    std::cout << metrics_human(cfg, r);
  }
  if (r.run.pending_client_ops > 0) {
    std::cerr << "warning: " << r.run.pending_client_ops << " operations never completed\n";
    return 3;
  }
  if (r.checked && !r.check.ok()) {
    std::cerr << r.check.summary() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causally consistent key-value engines: benchmark, replay, check"};
  app.require_subcommand(1);
  app.set_config("--config", "", "run-config file (key=value lines; [bench] etc. sections)");

  // ---- bench ---------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "run a closed-loop workload and report metrics");
  ExperimentConfig cfg;
  cfg.partitions = 8;            // desk scale: finishes in about a minute
  cfg.duration_ms = 1'000'000;   // simulated; pair --check with a shorter window
  std::string engine = "contrarian", rot_mode = "1.5", backend = "sim", format = "human";
  std::string trace_out;
  bool paper_scale = false;
  int64_t skew_ms = 0;

  env(bench->add_option("--engine", engine, "contrarian | cure | cclo | read_latest")
          ->default_val(engine));
  env(bench->add_option("--rot-mode,--rot_mode", rot_mode, "read rounds: 1.5 | 2")
          ->default_val(rot_mode));
  env(bench->add_option("-w,--w", cfg.workload.w, "write fraction, puts/(puts+keys read)")
          ->check(CLI::Range(0.0, 1.0))->default_val(cfg.workload.w));
  env(bench->add_option("-p,--p", cfg.workload.p, "partitions touched per read transaction")
          ->check(CLI::PositiveNumber)->default_val(cfg.workload.p));
  env(bench->add_option("-z,--z", cfg.workload.z, "zipfian key-popularity exponent (0 = uniform)")
          ->check(CLI::NonNegativeNumber)->default_val(cfg.workload.z));
  env(bench->add_option("-b,--b", cfg.workload.value_bytes, "value payload bytes")
          ->check(CLI::PositiveNumber)->default_val(cfg.workload.value_bytes));
  env(bench->add_option("--keys", cfg.workload.keys_per_partition, "keyspace per partition")
          ->check(CLI::PositiveNumber)->default_val(cfg.workload.keys_per_partition));
  env(bench->add_option("--think", cfg.workload.think_ms, "client think time between ops, ms")
          ->check(CLI::NonNegativeNumber)->default_val(cfg.workload.think_ms));
  env(bench->add_option("--clients", cfg.clients, "closed-loop client count")
          ->check(CLI::PositiveNumber)->default_val(cfg.clients));
  env(bench->add_option("--partitions", cfg.partitions, "partitions per data center (N > 1)")
          ->check(CLI::Range(2u, 1u << 16))->default_val(cfg.partitions));
  env(bench->add_option("--dcs", cfg.dcs, "data centers (all fully replicated)")
          ->check(CLI::PositiveNumber)->default_val(cfg.dcs));
  env(bench->add_option("--seed", cfg.schedule.seed, "run seed")->default_val(cfg.schedule.seed));
  env(bench->add_option("--duration", cfg.duration_ms,
                        "issue window in ms (simulated on sim, wall on socket)")
          ->check(CLI::PositiveNumber)->default_val(cfg.duration_ms));
  env(bench->add_option("--drain", cfg.drain_ms, "extra ms for in-flight work after the window")
          ->check(CLI::NonNegativeNumber)->default_val(cfg.drain_ms));
  env(bench->add_option("--backend", backend, "sim | socket")
          ->check(CLI::IsMember({"sim", "socket"}))->default_val(backend));
  env(bench->add_option("--skew", skew_ms, "physical-clock offset in ms of the first partition")
          ->default_val(skew_ms));
  std::string delay_law = "fixed";
  int64_t delay_lo = 1, delay_hi = 1;
  env(bench->add_option("--delay-law,--delay_law", delay_law,
                        "sim message delay law: fixed | uniform | adversarial")
          ->check(CLI::IsMember({"fixed", "uniform", "adversarial"}))->default_val(delay_law));
  env(bench->add_option("--delay-lo,--delay_lo", delay_lo, "delay law lower bound, ms")
          ->check(CLI::NonNegativeNumber)->default_val(delay_lo));
  env(bench->add_option("--delay-hi,--delay_hi", delay_hi, "delay law upper bound, ms")
          ->check(CLI::NonNegativeNumber)->default_val(delay_hi));
  env(bench->add_option("--trace-out,--trace_out", trace_out, "write the run trace as JSONL"));
  env(bench->add_option("--report", format, "csv | jsonl | human")
          ->check(CLI::IsMember({"csv", "jsonl", "human"}))->default_val(format));
  env(bench->add_flag("--check", cfg.check, "replay the trace through the checker"));
  env(bench->add_flag("--no-probes,--no_probes", "skip the convergence probes (sim only)"));
  env(bench->add_flag(
      "--paper-scale,--paper_scale", paper_scale,
      "preset: 32 partitions, 1M keys each, 90 s — sized for socket runs"));

  // ---- scenario ------------------------------------------------------------
  auto* scen = app.add_subcommand("scenario", "replay a scripted schedule and check it");
  std::string scen_name;
  std::string scen_engine = "contrarian", scen_mode = "1.5", scen_trace;
  scen->add_option("name", scen_name, "fig1 | fig2 | e_star_demo")->required();
  env(scen->add_option("--engine", scen_engine, "contrarian | cure | cclo | read_latest")
          ->default_val(scen_engine));
  env(scen->add_option("--rot-mode,--rot_mode", scen_mode, "read rounds: 1.5 | 2")
          ->default_val(scen_mode));
  env(scen->add_option("--trace-out,--trace_out", scen_trace, "write the replay trace as JSONL"));

  // ---- check ---------------------------------------------------------------
  auto* chk = app.add_subcommand("check", "validate a trace file (- for stdin)");
  std::string trace_in;
  int max_multi = 0, max_single = 0;
  bool nonblocking = false;
  chk->add_option("trace", trace_in, "trace JSONL path")->required();
  chk->add_option("--max-steps-multi,--max_steps_multi", max_multi,
                  "cap message-chain depth of multi-partition reads (0 = off)");
  chk->add_option("--max-steps-single,--max_steps_single", max_single,
                  "cap message-chain depth of single-partition reads (0 = off)");
  chk->add_flag("--nonblocking", nonblocking, "require responses in the enabling step");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      cfg.engine.engine = parse_engine(engine);
      cfg.engine.rot_mode = parse_rot_mode(rot_mode);
      if (paper_scale) {
        cfg.partitions = 32;
        cfg.workload.keys_per_partition = 1'000'000;
        cfg.duration_ms = 90'000;
      }
      DelayLaw law = DelayLaw::fixed(delay_lo);
      if (delay_law == "uniform") law = DelayLaw::uniform(delay_lo, std::max(delay_lo, delay_hi));
      if (delay_law == "adversarial")
        law = DelayLaw::adversarial(delay_lo, std::max(delay_lo, delay_hi));
      cfg.schedule.default_law = law;
      if (skew_ms != 0) cfg.clock_offsets.assign(1, skew_ms);
      cfg.probes = bench->count("--no-probes") == 0 && backend == "sim";
      cfg.schedule.record_trace = !trace_out.empty() || cfg.check;
      if (cfg.schedule.record_trace && cfg.duration_ms > 100'000)
        std::cerr << "warning: recording a trace over " << cfg.duration_ms
                  << " ms can exhaust memory; consider a shorter --duration\n";
      ExperimentResult r =
          backend == "socket" ? run_socket_experiment(cfg) : run_experiment(cfg);
      if (!trace_out.empty()) write_trace_file(trace_out, cfg, r);
      return report(cfg, r, format);
    }

    if (scen->parsed()) {
      EngineConfig eng;
      eng.engine = parse_engine(scen_engine);
      eng.rot_mode = parse_rot_mode(scen_mode);
      ScenarioResult r = run_scenario(scen_name, eng);
      std::cout << "scenario " << r.name << " on " << engine_name(eng.engine) << "\n";
      for (const auto& mv : r.reader_returns) {
        std::cout << "  read " << mv.key << " -> ";
        if (mv.present)
          std::cout << mv.v.value << "  (" << mv.v.creation_ts.encoded() << "@" << mv.v.origin_dc
                    << ")\n";
        else
          std::cout << "(absent)\n";
      }
      std::cout << "  " << r.check.summary() << "\n";
      if (!scen_trace.empty()) {
        std::ofstream os(scen_trace, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open trace output: " + scen_trace);
        TraceMeta meta{r.topo.partitions, r.topo.dcs, r.topo.clients, engine_name(eng.engine)};
        write_trace_jsonl(os, meta, r.topo, r.trace);
      }
      return r.check.ok() ? 0 : 2;
    }

    // check
    std::ifstream file;
    std::istream* is = &std::cin;
    if (trace_in != "-") {
      file.open(trace_in, std::ios::binary);
      if (!file) {
        std::cerr << "cannot open " << trace_in << "\n";
        return 4;
      }
      is = &file;
    }
    auto [meta, events] = read_trace_jsonl(*is);
    Topology topo{meta.partitions, meta.dcs, meta.clients};
    topo.validate();
    CheckOptions opt;
    opt.max_steps_multi = max_multi;
    opt.max_steps_single = max_single;
    opt.nonblocking_reads = nonblocking;
    CheckReport rep = check_trace(topo, events, opt);
    std::cout << rep.summary() << "\n";
    return rep.ok() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
