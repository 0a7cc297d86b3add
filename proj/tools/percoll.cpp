// percoll: benchmark, tune and inspect collectives on the simulated cluster.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "percoll/autotune.hpp"
#include "percoll/bytecode.hpp"
#include "percoll/costmodel.hpp"
#include "percoll/dftfilter.hpp"
#include "percoll/error.hpp"
#include "percoll/oracle.hpp"
#include "percoll/persistent.hpp"
#include "percoll/planner.hpp"
#include "percoll/transport.hpp"

using namespace percoll;

namespace {

struct Common {
  std::string collective = "allgatherv";
  int nodes = 8;
  int cores = 1;
  std::size_t min_size = 8;
  std::size_t max_size = 4096;
  std::vector<int> factors;
  bool tune = false;
  int max_factor = 8;
  std::string table_path;
  bool reorder = false;
  std::uint64_t seed = 1;
  std::string output;
  std::string dtype = "int64";
  std::string op = "sum";
  double alpha = 2e-6;
  double beta = 1e-10;
  double gamma = 2.5e-11;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--collective", c.collective,
                  "allgatherv|reduce-scatter|allreduce|bcast|reduce")
      ->capture_default_str();
  app->add_option("--nodes", c.nodes, "number of nodes")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--cores", c.cores, "cores per node")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--min-size", c.min_size, "smallest per-rank message in bytes")->capture_default_str();
  app->add_option("--max-size", c.max_size, "largest per-rank message in bytes")->capture_default_str();
  app->add_option("--factors", c.factors, "step factors, e.g. 2,2,2")->delimiter(',');
  app->add_flag("--tune", c.tune, "pick factors with the autotuner");
  app->add_option("--max-factor", c.max_factor, "largest factor the tuner considers")
      ->check(CLI::Range(2, 64))
      ->capture_default_str();
  app->add_option("--table", c.table_path, "measurement table CSV (ports,size_bytes,time_seconds)");
  app->add_flag("--reorder,!--no-reorder", c.reorder, "reorder nodes by message size");
  app->add_option("--seed", c.seed, "seed for data and scheduling")->capture_default_str();
  app->add_option("--output", c.output, "write results here instead of stdout");
  app->add_option("--dtype", c.dtype, "int32|int64|float32|float64|byte")->capture_default_str();
  app->add_option("--op", c.op, "sum|min|max")->capture_default_str();
  app->add_option("--alpha", c.alpha, "model latency per step (s), used without --table")
      ->capture_default_str();
  app->add_option("--beta", c.beta, "model time per byte (s), used without --table")
      ->capture_default_str();
  app->add_option("--gamma", c.gamma, "model reduction time per byte (s)")->capture_default_str();
}

// Keeps stdout unless an output file was requested.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InvalidArgument("cannot open " + path);
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

MeasurementTable load_table(const Common& c) {
  if (!c.table_path.empty()) return MeasurementTable::load(c.table_path);
  std::vector<int> ports;
  for (int k = 1; k <= std::max(c.max_factor, c.cores) + 1; ++k) ports.push_back(k);
  const std::size_t top = std::max<std::size_t>(c.max_size * static_cast<std::size_t>(c.nodes * c.cores), 2);
  return synthesize_table({c.alpha, c.beta, c.gamma, 0}, ports, geometric_sizes(1, top * 2, 4));
}

std::string factor_label(const Plan& plan, const std::string& path) {
  std::string s = path == "prefix-scan" ? "scan:"
                  : plan.factor_plan.variant == Variant::RecursiveMultiply ? "rm:"
                                                                           : "cs:";
  const auto& f = plan.factor_plan.factors;
  if (f.empty()) return s + "-";
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "x" : "") + std::to_string(f[i]);
  return s;
}

struct Setup {
  Collective kind;
  DType dtype;
  ReduceOp op;
  Topology topo;
};

Setup make_setup(const Common& c) {
  return {parse_collective(c.collective), parse_dtype(c.dtype), parse_reduce_op(c.op),
          Topology(c.nodes, c.cores)};
}

std::size_t round_to_width(std::size_t size, DType dt) {
  const std::size_t w = dtype_size(dt);
  return std::max(w, size / w * w);
}

struct Chosen {
  Plan plan;
  std::string path = "factored";
};

Chosen choose_plan(const Common& c, const Setup& s, const CollectiveSpec& spec,
                   const MeasurementTable& table) {
  FactorPlan fp;
  std::string path = "factored";
  if (c.tune) {
    TuneOptions opts;
    opts.cores_per_node = c.cores;
    opts.use_reorder = c.reorder;
    opts.gamma = c.gamma;
    opts.dtype = s.dtype;
    opts.reduce_op = s.op;
    auto r = autotune(spec, s.kind, table, c.max_factor, opts);
    fp = r.factors;
    path = r.path;
  } else if (!c.factors.empty()) {
    fp = make_factor_plan(c.factors, c.nodes, c.cores);
  } else {
    fp = uniform_factor_plan(c.nodes, 2, c.cores);
  }
  Chosen ch{plan_for(s.kind, spec, fp, c.reorder), path};
  if (s.kind == Collective::Allreduce && spec.counts.front() <= kDefaultAllreduceCrossover) {
    ch.path = "prefix-scan";
  }
  return ch;
}

std::vector<Buffer> make_inputs(const Plan& plan, std::mt19937_64& rng) {
  std::vector<Buffer> inputs;
  const auto& spec = plan.spec;
  const std::size_t w = spec.element_width();
  for (int r = 0; r < spec.topology.total_ranks(); ++r) {
    Buffer b(input_bytes(spec, plan.collective, r));
    for (std::size_t i = 0; i + w <= b.size(); i += w) {
      if (spec.dtype == DType::Float64) {
        const double v = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
        std::memcpy(b.data() + i, &v, w);
      } else if (spec.dtype == DType::Float32) {
        const float v = std::uniform_real_distribution<float>(0.5f, 2.0f)(rng);
        std::memcpy(b.data() + i, &v, w);
      } else {
        const std::uint64_t v = rng();
        std::memcpy(b.data() + i, &v, w);
      }
    }
    inputs.push_back(std::move(b));
  }
  return inputs;
}

int run_bench(const Common& c, int iterations) {
  if (c.min_size > c.max_size) throw InvalidArgument("--min-size exceeds --max-size");
  const Setup s = make_setup(c);
  const MeasurementTable table = load_table(c);
  Sink sink(c.output);
  auto& out = sink.out();
  out << "size,modeled_time,init_wall,exec_wall,factors,correct\n";
  std::mt19937_64 rng(c.seed);
  bool all_ok = true;
  std::size_t last = 0;
  for (std::size_t raw : geometric_sizes(std::max<std::size_t>(c.min_size, 1), c.max_size)) {
    const std::size_t size = round_to_width(raw, s.dtype);
    if (size == last) continue;
    last = size;
    const auto spec = uniform_spec(s.kind, s.topo, size, s.dtype, s.op);

    const auto t0 = std::chrono::steady_clock::now();
    Chosen ch = choose_plan(c, s, spec, table);
    const Program prog = compile(ch.plan);
    const auto diags = validate(prog);
    const double init = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const double modeled = simulate_timeline(ch.plan, table, c.gamma).total;
    bool ok = diags.empty();
    if (!ok) std::cerr << "size " << size << ": " << diags.front().message << '\n';
    ClusterOptions opts;
    opts.schedule_seed = c.seed;
    Cluster cluster(s.topo, opts);
    const auto inputs = make_inputs(ch.plan, rng);
    const auto expected = naive_collective(s.kind, spec, inputs);
    double exec = 0;
    for (int it = 0; ok && it < iterations; ++it) {
      const auto t1 = std::chrono::steady_clock::now();
      try {
        const auto got = cluster.run(prog, inputs);
        exec += std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
        if (auto bad = compare_outputs(s.dtype, expected, got)) {
          std::cerr << "size " << size << ": " << *bad << '\n';
          ok = false;
        }
      } catch (const std::exception& e) {
        std::cerr << "size " << size << ": " << e.what() << '\n';
        ok = false;
      }
    }
    all_ok = all_ok && ok;
    out << size << ',' << modeled << ',' << init << ',' << exec / iterations << ','
        << factor_label(ch.plan, ch.path) << ',' << (ok ? "true" : "false") << '\n';
  }
  return all_ok ? 0 : 1;
}

int run_tune(const Common& c, bool list, const std::string& save_table) {
  if (c.min_size > c.max_size) throw InvalidArgument("--min-size exceeds --max-size");
  const Setup s = make_setup(c);
  const MeasurementTable table = load_table(c);
  if (!save_table.empty()) table.save(save_table);
  Sink sink(c.output);
  auto& out = sink.out();
  out << "size,factors,modeled_time,path,candidates\n";
  std::size_t last = 0;
  for (std::size_t raw : geometric_sizes(std::max<std::size_t>(c.min_size, 1), c.max_size)) {
    const std::size_t size = round_to_width(raw, s.dtype);
    if (size == last) continue;
    last = size;
    const auto spec = uniform_spec(s.kind, s.topo, size, s.dtype, s.op);
    TuneOptions opts;
    opts.cores_per_node = c.cores;
    opts.use_reorder = c.reorder;
    opts.gamma = c.gamma;
    opts.dtype = s.dtype;
    opts.reduce_op = s.op;
    const auto r = autotune(spec, s.kind, table, c.max_factor, opts);
    Plan shown;
    shown.factor_plan = r.factors;
    out << size << ',' << factor_label(shown, r.path) << ',' << r.cost << ',' << r.path << ','
        << r.candidates.size() << '\n';
    if (list) {
      auto cands = r.candidates;
      std::sort(cands.begin(), cands.end(),
                [](const TuneCandidate& a, const TuneCandidate& b) { return a.cost < b.cost; });
      for (const auto& cand : cands) {
        Plan p;
        p.factor_plan = cand.factors;
        std::cerr << "  " << factor_label(p, "factored") << ' ' << cand.cost << '\n';
      }
    }
  }
  return 0;
}

int run_plan_dump(const Common& c, const std::vector<std::size_t>& counts, bool bytecode) {
  const Setup s = make_setup(c);
  CollectiveSpec spec;
  if (counts.empty()) {
    spec = uniform_spec(s.kind, s.topo, round_to_width(c.min_size, s.dtype), s.dtype, s.op);
  } else if (s.kind == Collective::Allgatherv || s.kind == Collective::Bcast) {
    spec = allgatherv_spec(s.topo, counts, s.dtype);
  } else if (s.kind == Collective::Allreduce) {
    throw InvalidArgument("--counts does not apply to allreduce; use --min-size");
  } else {
    spec = reduce_scatter_spec(s.topo, counts, s.dtype, s.op);
  }
  const MeasurementTable table = load_table(c);
  const Chosen ch = choose_plan(c, s, spec, table);
  Sink sink(c.output);
  auto& out = sink.out();
  dump_plan(out, ch.plan);
  if (bytecode) {
    const Program prog = compile(ch.plan);
    disassemble(out, prog);
    for (const auto& d : validate(prog)) {
      std::cerr << "rank " << d.rank << " #" << d.instruction << ": " << d.message << '\n';
      return 1;
    }
  }
  return 0;
}

int run_dft_demo(const Common& c, int n, int first, int last, int radix) {
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> g;
  std::vector<Complex> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = {g(rng), g(rng)};

  const BandDftMatrix m(n, first, last);
  ClusterOptions opts;
  opts.schedule_seed = c.seed;
  DftFilter filter(m, c.nodes, radix, opts);
  const auto field = DistributedField::distribute(x, c.nodes);
  const auto spectral = forward_filter(field, m, filter);
  const auto fwd_bytes = filter.traffic().forward_bytes;
  const auto back = backward_filter(spectral, m, filter);
  const auto bwd_bytes = filter.traffic().backward_bytes;

  // dense reference projection onto the kept modes
  std::vector<Complex> coeff(static_cast<std::size_t>(n));
  for (int k = first; k <= last; ++k) {
    for (int j = 0; j < n; ++j) coeff[static_cast<std::size_t>(k)] += m.entry(k, j) * x[static_cast<std::size_t>(j)];
  }
  std::vector<Complex> proj(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int k = first; k <= last; ++k) {
      proj[static_cast<std::size_t>(j)] += std::conj(m.entry(k, j)) * coeff[static_cast<std::size_t>(k)];
    }
    proj[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  }
  const auto got = back.gather();
  double err = 0;
  double scale = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    err = std::max(err, std::abs(got[i] - proj[i]));
    scale = std::max(scale, std::abs(proj[i]));
  }
  const double rel = scale > 0 ? err / scale : err;
  const auto again = backward_filter(forward_filter(back, m, filter), m, filter).gather();
  double drift = 0;
  for (std::size_t i = 0; i < got.size(); ++i) drift = std::max(drift, std::abs(again[i] - got[i]));

  Sink sink(c.output);
  auto& out = sink.out();
  out << "N=" << n << " kept=[" << first << ',' << last << "] nodes=" << c.nodes << '\n'
      << "forward_bytes=" << fwd_bytes << " backward_bytes=" << bwd_bytes << '\n'
      << "forward_init_s=" << filter.forward_collective().init_seconds()
      << " backward_init_s=" << filter.backward_collective().init_seconds() << '\n'
      << "projection_rel_error=" << rel << " roundtrip_drift=" << drift << '\n';
  const bool ok = rel <= 1e-12 && drift <= 1e-12 * std::max(scale, 1.0);
  out << (ok ? "ok" : "FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated multi-port collectives: benchmark, tune, inspect"};
  app.require_subcommand(1);

  Common bench_opts;
  int iterations = 3;
  auto* bench = app.add_subcommand("bench", "model and execute a size sweep, CSV to --output");
  add_common(bench, bench_opts);
  bench->add_option("--iterations", iterations, "executions per size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  Common tune_opts;
  bool list = false;
  auto* tune = app.add_subcommand("tune", "report the tuned factors per size");
  add_common(tune, tune_opts);
  tune->add_flag("--list", list, "print every candidate to stderr");
  std::string save_table;
  tune->add_option("--save-table", save_table, "write the table in use as CSV");

  Common dump_opts;
  std::vector<std::size_t> counts;
  bool bytecode = false;
  auto* dump = app.add_subcommand("plan-dump", "print the plan for one message size");
  add_common(dump, dump_opts);
  dump->add_option("--counts", counts, "per-rank byte counts instead of --min-size")->delimiter(',');
  dump->add_flag("--bytecode", bytecode, "also print the compiled bytecode");

  Common dft_opts;
  dft_opts.nodes = 4;
  int n = 32;
  int first = 1;
  int last = 3;
  int radix = 2;
  auto* dft = app.add_subcommand("dft-demo", "band-limited DFT filter on distributed data");
  add_common(dft, dft_opts);
  dft->add_option("-n,--points", n, "transform length")->check(CLI::PositiveNumber)->capture_default_str();
  dft->add_option("--first", first, "first kept mode")->capture_default_str();
  dft->add_option("--last", last, "last kept mode")->capture_default_str();
  dft->add_option("--radix", radix, "factor of the collectives")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) return run_bench(bench_opts, iterations);
    if (*tune) return run_tune(tune_opts, list, save_table);
    if (*dump) return run_plan_dump(dump_opts, counts, bytecode);
    if (*dft) return run_dft_demo(dft_opts, n, first, last, radix);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
