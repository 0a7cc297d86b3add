#include "percoll/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "percoll/error.hpp"

namespace percoll {

namespace {

void check_params(const ModelParams& m) {
  if (!(m.alpha >= 0 && m.beta >= 0 && m.gamma >= 0 && m.delta >= 0)) {
    throw InvalidArgument("model parameters must be non-negative");
  }
}

}  // namespace

double closed_form_cost(int p, int r, double n, const ModelParams& params, bool with_reduction) {
  check_params(params);
  if (p < 1 || r < 2) throw InvalidArgument("closed form needs p >= 1 and r >= 2");
  int steps = 0;
  long long q = 1;
  while (q < p) {
    q *= r;
    ++steps;
  }
  if (q != p) {
    throw InvalidArgument(std::to_string(p) + " is not a power of " + std::to_string(r));
  }
  const double volume = (static_cast<double>(p) - 1.0) / (r - 1.0) / p * n;
  double t = params.alpha * steps + params.beta * volume;
  if (with_reduction) t += params.gamma * volume;
  return t;
}

double reorder_cost(int p, const ModelParams& params) {
  if (p < 1) throw InvalidArgument("reorder_cost needs p >= 1");
  const double l = std::log2(static_cast<double>(p));
  return params.delta * p * l * l;
}

void MeasurementTable::add(int ports, std::size_t size, double seconds) {
  if (ports < 1) throw InvalidArgument("port count must be >= 1");
  auto& s = series_[ports];
  auto it = std::lower_bound(s.begin(), s.end(), size,
                             [](const auto& sample, std::size_t v) { return sample.first < v; });
  if (it != s.end() && it->first == size) {
    throw InvalidArgument("duplicate sample for ports " + std::to_string(ports) + " size " +
                          std::to_string(size));
  }
  s.insert(it, {size, seconds});
}

void MeasurementTable::check() const {
  if (series_.empty()) throw InvalidArgument("measurement table is empty");
  for (const auto& [ports, s] : series_) {
    if (s.size() < 2) {
      throw InvalidArgument("series for " + std::to_string(ports) + " ports needs >= 2 samples");
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].first == 0) throw InvalidArgument("sample sizes must be positive");
      if (i > 0 && s[i].first <= s[i - 1].first) {
        throw InvalidArgument("sample sizes must increase");
      }
    }
  }
}

std::size_t MeasurementTable::sample_count() const noexcept {
  std::size_t n = 0;
  for (const auto& kv : series_) n += kv.second.size();
  return n;
}

void MeasurementTable::write_csv(std::ostream& os) const {
  os << "ports,size_bytes,time_seconds\n";
  std::ostringstream line;
  line.precision(17);
  for (const auto& [ports, s] : series_) {
    for (const auto& [size, t] : s) {
      line.str("");
      line << ports << ',' << size << ',' << t << '\n';
      os << line.str();
    }
  }
}

MeasurementTable MeasurementTable::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("measurement table: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ports,size_bytes,time_seconds") {
    throw InvalidArgument("measurement table: unexpected header '" + line + "'");
  }
  MeasurementTable table;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long ports = 0;
    long long size = 0;
    double seconds = 0;
    char c1 = 0;
    char c2 = 0;
    if (!(fields >> ports >> c1 >> size >> c2 >> seconds) || c1 != ',' || c2 != ',' ||
        ports < 1 || size < 0) {
      throw InvalidArgument("measurement table: malformed line " + std::to_string(lineno));
    }
    table.add(static_cast<int>(ports), static_cast<std::size_t>(size), seconds);
  }
  table.check();
  return table;
}

void MeasurementTable::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path);
  write_csv(os);
}

MeasurementTable MeasurementTable::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read " + path);
  return read_csv(is);
}

double interpolate(const MeasurementTable& table, int ports, std::size_t size) {
  auto it = table.series().find(ports);
  if (it == table.series().end()) {
    throw InvalidArgument("no measurements for " + std::to_string(ports) + " ports");
  }
  const auto& s = it->second;
  if (s.size() < 2) throw InvalidArgument("series needs >= 2 samples");
  if (size == 0) return 0.0;

  auto upper = std::upper_bound(s.begin(), s.end(), size,
                                [](std::size_t v, const auto& sample) { return v < sample.first; });
  std::size_t hi = static_cast<std::size_t>(upper - s.begin());
  if (hi > 0 && s[hi - 1].first == size) return s[hi - 1].second;
  hi = std::clamp<std::size_t>(hi, 1, s.size() - 1);
  const auto& a = s[hi - 1];
  const auto& b = s[hi];
  const double xa = std::log2(static_cast<double>(a.first));
  const double xb = std::log2(static_cast<double>(b.first));
  const double x = std::log2(static_cast<double>(size));
  const double t = a.second + (b.second - a.second) * (x - xa) / (xb - xa);
  return std::max(0.0, t);
}

MeasurementTable synthesize_table(const ModelParams& params, const std::vector<int>& ports,
                                  const std::vector<std::size_t>& sizes,
                                  const TableTransform& transform) {
  check_params(params);
  if (ports.empty() || sizes.empty()) throw InvalidArgument("synthesize_table needs samples");
  MeasurementTable table;
  for (int k : ports) {
    for (std::size_t n : sizes) {
      double t = params.alpha + params.beta * static_cast<double>(n);
      if (transform) t = transform(k, n, t);
      table.add(k, n, t);
    }
  }
  return table;
}

TableTransform long_message_saturation(const ModelParams& params, std::size_t threshold,
                                       double factor) {
  return [params, threshold, factor](int, std::size_t size, double seconds) {
    if (size <= threshold) return seconds;
    return seconds + (factor - 1.0) * params.beta * static_cast<double>(size - threshold);
  };
}

TableTransform port_contention(const ModelParams& params, double exponent) {
  return [params, exponent](int ports, std::size_t size, double seconds) {
    const double bw = params.beta * static_cast<double>(size);
    return seconds - bw + bw * std::pow(static_cast<double>(ports), exponent);
  };
}

std::vector<std::size_t> geometric_sizes(std::size_t min_size, std::size_t max_size,
                                         int per_octave) {
  if (min_size == 0 || min_size > max_size || per_octave < 1) {
    throw InvalidArgument("geometric_sizes needs 0 < min <= max and per_octave >= 1");
  }
  std::vector<std::size_t> out;
  const double lo = std::log2(static_cast<double>(min_size));
  const double hi = std::log2(static_cast<double>(max_size));
  const auto points = static_cast<long long>(std::floor((hi - lo) * per_octave + 1e-9));
  for (long long i = 0; i <= points; ++i) {
    const auto v = static_cast<std::size_t>(std::llround(std::exp2(lo + static_cast<double>(i) / per_octave)));
    if (out.empty() || v > out.back()) out.push_back(std::min(v, max_size));
  }
  if (out.back() != max_size) out.push_back(max_size);
  return out;
}

void Timeline::write_csv(std::ostream& os) const {
  os << "step,node,port,start,duration,bytes\n";
  std::ostringstream line;
  line.precision(17);
  for (const PortInterval& iv : intervals) {
    line.str("");
    line << iv.step << ',' << iv.node << ',' << iv.port << ',' << iv.start << ','
         << iv.duration << ',' << iv.bytes << '\n';
    os << line.str();
  }
}

namespace {

struct PortLoad {
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t reduced = 0;
};

template <typename TransferTime>
Timeline build_timeline(const Plan& plan, double gamma, TransferTime transfer_time) {
  const int p = plan.spec.topology.num_nodes();
  const int steps = plan.num_steps();

  Timeline tl;
  // Node-local combination before the exchange.
  std::map<std::pair<int, int>, std::size_t> reduced_by_core;
  for (const Stage& st : plan.stages) {
    if (st.kind != StageKind::Local || st.phase != Phase::Gather) continue;
    for (const LocalOp& op : st.ops) {
      if (op.kind == LocalKind::Reduce) reduced_by_core[{op.node, op.core}] += op.length;
    }
  }
  std::size_t local_bytes = 0;
  for (const auto& kv : reduced_by_core) local_bytes = std::max(local_bytes, kv.second);
  tl.local = gamma * static_cast<double>(local_bytes);

  // (step, round, node, port) -> load
  std::map<std::tuple<int, int, int, int>, PortLoad> loads;
  for (const Stage& st : plan.stages) {
    if (st.kind != StageKind::Exchange) continue;
    for (const Transfer& tr : st.transfers) {
      if (tr.length == 0) continue;
      loads[{st.step, st.round, tr.src_node, tr.src_port}].sent += tr.length;
      PortLoad& in = loads[{st.step, st.round, tr.dst_node, tr.dst_port}];
      in.received += tr.length;
      if (tr.reduce) in.reduced += tr.length;
    }
  }

  tl.step_times.assign(static_cast<std::size_t>(steps), 0.0);
  tl.node_step_times.assign(static_cast<std::size_t>(steps),
                            std::vector<double>(static_cast<std::size_t>(p), 0.0));
  // per (step, node, port): running time over rounds
  std::map<std::tuple<int, int, int>, double> port_clock;
  std::vector<std::tuple<int, int, int, int, double, std::size_t>> pending;
  for (const auto& [key, load] : loads) {
    const auto [step, round, node, port] = key;
    const int ports = plan.steps.at(static_cast<std::size_t>(step)).ports;
    const std::size_t bytes = std::max(load.sent, load.received);
    const double d = transfer_time(ports, bytes) + gamma * static_cast<double>(load.reduced);
    double& clock = port_clock[{step, node, port}];
    pending.emplace_back(step, round, node, port, clock, bytes);
    clock += d;
    auto& nt = tl.node_step_times[static_cast<std::size_t>(step)][static_cast<std::size_t>(node)];
    nt = std::max(nt, clock);
  }
  for (int s = 0; s < steps; ++s) {
    const auto& nts = tl.node_step_times[static_cast<std::size_t>(s)];
    tl.step_times[static_cast<std::size_t>(s)] =
        nts.empty() ? 0.0 : *std::max_element(nts.begin(), nts.end());
  }

  std::vector<double> step_start(static_cast<std::size_t>(steps) + 1, tl.local);
  for (int s = 0; s < steps; ++s) {
    step_start[static_cast<std::size_t>(s) + 1] =
        step_start[static_cast<std::size_t>(s)] + tl.step_times[static_cast<std::size_t>(s)];
  }
  tl.total = step_start.back();

  // Rebuild the intervals with absolute start times, in (step, round, node, port) order.
  auto it = pending.begin();
  for (const auto& [key, load] : loads) {
    const auto [step, round, node, port, offset, bytes] = *it++;
    const int ports = plan.steps.at(static_cast<std::size_t>(step)).ports;
    const double d = transfer_time(ports, bytes) + gamma * static_cast<double>(load.reduced);
    tl.intervals.push_back(
        {step, round, node, port, step_start[static_cast<std::size_t>(step)] + offset, d, bytes});
  }
  return tl;
}

}  // namespace

Timeline simulate_timeline(const Plan& plan, const ModelParams& params) {
  check_params(params);
  return build_timeline(plan, params.gamma, [&](int, std::size_t bytes) {
    return params.alpha + params.beta * static_cast<double>(bytes);
  });
}

Timeline simulate_timeline(const Plan& plan, const MeasurementTable& table, double gamma) {
  if (gamma < 0) throw InvalidArgument("gamma must be non-negative");
  return build_timeline(plan, gamma, [&](int ports, std::size_t bytes) {
    return interpolate(table, ports, bytes);
  });
}

}  // namespace percoll
