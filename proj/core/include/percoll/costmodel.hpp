#ifndef PERCOLL_COSTMODEL_HPP
#define PERCOLL_COSTMODEL_HPP

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "percoll/plan.hpp"

namespace percoll {

/// alpha: seconds per step, beta: seconds per byte sent by a node,
/// gamma: seconds per byte reduced, delta: seconds per sorting operation.
struct ModelParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
};

/// alpha log_r p + beta (p-1)/(r-1)/p n [+ gamma (p-1)/(r-1)/p n], where n is
/// the total byte count over all nodes. Requires p = r^s.
double closed_form_cost(int p, int r, double n, const ModelParams& params,
                        bool with_reduction = false);

/// delta p (log2 p)^2
double reorder_cost(int p, const ModelParams& params);

/// Samples of (ports, message size) -> transfer time. `ports` is the number
/// of ports of a node busy at the same time.
class MeasurementTable {
 public:
  using Series = std::vector<std::pair<std::size_t, double>>;

  void add(int ports, std::size_t size, double seconds);
  /// Throws InvalidArgument unless every series has >= 2 samples with
  /// strictly increasing positive sizes.
  void check() const;

  bool has_ports(int ports) const { return series_.count(ports) != 0; }
  const std::map<int, Series>& series() const noexcept { return series_; }
  std::size_t sample_count() const noexcept;

  /// CSV with header `ports,size_bytes,time_seconds`, sorted by (ports, size).
  void write_csv(std::ostream& os) const;
  static MeasurementTable read_csv(std::istream& is);
  void save(const std::string& path) const;
  static MeasurementTable load(const std::string& path);

 private:
  std::map<int, Series> series_;
};

/// Piecewise linear in log2(size) between samples, extended linearly from
/// the outer segments and clamped at zero. Size 0 costs nothing.
double interpolate(const MeasurementTable& table, int ports, std::size_t size);

/// Maps (ports, size, alpha + beta size) to the tabulated time.
using TableTransform = std::function<double(int ports, std::size_t size, double seconds)>;

MeasurementTable synthesize_table(const ModelParams& params, const std::vector<int>& ports,
                                  const std::vector<std::size_t>& sizes,
                                  const TableTransform& transform = {});

/// Bytes beyond `threshold` cost `factor` times beta.
TableTransform long_message_saturation(const ModelParams& params, std::size_t threshold,
                                       double factor);
/// Concurrent ports slow each other down: the bandwidth term of a k-port
/// transfer is scaled by k^exponent.
TableTransform port_contention(const ModelParams& params, double exponent);

/// Geometric size sweep from `min_size` to `max_size` with `per_octave`
/// points per doubling (sizes rounded to whole bytes, deduplicated).
std::vector<std::size_t> geometric_sizes(std::size_t min_size, std::size_t max_size,
                                         int per_octave = 1);

struct PortInterval {
  int step = 0;
  int round = 0;
  int node = 0;
  int port = 0;
  double start = 0.0;
  double duration = 0.0;
  std::size_t bytes = 0;
};

/// Bulk-synchronous model of a plan's exchange: within a round a port costs
/// the transfer time of max(bytes sent, bytes received) plus gamma times the
/// bytes it has to reduce; rounds on a port are sequential, a node's step
/// time is its slowest port, and every step starts when the previous one has
/// finished everywhere. Node-local reductions before the exchange add gamma
/// times the largest per-core share.
struct Timeline {
  double local = 0.0;
  std::vector<double> step_times;
  std::vector<std::vector<double>> node_step_times;  // [step][node]
  std::vector<PortInterval> intervals;
  double total = 0.0;

  /// CSV `step,node,port,start,duration,bytes`.
  void write_csv(std::ostream& os) const;
};

Timeline simulate_timeline(const Plan& plan, const ModelParams& params);
Timeline simulate_timeline(const Plan& plan, const MeasurementTable& table, double gamma = 0.0);

}  // namespace percoll

#endif  // PERCOLL_COSTMODEL_HPP
