#ifndef PGLAB_RUNLOG_HPP_
#define PGLAB_RUNLOG_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pglab/policy.hpp"

namespace pglab {

struct RunLogRow {
  int batch = 0;
  double exact_j = 0.0;
  double mean_rm = 0.0;
  double grad_norm = 0.0;
  double wall_time_s = 0.0;
};

// Per-batch training log. The deterministic columns go to the main CSV;
// wall-clock times go to a separate timing CSV so the main file stays
// byte-identical across reruns of the same (config, seed).
struct RunLog {
  std::string estimator;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<RunLogRow> rows;
};

inline void write_runlog_csv(const RunLog& log, std::ostream& os) {
  os << "# estimator=" << log.estimator << "\n";
  os << "# seed=" << log.seed << "\n";
  os << "# config_hash=" << log.config_hash << "\n";
  os << "batch,exact_j,mean_rm,grad_norm\n";
  for (const RunLogRow& row : log.rows) {
    os << row.batch << ',' << format_g17(row.exact_j) << ',' << format_g17(row.mean_rm) << ','
       << format_g17(row.grad_norm) << "\n";
  }
}

inline void write_timing_csv(const RunLog& log, std::ostream& os) {
  os << "batch,wall_time_s\n";
  for (const RunLogRow& row : log.rows) {
    os << row.batch << ',' << format_g17(row.wall_time_s) << "\n";
  }
}

}  // namespace pglab

#endif  // PGLAB_RUNLOG_HPP_
