#include "isqa/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace isqa {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_row(const IterRecord& r, std::ostream& out) {
  out << r.k << ',' << fmt(r.objective) << ',' << fmt(r.delta) << ',' << fmt(r.q_d) << ','
      << fmt(r.alpha) << ',' << r.mods << ',' << r.inner_iters << ',' << fmt(r.eta) << ','
      << fmt(r.norm_G) << ',' << fmt(r.sigma_H) << ',' << fmt(r.M_H) << ',' << fmt(r.time_s)
      << '\n';
}

}  // namespace

void write_trace_csv(const OuterTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const IterRecord& r : trace.records) write_row(r, out);
}

std::string trace_csv(const OuterTrace& trace) {
  std::ostringstream out;
  write_trace_csv(trace, out);
  return out.str();
}

void write_trace_csv_file(const OuterTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open trace output '" + path + "'");
  write_trace_csv(trace, out);
}

void write_sweep_csv(const std::vector<SweepArm>& arms, std::ostream& out) {
  out << 'T' << ',' << kTraceHeader << '\n';
  for (const SweepArm& arm : arms)
    for (const IterRecord& r : arm.trace.records) {
      out << arm.inner_iterations << ',';
      write_row(r, out);
    }
}

void write_sweep_csv_file(const std::vector<SweepArm>& arms, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open sweep output '" + path + "'");
  write_sweep_csv(arms, out);
}

}  // namespace isqa
