#pragma once

#include <iosfwd>
#include <string>

#include "isqa/outer.hpp"

namespace isqa {

// Stable trace schema; floats carry 17 significant digits so identical runs
// produce byte-identical files.
inline constexpr const char* kTraceHeader =
    "k,F,delta,Q_d,alpha,mods,inner_iters,eta,normG,sigmaH,MH,time_s";

void write_trace_csv(const OuterTrace& trace, std::ostream& out);
std::string trace_csv(const OuterTrace& trace);
void write_trace_csv_file(const OuterTrace& trace, const std::string& path);

// Sweep output: one trace per arm, prefixed with its inner-iteration count.
struct SweepArm {
  int inner_iterations = 0;
  OuterTrace trace;
};

void write_sweep_csv(const std::vector<SweepArm>& arms, std::ostream& out);
void write_sweep_csv_file(const std::vector<SweepArm>& arms, const std::string& path);

}  // namespace isqa
