#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evcasimir/core_model.hpp"

namespace evc::cli {

struct GridSpec {
    std::size_t nr = 0;          // 0 selects the command's default
    std::size_t nv = 0;
    std::size_t nc = 1;
    double vmax = 0;             // 0: derived from the problem
    double rmax = 0;
    bool adaptive_nodes = true;
};

struct RunConfig {
    std::string command;
    AdmissibleParams params;
    GridSpec grid;
    std::string out_dir = ".";
    std::uint64_t seed = 0;

    // static / sweep
    double eps = 0.9;
    double eps_lo = 0.5, eps_hi = 0.99;
    std::size_t n = 20;
    // witness
    double b = 0.05;
    // evaluate / rearrange
    std::string input;
    std::vector<std::string> ops;
    double P = 0;                // 0: P0
    double gap_a = 0, gap_b = 0;
    double R = 0;
    bool sidecar = false;
    // minimize
    std::string init = "flat";
    double init_R = 0;
    std::size_t max_iter = 400;
    // check
    std::size_t count = 20;
};

// Parses argv (argv[0] is the program name).  A --config JSON file supplies
// values for flags that are absent on the command line.  UsageError on any
// invalid or missing field; help requests return with command "help".
RunConfig parse_config(const std::vector<std::string>& args);

// Runs one command; returns the process exit status.
int run(const RunConfig& cfg);

// parse_config + run with error reporting: 0 ok, 1 computation error,
// 2 usage error.  Errors go to stderr as one JSON object.
int main(int argc, char** argv);

} // namespace evc::cli
