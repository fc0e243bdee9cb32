#pragma once

#include "lqgopt/types.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace lqgopt {

/// One simulated step. Epoch is -1 during warm-up, >= 0 in adaptive control.
struct TraceRow {
    long t = 0;
    int epoch = -1;
    double cost = 0.0;
    double cum_cost = 0.0;
    double y_norm = 0.0;
    double u_norm = 0.0;
    double xhat_norm = 0.0;
};

struct RunTrace {
    std::vector<TraceRow> rows;
    std::uint64_t seed = 0;
    std::string system_hash;
    std::string config_hash;

    double total_cost() const { return rows.empty() ? 0.0 : rows.back().cum_cost; }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        out << "t,epoch,cost,cum_cost,y_norm,u_norm,xhat_norm\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%ld,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.t, r.epoch,
                          r.cost, r.cum_cost, r.y_norm, r.u_norm, r.xhat_norm);
            out << buf;
        }
    }

    static RunTrace read_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        RunTrace trace;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            TraceRow r;
            if (std::sscanf(line.c_str(), "%ld,%d,%lf,%lf,%lf,%lf,%lf", &r.t, &r.epoch, &r.cost,
                            &r.cum_cost, &r.y_norm, &r.u_norm, &r.xhat_norm) != 7)
                throw std::runtime_error("malformed trace row in " + path);
            trace.rows.push_back(r);
        }
        return trace;
    }
};

}  // namespace lqgopt
