#pragma once

// Artifact serialization.  CSV monitor tables are byte-deterministic: fixed
// column set, fixed "%.12g" formatting, fixed header layout, no locale or
// timestamp dependence -- rerunning a configuration must reproduce the file
// exactly.  The JSON side carries the schema-versioned bound report.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ckrf/base.hpp"
#include "ckrf/bounds.hpp"
#include "ckrf/monitors.hpp"
#include "ckrf/scenario.hpp"

namespace ckrf {

inline constexpr int kCsvSchema = 1;
inline constexpr int kReportSchema = 1;

inline std::string fmt_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline const std::vector<std::string>& monitor_columns() {
    static const std::vector<std::string> cols = {
        "t",
        "sup_R",
        "inf_R",
        "sup_abs_v",
        "sup_u_tr",
        "sup_grad_v2",
        "sup_lap_v",
        "inf_lap_v",
        "inf_R_minus_tr_theta",
        "min_H",
        "min_q",
        "sup_psi",
        "sup_phi_ratio",
        "sup_G",
        "res_trace_linf",
        "res_trace_l2",
        "res_v_linf",
        "res_v_l2",
    };
    return cols;
}

inline void write_monitor_csv(std::ostream& os, const Setup& su, const MonitorSeries& se) {
    os << "# ckrf monitor table v" << kCsvSchema << "\n";
    os << "# scenario=" << su.scenario.name;
    for (const auto& g : su.geom) os << " n=" << g.grid.n;
    os << " eps=" << fmt_g(se.eps) << " beta=" << fmt_g(su.scenario.beta)
       << " k=" << fmt_g(su.k) << " T=" << fmt_g(su.sched.T)
       << " collapsing=" << su.sched.collapsing << "\n";
    const auto& cols = monitor_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << "\n";
    for (const auto& s : se.samples) {
        const double row[] = {s.t,
                              s.sup_R,
                              s.inf_R,
                              s.sup_abs_v,
                              s.sup_u,
                              s.sup_grad2,
                              s.sup_lap,
                              s.inf_lap,
                              s.inf_R_minus_trth,
                              s.min_H,
                              s.min_q,
                              s.sup_psi,
                              s.sup_phi_ratio,
                              s.sup_G,
                              s.res_trace_linf,
                              s.res_trace_l2,
                              s.res_v_linf,
                              s.res_v_l2};
        for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << fmt_g(row[c]);
        os << "\n";
    }
}

inline std::string monitor_csv_string(const Setup& su, const MonitorSeries& se) {
    std::ostringstream os;
    write_monitor_csv(os, su, se);
    return os.str();
}

struct CsvTable {
    double T = 0.0;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) {
                std::vector<double> out;
                for (const auto& r : rows) out.push_back(r[c]);
                return out;
            }
        throw FitError("csv: missing column " + name);
    }
};

inline CsvTable parse_monitor_csv(std::istream& is) {
    CsvTable tab;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find(" T=");
            if (pos != std::string::npos) tab.T = std::stod(line.substr(pos + 3));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ss, cell, ',')) tab.columns.push_back(cell);
            have_header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FitError("csv: non-numeric cell '" + cell + "'");
            }
        }
        if (row.size() != tab.columns.size()) throw FitError("csv: ragged row");
        tab.rows.push_back(std::move(row));
    }
    if (!have_header || tab.rows.empty()) throw FitError("csv: empty table");
    return tab;
}

inline nlohmann::json to_json(const BoundReport& rep) {
    nlohmann::json j;
    j["schema_version"] = kReportSchema;
    j["generator"] = "ckrf";
    j["scenario"] = rep.scenario;
    j["T"] = rep.T;
    j["collapsing_factor"] = rep.collapsing;
    j["beta"] = rep.beta;
    j["k"] = rep.k;
    j["k_max"] = rep.k_max;
    j["n_nodes"] = rep.n_nodes;
    j["eps_ladder"] = rep.eps;
    j["truncated"] = std::vector<bool>(rep.truncated.begin(), rep.truncated.end());
    j["density_stopped"] =
        std::vector<bool>(rep.density_stopped.begin(), rep.density_stopped.end());
    j["overall_pass"] = rep.overall_pass;
    auto num = [](double v) -> nlohmann::json {
        if (std::isnan(v)) return nullptr;
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };
    j["bounds"] = nlohmann::json::array();
    for (const auto& e : rep.entries) {
        nlohmann::json je;
        je["name"] = e.name;
        je["values"] = nlohmann::json::array();
        for (double v : e.value) je["values"].push_back(num(v));
        je["rel_change"] = num(e.rel_change);
        je["applicable"] = e.applicable;
        je["pass"] = e.pass;
        if (!e.note.empty()) je["note"] = e.note;
        j["bounds"].push_back(je);
    }
    j["blowup_fits"] = nlohmann::json::array();
    for (const auto& f : rep.fits) {
        j["blowup_fits"].push_back({{"p", num(f.p)},
                                    {"C", num(f.C)},
                                    {"rms_loglog", num(f.rms)},
                                    {"n_samples", f.n_used},
                                    {"pass", f.pass}});
    }
    return j;
}

}  // namespace ckrf
