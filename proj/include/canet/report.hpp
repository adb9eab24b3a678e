#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "canet/metrics.hpp"

namespace canet {

// Evaluation report, tabular text. Header line then one row per case per
// class, fixed column order:
//
//   case class dsc hd_mm avd_mm flags
//
// Undefined distances print as nan with the reason in flags
// (ok | both_empty | pred_empty | gt_empty).

struct report_row {
    std::string case_id;
    std::string class_name;
    double dsc = 0;
    double hd_mm = std::numeric_limits<double>::quiet_NaN();
    double avd_mm = std::numeric_limits<double>::quiet_NaN();
    std::string flags = "ok";
};

inline std::vector<report_row> report_rows(const std::string& case_id, const eval_report& rep) {
    std::vector<report_row> rows;
    for (int c = 1; c <= 4; ++c) {
        const auto& m = rep.per_class[std::size_t(c - 1)];
        report_row r;
        r.case_id = case_id;
        r.class_name = class_name(c);
        r.dsc = m.dsc;
        if (m.hd_mm) r.hd_mm = *m.hd_mm;
        if (m.avd_mm) r.avd_mm = *m.avd_mm;
        r.flags = m.both_empty ? "both_empty" : m.pred_empty ? "pred_empty" : m.gt_empty ? "gt_empty" : "ok";
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_report(const std::string& path, const std::vector<report_row>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("report: cannot open " + path + " for writing");
    f << "case class dsc hd_mm avd_mm flags\n";
    f << std::setprecision(9);
    for (const auto& r : rows)
        f << r.case_id << " " << r.class_name << " " << r.dsc << " " << r.hd_mm << " " << r.avd_mm
          << " " << r.flags << "\n";
    if (!f) throw std::runtime_error("report: write failed for " + path);
}

inline std::vector<report_row> read_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    std::string header;
    std::getline(f, header);
    if (header != "case class dsc hd_mm avd_mm flags")
        throw std::runtime_error("report: bad header in " + path);
    std::vector<report_row> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        report_row r;
        std::string dsc, hd, avd;  // stod accepts nan, stream extraction does not
        if (!(ls >> r.case_id >> r.class_name >> dsc >> hd >> avd >> r.flags))
            throw std::runtime_error("report: malformed row: " + line);
        try {
            r.dsc = std::stod(dsc);
            r.hd_mm = std::stod(hd);
            r.avd_mm = std::stod(avd);
        } catch (const std::exception&) {
            throw std::runtime_error("report: malformed row: " + line);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

struct class_aggregate {
    std::string class_name;
    double mean_dsc = 0;
    double mean_hd_mm = std::numeric_limits<double>::quiet_NaN();
    double mean_avd_mm = std::numeric_limits<double>::quiet_NaN();
    int cases = 0;
    int with_distances = 0;  // rows whose distances were defined
};

/// Per-class means. Undefined distance entries are excluded, never imputed.
inline std::vector<class_aggregate> aggregate_report(const std::vector<report_row>& rows) {
    std::vector<class_aggregate> out;
    for (int c = 1; c <= 4; ++c) {
        class_aggregate a;
        a.class_name = class_name(c);
        double hd = 0, avd = 0;
        for (const auto& r : rows) {
            if (r.class_name != a.class_name) continue;
            ++a.cases;
            a.mean_dsc += r.dsc;
            if (r.flags == "ok" && !std::isnan(r.hd_mm) && !std::isnan(r.avd_mm)) {
                ++a.with_distances;
                hd += r.hd_mm;
                avd += r.avd_mm;
            }
        }
        if (a.cases) a.mean_dsc /= a.cases;
        if (a.with_distances) {
            a.mean_hd_mm = hd / a.with_distances;
            a.mean_avd_mm = avd / a.with_distances;
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace canet
