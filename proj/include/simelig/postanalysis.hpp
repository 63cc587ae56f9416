#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/csv.hpp"
#include "simelig/design.hpp"
#include "simelig/money.hpp"

namespace simelig {

/// Coverage effect per simulated-eligible child together with the sample
/// means needed to express it as an elasticity.
struct TakeUpEstimate {
    double beta_takeup = 0.0;
    double mean_simt = 0.0;
    double mean_coverage = 0.0;
    std::string group;
};

inline double takeup_elasticity(const TakeUpEstimate& est) {
    if (!std::isfinite(est.beta_takeup) || !std::isfinite(est.mean_simt) ||
        !std::isfinite(est.mean_coverage))
        throw ValidationError("take-up inputs must be finite");
    if (!(est.mean_coverage > 0.0))
        throw ValidationError("mean coverage must be positive for an elasticity");
    return est.beta_takeup * est.mean_simt / est.mean_coverage;
}

/// Intent-to-treat effect rescaled to the treated: the reduced-form slope is
/// scaled by the period change in simulated eligibility and divided by the
/// take-up rate among the newly eligible.
struct TotResult {
    double itt_beta = 0.0;
    double delta_simt = 0.0;
    double takeup_rate = 0.0;
    double scaled_itt = 0.0;   // itt_beta * delta_simt
    double scale_factor = 0.0; // delta_simt / takeup_rate
    double tot = 0.0;          // itt_beta * scale_factor
};

inline TotResult itt_to_tot(double itt_beta, double delta_simt, double takeup_rate) {
    if (!std::isfinite(itt_beta) || !std::isfinite(delta_simt) ||
        !std::isfinite(takeup_rate))
        throw ValidationError("scaling inputs must be finite");
    if (!(takeup_rate > 0.0) || takeup_rate > 1.0)
        throw ValidationError("take-up rate must lie in (0, 1]");
    TotResult r;
    r.itt_beta = itt_beta;
    r.delta_simt = delta_simt;
    r.takeup_rate = takeup_rate;
    r.scaled_itt = itt_beta * delta_simt;
    r.scale_factor = delta_simt / takeup_rate;
    r.tot = itt_beta * r.scale_factor;
    return r;
}

/// Weighted mean of a column in the last calendar year minus the first.
inline double simt_change(const Dataset& data, const std::string& simt_col,
                          const std::string& weight_col = "weight",
                          const std::string& year_col = "year") {
    const auto& v = data.num(simt_col);
    const auto& w = data.num(weight_col);
    const auto& yr = data.num(year_col);
    if (data.n == 0) throw ValidationError("empty sample");
    double y_min = yr[0], y_max = yr[0];
    for (double y : yr) {
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    }
    double w_first = 0.0, s_first = 0.0, w_last = 0.0, s_last = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
        if (yr[i] == y_min) {
            w_first += w[i];
            s_first += w[i] * v[i];
        }
        if (yr[i] == y_max) {
            w_last += w[i];
            s_last += w[i] * v[i];
        }
    }
    if (w_first <= 0.0 || w_last <= 0.0)
        throw ValidationError("zero weight in the first or last year");
    return s_last / w_last - s_first / w_first;
}

/// Aggregate cost split over child ages by eligible-weight share, then
/// divided by the age's population. Family cost sums the per-capita values
/// at each child's age; ages with no eligible weight cost nothing.
struct CostDisaggregation {
    std::map<int, double> per_capita;  // dollars per child of that age
    bool degenerate = false;           // every eligible weight was zero

    double family_cost(const std::vector<int>& child_ages) const {
        double total = 0.0;
        for (int age : child_ages) {
            const auto it = per_capita.find(age);
            if (it != per_capita.end()) total += it->second;
        }
        return total;
    }
};

inline CostDisaggregation disaggregate_medicaid_cost(
    Money state_year_cost, const std::map<int, double>& eligible_weight_by_age,
    const std::map<int, double>& population_by_age) {
    double weight_total = 0.0;
    for (const auto& [age, w] : eligible_weight_by_age) {
        if (!(w >= 0.0))
            throw ValidationError("negative eligible weight at age " +
                                  std::to_string(age));
        weight_total += w;
    }
    CostDisaggregation out;
    if (weight_total == 0.0) {
        out.degenerate = true;
        return out;
    }
    const double cost = to_dollars(state_year_cost);
    for (const auto& [age, w] : eligible_weight_by_age) {
        if (w == 0.0) continue;
        const auto pop = population_by_age.find(age);
        if (pop == population_by_age.end() || !(pop->second > 0.0))
            throw ValidationError("age " + std::to_string(age) +
                                  " has eligible weight but no population");
        out.per_capita[age] = cost * (w / weight_total) / pop->second;
    }
    return out;
}

/// Per-group fiscal summary: the cost of covering a child, the tax-revenue
/// response, itemized transfer changes, and the share of the cost recovered
/// through the four headline transfer cuts.
struct FiscalLedger {
    std::string group;
    Money medicaid_cost_per_child{0};
    Money tax_revenue_change{0};
    std::vector<std::pair<std::string, Money>> transfer_changes;
    Money net_fiscal_cost{0};
    double offset_share = 0.0;
};

/// The four transfer programs whose reductions form the headline offset.
inline const std::vector<std::string>& offset_programs() {
    static const std::vector<std::string> names = {
        "public_assistance", "education_assistance", "school_lunch",
        "energy_subsidy"};
    return names;
}

inline FiscalLedger fiscal_balance(
    const std::string& group, Money medicaid_cost_per_child,
    Money tax_revenue_change,
    const std::vector<std::pair<std::string, Money>>& transfer_changes) {
    if (!(medicaid_cost_per_child.cents > 0))
        throw ValidationError("medicaid cost must be positive");
    FiscalLedger ledger;
    ledger.group = group;
    ledger.medicaid_cost_per_child = medicaid_cost_per_child;
    ledger.tax_revenue_change = tax_revenue_change;
    ledger.transfer_changes = transfer_changes;

    Money net = medicaid_cost_per_child - tax_revenue_change;
    Money offset_cents{0};
    const auto& named = offset_programs();
    for (const auto& [program, change] : transfer_changes) {
        net += change;
        const bool headline =
            std::find(named.begin(), named.end(), program) != named.end();
        if (headline && change.cents < 0) offset_cents -= change;
    }
    ledger.net_fiscal_cost = net;
    ledger.offset_share = static_cast<double>(offset_cents.cents) /
                          static_cast<double>(medicaid_cost_per_child.cents);
    return ledger;
}

/// Pulls one coefficient and its standard error out of a results table
/// written by write_fit_csv. Dropped terms are not usable as estimates.
struct FitCoefficient {
    double beta = 0.0;
    double se = 0.0;
};

inline FitCoefficient read_fit_coefficient(const std::string& path,
                                           const std::string& term) {
    CsvReader reader(path);
    const ColumnMap cols(reader, {"term", "coefficient", "std_error", "stars"});
    std::vector<std::string> cells;
    while (reader.next(cells)) {
        if (cells[static_cast<std::size_t>(cols["term"])] != term) continue;
        const std::string& coef = cells[static_cast<std::size_t>(cols["coefficient"])];
        if (coef == "dropped")
            throw ValidationError("term '" + term + "' was dropped as collinear in " +
                                  path);
        FitCoefficient out;
        out.beta = parse_double(coef, reader, "coefficient");
        out.se = parse_double(cells[static_cast<std::size_t>(cols["std_error"])],
                              reader, "std_error");
        return out;
    }
    throw ValidationError("term '" + term + "' not found in " + path);
}

inline constexpr const char* kTotVersionLine = "#simelig-tot v1";
inline constexpr const char* kLedgerReportVersionLine = "#simelig-fiscal v1";

inline void write_tot_csv(const std::string& path,
                          const std::vector<std::pair<std::string, TotResult>>& rows) {
    CsvWriter out(path, kTotVersionLine,
                  {"group", "itt_beta", "delta_simt", "takeup_rate", "scaled_itt",
                   "scale_factor", "tot"});
    for (const auto& [group, r] : rows)
        out.write_row_strings({group, format_double(r.itt_beta),
                               format_double(r.delta_simt),
                               format_double(r.takeup_rate),
                               format_double(r.scaled_itt),
                               format_double(r.scale_factor), format_double(r.tot)});
    out.close();
}

inline void write_fiscal_csv(const std::string& path,
                             const std::vector<FiscalLedger>& ledgers) {
    CsvWriter out(path, kLedgerReportVersionLine,
                  {"group", "item", "amount", "offset_share"});
    for (const auto& l : ledgers) {
        out.write_row_strings({l.group, "medicaid_cost_per_child",
                               money_to_string(l.medicaid_cost_per_child),
                               format_double(l.offset_share)});
        out.write_row_strings({l.group, "tax_revenue_change",
                               money_to_string(l.tax_revenue_change), ""});
        for (const auto& [program, change] : l.transfer_changes)
            out.write_row_strings({l.group, program, money_to_string(change), ""});
        out.write_row_strings(
            {l.group, "net_fiscal_cost", money_to_string(l.net_fiscal_cost), ""});
    }
    out.close();
}

/// Plain-text companion to the CSV reports.
inline std::string fiscal_summary_text(const std::vector<FiscalLedger>& ledgers) {
    std::string out;
    for (const auto& l : ledgers) {
        out += "group " + l.group + "\n";
        out += "  medicaid cost per newly covered child: " +
               money_to_string(l.medicaid_cost_per_child) + "\n";
        out += "  tax revenue change: " + money_to_string(l.tax_revenue_change) + "\n";
        for (const auto& [program, change] : l.transfer_changes)
            out += "  transfer change, " + program + ": " + money_to_string(change) +
                   "\n";
        out += "  net fiscal cost: " + money_to_string(l.net_fiscal_cost) + "\n";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * l.offset_share);
        out += "  cost share recovered via the four headline transfer cuts: " +
               std::string(buf) + "\n";
    }
    return out;
}

} // namespace simelig
