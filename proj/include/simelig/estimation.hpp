#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/csv.hpp"
#include "simelig/design.hpp"

namespace simelig {

/// Weighted least squares fit with cluster-robust covariance. Terms hold the
/// retained explicit regressors in design order; dropped_terms the columns
/// removed as collinear.
struct FitResult {
    std::vector<std::string> terms;
    std::vector<double> beta;
    std::vector<std::vector<double>> vcov;
    std::vector<std::string> dropped_terms;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double mean_y_overall = 0.0;
    double mean_y_baseline = 0.0;
    int baseline_year = 0;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    double k_params = 0.0;  // retained explicit columns plus absorbed dof
    bool degenerate = false;

    double se(std::size_t i) const { return std::sqrt(vcov[i][i]); }

    std::optional<std::size_t> term_index(const std::string& name) const {
        for (std::size_t i = 0; i < terms.size(); ++i)
            if (terms[i] == name) return i;
        return std::nullopt;
    }

    double coef(const std::string& name) const {
        const auto i = term_index(name);
        if (!i) throw ValidationError("fit has no retained term '" + name + "'");
        return beta[*i];
    }

    double se_of(const std::string& name) const {
        const auto i = term_index(name);
        if (!i) throw ValidationError("fit has no retained term '" + name + "'");
        return se(*i);
    }
};

/// Two-sided normal critical values for the 10/5/1 percent levels.
inline std::string significance_stars(double t_stat) {
    const double a = std::abs(t_stat);
    if (a >= 2.5758293035489004) return "***";
    if (a >= 1.9599639845400545) return "**";
    if (a >= 1.6448536269514722) return "*";
    return "";
}

/// Solves the weighted normal equations on the design's explicit columns
/// (factors must already be absorbed or expanded), then forms the CR1
/// cluster-robust sandwich over the design's cluster ids:
///   V = c (X'WX)^-1 (sum_g s_g s_g') (X'WX)^-1,  s_g = sum_{i in g} w_i e_i x_i,
///   c = G/(G-1) * (N-1)/(N-K).
/// K counts retained explicit columns plus the absorbed dummy dof. R-squared
/// is measured against the raw outcome so absorbed effects count as
/// explained variation; the adjusted version uses the same K.
inline FitResult wls_fit(const DesignMatrix& d, double rank_tol = 1e-10) {
    const std::size_t n = d.n();
    const std::size_t k = d.cols.size();
    if (n == 0) throw ValidationError("empty retained sample");
    if (!d.factors.empty() && !d.absorbed)
        throw ValidationError("wls_fit requires factors absorbed or expanded");

    double w_total = 0.0;
    for (double wi : d.w) {
        if (!(wi >= 0.0)) throw ValidationError("negative or invalid weight");
        w_total += wi;
    }
    if (w_total <= 0.0) throw ValidationError("weights are all zero");

    std::set<std::string> cluster_set(d.cluster.begin(), d.cluster.end());
    const std::size_t g = cluster_set.size();
    if (g < 2)
        throw ValidationError("cluster-robust inference needs at least 2 clusters");

    std::vector<std::vector<double>> xtwx(k, std::vector<double>(k, 0.0));
    std::vector<double> xtwy(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = d.w[i];
        for (std::size_t a = 0; a < k; ++a) {
            const double xa = d.cols[a][i];
            if (xa == 0.0) continue;
            xtwy[a] += wi * xa * d.y[i];
            for (std::size_t b = a; b < k; ++b)
                xtwx[a][b] += wi * xa * d.cols[b][i];
        }
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < a; ++b) xtwx[a][b] = xtwx[b][a];

    std::vector<std::vector<double>> l;
    const auto kept = detail::cholesky_leftmost(xtwx, rank_tol, &l);
    if (kept.size() > n)
        throw ValidationError("fewer rows than retained columns");

    FitResult fit;
    for (std::size_t j = 0, m = 0; j < k; ++j) {
        if (m < kept.size() && kept[m] == j) {
            fit.terms.push_back(d.names[j]);
            ++m;
        } else {
            fit.dropped_terms.push_back(d.names[j]);
        }
    }

    std::vector<double> rhs(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) rhs[r] = xtwy[kept[r]];
    fit.beta = detail::cholesky_solve(l, std::move(rhs));

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        double fitted = 0.0;
        for (std::size_t r = 0; r < kept.size(); ++r)
            fitted += fit.beta[r] * d.cols[kept[r]][i];
        resid[i] = d.y[i] - fitted;
    }

    double y_wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) y_wsum += d.w[i] * d.y_orig[i];
    const double y_mean = y_wsum / w_total;
    double tss = 0.0, rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dev = d.y_orig[i] - y_mean;
        tss += d.w[i] * dev * dev;
        rss += d.w[i] * resid[i] * resid[i];
    }

    const double k_explicit = static_cast<double>(kept.size());
    // The absorbed block carries the intercept; a pure explicit design
    // carries it as a column, so no double count either way.
    fit.k_params = k_explicit + d.absorbed_dof;
    const double n_d = static_cast<double>(n);
    fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    const double dof_rest = n_d - fit.k_params;
    fit.adj_r2 = (tss > 0.0 && dof_rest > 0.0)
                     ? 1.0 - (1.0 - fit.r2) * (n_d - 1.0) / dof_rest
                     : fit.r2;
    fit.mean_y_overall = y_mean;
    fit.n_obs = n;
    fit.n_clusters = g;

    if (!d.year.empty()) {
        fit.baseline_year = *std::min_element(d.year.begin(), d.year.end());
        double bw = 0.0, by = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (d.year[i] == fit.baseline_year) {
                bw += d.w[i];
                by += d.w[i] * d.y_orig[i];
            }
        fit.mean_y_baseline = bw > 0.0 ? by / bw : 0.0;
    }

    // CR1 sandwich over cluster score sums.
    std::map<std::string, std::vector<double>> scores;
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = scores[d.cluster[i]];
        if (s.empty()) s.assign(kept.size(), 0.0);
        const double we = d.w[i] * resid[i];
        if (we == 0.0) continue;
        for (std::size_t r = 0; r < kept.size(); ++r)
            s[r] += we * d.cols[kept[r]][i];
    }
    std::vector<std::vector<double>> meat(kept.size(),
                                          std::vector<double>(kept.size(), 0.0));
    for (const auto& [id, s] : scores) {
        (void)id;
        for (std::size_t a = 0; a < kept.size(); ++a)
            for (std::size_t b = 0; b < kept.size(); ++b) meat[a][b] += s[a] * s[b];
    }
    const double g_d = static_cast<double>(g);
    const double correction =
        dof_rest > 0.0 ? g_d / (g_d - 1.0) * (n_d - 1.0) / dof_rest : 0.0;
    const auto bread = detail::cholesky_inverse(l);
    std::vector<std::vector<double>> bm(kept.size(),
                                        std::vector<double>(kept.size(), 0.0));
    for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t m = 0; m < kept.size(); ++m) {
            if (bread[a][m] == 0.0) continue;
            for (std::size_t b = 0; b < kept.size(); ++b)
                bm[a][b] += bread[a][m] * meat[m][b];
        }
    fit.vcov.assign(kept.size(), std::vector<double>(kept.size(), 0.0));
    for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t m = 0; m < kept.size(); ++m) {
            if (bm[a][m] == 0.0) continue;
            for (std::size_t b = 0; b < kept.size(); ++b)
                fit.vcov[a][b] += correction * bm[a][m] * bread[m][b];
        }
    for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t b = a + 1; b < kept.size(); ++b) {
            const double s = 0.5 * (fit.vcov[a][b] + fit.vcov[b][a]);
            fit.vcov[a][b] = s;
            fit.vcov[b][a] = s;
        }
    return fit;
}

struct EstimateOptions {
    bool use_absorption = true;
    double absorb_tol = 1e-10;
    double rank_tol = 1e-10;
    int workers = 1;
};

/// Builds the design for the spec and fits it, residualizing the factor
/// blocks by alternating projections (default) or expanding them to dummies
/// (reference path used for equivalence checks).
inline FitResult estimate(const Dataset& data, const RegressionSpec& spec,
                          const EstimateOptions& opts = {}) {
    DesignMatrix d = build_design(data, spec);
    if (opts.use_absorption)
        absorb_fixed_effects(d, opts.absorb_tol, 100000, opts.workers);
    else
        expand_factors_to_dummies(d);
    return wls_fit(d, opts.rank_tol);
}

/// One fit per ordered threshold with the outcome replaced by the indicator
/// [outcome > threshold]. Thresholds whose indicator is constant over the
/// retained sample are flagged degenerate and skipped; the sequence
/// continues.
struct ThresholdFit {
    double threshold = 0.0;
    bool degenerate = false;
    FitResult fit;
};

inline std::vector<ThresholdFit> threshold_regressions(
    const Dataset& data, const RegressionSpec& spec,
    const std::vector<double>& thresholds, const EstimateOptions& opts = {}) {
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (!(thresholds[i - 1] < thresholds[i]))
            throw ValidationError("thresholds must be strictly increasing");
    const auto& raw = data.num(spec.outcome);
    std::vector<ThresholdFit> out;
    for (double cut : thresholds) {
        Dataset with_indicator = data;
        std::vector<double> ind(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) ind[i] = raw[i] > cut ? 1.0 : 0.0;
        const std::string col = "above_threshold";
        with_indicator.numeric[col] = std::move(ind);
        RegressionSpec s = spec;
        s.outcome = col;

        ThresholdFit tf;
        tf.threshold = cut;
        DesignMatrix d = build_design(with_indicator, s);
        const auto [lo, hi] = std::minmax_element(d.y.begin(), d.y.end());
        if (*lo == *hi) {
            tf.degenerate = true;
        } else {
            if (opts.use_absorption)
                absorb_fixed_effects(d, opts.absorb_tol, 100000, opts.workers);
            else
                expand_factors_to_dummies(d);
            tf.fit = wls_fit(d, opts.rank_tol);
        }
        out.push_back(std::move(tf));
    }
    return out;
}

/// Regresses a state-year policy outcome on lagged state characteristics
/// with state and year effects. The lag is taken within state by exact year
/// match, so each state's first `lag` panel years drop out.
struct EndogeneityResult {
    FitResult fit;
    std::size_t rows_used = 0;
    std::size_t rows_dropped_by_lag = 0;
};

inline EndogeneityResult policy_endogeneity_test(
    const Dataset& panel, const std::string& outcome,
    const std::vector<std::string>& characteristics, int lag,
    const std::string& state_column = "state",
    const std::string& year_column = "year",
    const EstimateOptions& opts = {}) {
    if (lag < 0 || lag > 2) throw ValidationError("lag must be 0, 1, or 2");
    if (characteristics.empty())
        throw ValidationError("endogeneity test needs at least one characteristic");

    const auto states = panel.level_strings(state_column);
    const auto& years = panel.num(year_column);

    std::map<std::pair<std::string, int>, std::size_t> row_at;
    for (std::size_t i = 0; i < panel.n; ++i) {
        const auto key = std::make_pair(states[i],
                                        static_cast<int>(std::llround(years[i])));
        if (!row_at.emplace(key, i).second)
            throw ValidationError("duplicate state-year row for " + key.first + "/" +
                                  std::to_string(key.second));
    }

    std::vector<std::size_t> rows, lag_rows;
    for (std::size_t i = 0; i < panel.n; ++i) {
        const auto key = std::make_pair(states[i],
                                        static_cast<int>(std::llround(years[i])) - lag);
        const auto it = row_at.find(key);
        if (it == row_at.end()) continue;
        rows.push_back(i);
        lag_rows.push_back(it->second);
    }
    if (rows.empty())
        throw ValidationError("lag of " + std::to_string(lag) +
                              " leaves no state-year rows");

    Dataset lagged;
    auto gather_num = [&](const std::vector<double>& src,
                          const std::vector<std::size_t>& idx) {
        std::vector<double> out;
        out.reserve(idx.size());
        for (std::size_t r : idx) out.push_back(src[r]);
        return out;
    };
    std::vector<std::string> st;
    for (std::size_t r : rows) st.push_back(states[r]);
    lagged.add_text("state", st);
    lagged.add_numeric("year", gather_num(years, rows));
    lagged.add_numeric(outcome, gather_num(panel.num(outcome), rows));
    for (const auto& c : characteristics)
        lagged.add_numeric(c + "_lag", gather_num(panel.num(c), lag_rows));
    if (panel.numeric.count("weight"))
        lagged.add_numeric("weight", gather_num(panel.num("weight"), rows));
    else
        lagged.add_numeric("weight", std::vector<double>(rows.size(), 1.0));
    // State-year panels have no family age structure; constant placeholders
    // keep the design builder's factor slots inert.
    lagged.add_numeric("youngest_age", std::vector<double>(rows.size(), 0.0));
    lagged.add_numeric("oldest_age", std::vector<double>(rows.size(), 0.0));
    lagged.add_numeric("age_diff", std::vector<double>(rows.size(), 0.0));

    RegressionSpec spec;
    spec.outcome = outcome;
    spec.treatment = characteristics.front() + "_lag";
    for (std::size_t i = 1; i < characteristics.size(); ++i)
        spec.controls.push_back(characteristics[i] + "_lag");
    spec.model = 1;
    spec.weight_column = "weight";
    spec.cluster_column = "state";

    EndogeneityResult res;
    res.rows_used = rows.size();
    res.rows_dropped_by_lag = panel.n - rows.size();
    res.fit = estimate(lagged, spec, opts);
    return res;
}

/// Adjusted R-squared of the instrument regressed on each model's
/// right-hand side, treatment column excluded. Reported per model so the
/// caller can check how much instrument variation each specification leaves.
struct ModelVariation {
    int model = 0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
};

inline std::vector<ModelVariation> remaining_variation(
    const Dataset& data, const RegressionSpec& base,
    const EstimateOptions& opts = {}) {
    std::vector<ModelVariation> out;
    for (int m = 1; m <= 5; ++m) {
        RegressionSpec s = base;
        s.outcome = base.treatment.empty() ? base.outcome : base.treatment;
        s.treatment.clear();
        s.model = m;
        DesignMatrix d = build_design(data, s);
        if (opts.use_absorption)
            // An exactly absorbed instrument is a finding here, not an
            // error, so the degenerate-design guard stays off.
            absorb_fixed_effects(d, opts.absorb_tol, 100000, opts.workers,
                                 false);
        else
            expand_factors_to_dummies(d);
        const FitResult fit = wls_fit(d, opts.rank_tol);
        out.push_back({m, fit.r2, fit.adj_r2});
    }
    return out;
}

inline constexpr const char* kFitVersionLine = "#simelig-fit v1";

/// Results table: one row per retained term plus the dropped ones, with
/// normal-approximation significance stars.
inline void write_fit_csv(const std::string& path, const FitResult& fit) {
    CsvWriter out(path, kFitVersionLine,
                  {"term", "coefficient", "std_error", "stars"});
    for (std::size_t i = 0; i < fit.terms.size(); ++i) {
        const double se = fit.se(i);
        const double t = se > 0.0 ? fit.beta[i] / se : 0.0;
        out.write_row_strings({fit.terms[i], format_double(fit.beta[i]),
                               format_double(se), significance_stars(t)});
    }
    for (const auto& term : fit.dropped_terms)
        out.write_row_strings({term, "dropped", "", ""});
    out.close();
}

/// Keyed-text regression request, one "key = value" per line:
///   outcome, treatment, controls, state_controls, factor_controls (comma
///   lists), model, interact_with_marital (0/1), weight_column,
///   cluster_column.
inline RegressionSpec parse_regression_spec_text(const std::string& body,
                                                 const std::string& origin) {
    RegressionSpec spec;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto fail = [&](const std::string& msg) {
        throw ValidationError(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto split_list = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (start <= s.size()) {
            const auto comma = s.find(',', start);
            const auto end = comma == std::string::npos ? s.size() : comma;
            std::string item = s.substr(start, end - start);
            const auto a = item.find_first_not_of(" \t");
            const auto b = item.find_last_not_of(" \t");
            if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };
    while (pos <= body.size()) {
        const auto nl = body.find('\n', pos);
        std::string line = body.substr(pos, nl == std::string::npos ? body.size() - pos
                                                                    : nl - pos);
        pos = nl == std::string::npos ? body.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) fail("duplicate key '" + key + "'");
        if (key == "outcome") spec.outcome = value;
        else if (key == "treatment") spec.treatment = value;
        else if (key == "controls") spec.controls = split_list(value);
        else if (key == "state_controls") spec.state_controls = split_list(value);
        else if (key == "factor_controls") spec.factor_controls = split_list(value);
        else if (key == "model") {
            try {
                spec.model = std::stoi(value);
            } catch (const std::exception&) {
                fail("model must be an integer");
            }
        } else if (key == "interact_with_marital") {
            if (value == "1" || value == "true") spec.interact_with_marital = true;
            else if (value == "0" || value == "false")
                spec.interact_with_marital = false;
            else fail("interact_with_marital must be 0 or 1");
        } else if (key == "weight_column") spec.weight_column = value;
        else if (key == "cluster_column") spec.cluster_column = value;
        else fail("unknown key '" + key + "'");
    }
    validate_regression_spec(spec);
    return spec;
}

inline RegressionSpec read_regression_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_regression_spec_text(buf.str(), path);
}

} // namespace simelig
