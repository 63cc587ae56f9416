#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/csv.hpp"
#include "simelig/parallel.hpp"

namespace simelig {

/// Column store for one analysis sample. Numeric and text columns share the
/// row count; factors can be built from either kind.
struct Dataset {
    std::size_t n = 0;
    std::map<std::string, std::vector<double>> numeric;
    std::map<std::string, std::vector<std::string>> text;

    bool has(const std::string& name) const {
        return numeric.count(name) > 0 || text.count(name) > 0;
    }

    const std::vector<double>& num(const std::string& name) const {
        const auto it = numeric.find(name);
        if (it == numeric.end())
            throw ValidationError("dataset has no numeric column '" + name + "'");
        return it->second;
    }

    const std::vector<std::string>& txt(const std::string& name) const {
        const auto it = text.find(name);
        if (it == text.end())
            throw ValidationError("dataset has no text column '" + name + "'");
        return it->second;
    }

    void add_numeric(const std::string& name, std::vector<double> values) {
        if (n == 0 && text.empty() && numeric.empty()) n = values.size();
        if (values.size() != n)
            throw ValidationError("column '" + name + "' row count mismatch");
        if (has(name)) throw ValidationError("duplicate column '" + name + "'");
        numeric[name] = std::move(values);
    }

    void add_text(const std::string& name, std::vector<std::string> values) {
        if (n == 0 && text.empty() && numeric.empty()) n = values.size();
        if (values.size() != n)
            throw ValidationError("column '" + name + "' row count mismatch");
        if (has(name)) throw ValidationError("duplicate column '" + name + "'");
        text[name] = std::move(values);
    }

    /// Level strings for factor use: text columns verbatim, numeric columns
    /// through the shortest round-trip formatting.
    std::vector<std::string> level_strings(const std::string& name) const {
        if (text.count(name)) return text.at(name);
        const auto& v = num(name);
        std::vector<std::string> out;
        out.reserve(v.size());
        for (double x : v) out.push_back(format_double(x));
        return out;
    }
};

/// One categorical factor: per-row level code plus the sorted level table.
struct Factor {
    std::string name;
    std::vector<int> codes;          // index into levels, one per row
    std::vector<std::string> levels; // sorted, deduplicated

    std::size_t level_count() const { return levels.size(); }
};

inline Factor make_factor(const std::string& name,
                          const std::vector<std::string>& values) {
    Factor f;
    f.name = name;
    std::set<std::string> uniq(values.begin(), values.end());
    f.levels.assign(uniq.begin(), uniq.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < f.levels.size(); ++i)
        index[f.levels[i]] = static_cast<int>(i);
    f.codes.reserve(values.size());
    for (const auto& v : values) f.codes.push_back(index[v]);
    return f;
}

inline Factor cross_factors(const Factor& a, const Factor& b) {
    std::vector<std::string> combined;
    combined.reserve(a.codes.size());
    for (std::size_t i = 0; i < a.codes.size(); ++i)
        combined.push_back(a.levels[static_cast<std::size_t>(a.codes[i])] + "|" +
                           b.levels[static_cast<std::size_t>(b.codes[i])]);
    return make_factor(a.name + "x" + b.name, combined);
}

inline Factor subset_factor(const Factor& f, const std::vector<std::size_t>& rows) {
    std::vector<std::string> values;
    values.reserve(rows.size());
    for (std::size_t r : rows)
        values.push_back(f.levels[static_cast<std::size_t>(f.codes[r])]);
    return make_factor(f.name, values);
}

/// Regression request for the family-eligibility design: outcome and
/// treatment columns, numeric controls (state-level ones fall out of models
/// 3 and 5 where state-by-year effects subsume them), categorical controls,
/// the model variant, and the marital interaction switch.
struct RegressionSpec {
    std::string outcome;
    std::string treatment;  // empty: no treatment column (auxiliary fits)
    std::vector<std::string> controls;
    std::vector<std::string> state_controls;
    std::vector<std::string> factor_controls;
    int model = 1;
    bool interact_with_marital = false;
    std::string weight_column = "weight";
    std::string cluster_column = "state";

    std::string state_column = "state";
    std::string year_column = "year";
    std::string marital_column = "marital";
    std::string youngest_column = "youngest_age";
    std::string oldest_column = "oldest_age";
    std::string age_diff_column = "age_diff";
};

inline void validate_regression_spec(const RegressionSpec& s) {
    if (s.outcome.empty()) throw ValidationError("regression spec: outcome required");
    if (s.model < 1 || s.model > 5)
        throw ValidationError("regression spec: model must lie in 1..5");
    for (const auto& c : s.controls)
        if (c == s.treatment)
            throw ValidationError("regression spec: treatment '" + s.treatment +
                                  "' cannot also be a control");
    for (const auto& c : s.state_controls)
        if (c == s.treatment)
            throw ValidationError("regression spec: treatment '" + s.treatment +
                                  "' cannot also be a control");
}

/// Explicit regressors plus the factor list still to absorb or expand. y is
/// the working copy that absorption residualizes; y_orig keeps the raw
/// outcome for totals and means.
struct DesignMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    std::vector<double> y;
    std::vector<double> y_orig;
    std::vector<double> w;
    std::vector<std::string> cluster;
    std::vector<int> year;
    std::vector<Factor> factors;
    std::size_t dropped_zero_weight = 0;
    std::size_t dropped_singletons = 0;
    double absorbed_dof = 0.0;  // filled by absorption or dummy expansion
    bool absorbed = false;
    bool has_intercept_column = false;

    std::size_t n() const { return y.size(); }
};

namespace detail {

/// Iteratively removes rows that are alone in some factor level; such rows
/// are fit exactly by their own effect and only distort the dof counts.
inline std::vector<std::size_t> drop_singletons(std::vector<std::size_t> rows,
                                                const std::vector<Factor>& factors,
                                                std::size_t* dropped) {
    if (factors.empty()) return rows;
    bool changed = true;
    while (changed && !rows.empty()) {
        changed = false;
        for (const auto& f : factors) {
            std::map<int, int> count;
            for (std::size_t r : rows) ++count[f.codes[r]];
            std::vector<std::size_t> kept;
            kept.reserve(rows.size());
            for (std::size_t r : rows)
                if (count[f.codes[r]] > 1)
                    kept.push_back(r);
                else
                    ++*dropped;
            if (kept.size() != rows.size()) {
                rows = std::move(kept);
                changed = true;
            }
        }
    }
    return rows;
}

/// Incremental Cholesky of a symmetric matrix with deterministic rank
/// handling: columns are visited left to right and a column whose pivot
/// falls below tol relative to its diagonal is dropped. Returns retained
/// indices; fills L restricted to them.
inline std::vector<std::size_t> cholesky_leftmost(
    const std::vector<std::vector<double>>& a, double tol,
    std::vector<std::vector<double>>* l_out) {
    const std::size_t k = a.size();
    std::vector<std::size_t> kept;
    std::vector<std::vector<double>> l;  // rows indexed by kept order
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> row(kept.size() + 1, 0.0);
        for (std::size_t r = 0; r < kept.size(); ++r) {
            double s = a[j][kept[r]];
            for (std::size_t m = 0; m < r; ++m) s -= row[m] * l[r][m];
            row[r] = l[r][r] > 0.0 ? s / l[r][r] : 0.0;
        }
        double d = a[j][j];
        for (std::size_t m = 0; m < kept.size(); ++m) d -= row[m] * row[m];
        if (a[j][j] <= 0.0 || d <= tol * a[j][j]) continue;
        row[kept.size()] = std::sqrt(d);
        kept.push_back(j);
        l.push_back(std::move(row));
    }
    *l_out = std::move(l);
    return kept;
}

inline std::vector<double> cholesky_solve(const std::vector<std::vector<double>>& l,
                                          std::vector<double> b) {
    const std::size_t k = l.size();
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < i; ++j) b[i] -= l[i][j] * b[j];
        b[i] /= l[i][i];
    }
    for (std::size_t i = k; i-- > 0;) {
        for (std::size_t j = i + 1; j < k; ++j) b[i] -= l[j][i] * b[j];
        b[i] /= l[i][i];
    }
    return b;
}

inline std::vector<std::vector<double>> cholesky_inverse(
    const std::vector<std::vector<double>>& l) {
    const std::size_t k = l.size();
    std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
    for (std::size_t col = 0; col < k; ++col) {
        std::vector<double> e(k, 0.0);
        e[col] = 1.0;
        const auto x = cholesky_solve(l, std::move(e));
        for (std::size_t row = 0; row < k; ++row) inv[row][col] = x[row];
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            const double s = 0.5 * (inv[i][j] + inv[j][i]);
            inv[i][j] = s;
            inv[j][i] = s;
        }
    return inv;
}

/// Exact dimension of the space spanned by the factor dummies plus the
/// intercept. Each row activates one dummy per factor, so the Gram matrix
/// accumulates in O(rows x factors^2); its pivoted rank then catches every
/// structural dependency (including the exact youngest/oldest/difference
/// identity) that level counting alone would miss.
inline double absorbed_dof_exact(const std::vector<Factor>& factors,
                                 const std::vector<double>& w,
                                 double tol = 1e-10) {
    if (factors.empty()) return 0.0;
    std::vector<std::size_t> offset(factors.size());
    std::size_t k = 1;  // intercept
    for (std::size_t f = 0; f < factors.size(); ++f) {
        offset[f] = k;
        k += factors[f].level_count() - 1;  // level 0 is the reference
    }
    std::vector<std::vector<double>> gram(k, std::vector<double>(k, 0.0));
    std::vector<std::size_t> active;
    active.reserve(factors.size() + 1);
    for (std::size_t i = 0; i < w.size(); ++i) {
        active.clear();
        active.push_back(0);
        for (std::size_t f = 0; f < factors.size(); ++f) {
            const int code = factors[f].codes[i];
            if (code > 0)
                active.push_back(offset[f] + static_cast<std::size_t>(code) - 1);
        }
        for (std::size_t a : active)
            for (std::size_t b : active) gram[a][b] += w[i];
    }
    std::vector<std::vector<double>> l;
    return static_cast<double>(cholesky_leftmost(gram, tol, &l).size());
}

} // namespace detail

/// Assembles the regression design: explicit columns (treatment first, then
/// controls, each duplicated against the married indicator when interacting),
/// and the factor list (the five family factors, categorical controls, and
/// the model's interaction blocks, all crossed with marital status when
/// interacting). Zero-weight rows and factor-level singletons are dropped up
/// front and counted.
inline DesignMatrix build_design(const Dataset& data, const RegressionSpec& spec) {
    validate_regression_spec(spec);
    const auto& w_all = data.num(spec.weight_column);
    const auto& y_all = data.num(spec.outcome);

    std::vector<std::size_t> rows;
    std::size_t zero_w = 0;
    for (std::size_t i = 0; i < data.n; ++i) {
        if (w_all[i] > 0.0)
            rows.push_back(i);
        else
            ++zero_w;
    }
    if (rows.empty()) throw ValidationError("empty retained sample");

    // Factor plan on the full rows, then singleton filtering, then rebuild.
    auto factor_of = [&](const std::string& column) {
        return make_factor(column, data.level_strings(column));
    };
    const Factor state_f = factor_of(spec.state_column);
    const Factor year_f = factor_of(spec.year_column);
    const Factor young_f = factor_of(spec.youngest_column);
    const Factor old_f = factor_of(spec.oldest_column);
    const Factor diff_f = factor_of(spec.age_diff_column);

    std::vector<Factor> plan = {state_f, year_f, young_f, old_f, diff_f};
    for (const auto& name : spec.factor_controls) plan.push_back(factor_of(name));
    if (spec.model == 2 || spec.model == 5) {
        plan.push_back(cross_factors(state_f, young_f));
        plan.push_back(cross_factors(state_f, old_f));
        plan.push_back(cross_factors(state_f, diff_f));
    }
    if (spec.model == 3 || spec.model == 5)
        plan.push_back(cross_factors(state_f, year_f));
    if (spec.model == 4 || spec.model == 5) {
        plan.push_back(cross_factors(year_f, young_f));
        plan.push_back(cross_factors(year_f, old_f));
        plan.push_back(cross_factors(year_f, diff_f));
    }

    Factor marital_f;
    bool have_marital = false;
    if (data.has(spec.marital_column)) {
        marital_f = factor_of(spec.marital_column);
        have_marital = true;
    }
    if (spec.interact_with_marital) {
        if (!have_marital)
            throw ValidationError("interact_with_marital requires column '" +
                                  spec.marital_column + "'");
        for (auto& f : plan) f = cross_factors(marital_f, f);
    } else if (have_marital && marital_f.level_count() > 1) {
        plan.push_back(marital_f);
    }

    std::size_t singletons = 0;
    rows = detail::drop_singletons(std::move(rows), plan, &singletons);
    if (rows.empty())
        throw ValidationError("empty retained sample after singleton removal");

    DesignMatrix d;
    d.dropped_zero_weight = zero_w;
    d.dropped_singletons = singletons;
    for (const auto& f : plan) d.factors.push_back(subset_factor(f, rows));

    auto gather = [&](const std::vector<double>& src) {
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t r : rows) out.push_back(src[r]);
        return out;
    };

    d.y = gather(y_all);
    d.y_orig = d.y;
    d.w = gather(w_all);
    const auto& cluster_all = data.level_strings(spec.cluster_column);
    for (std::size_t r : rows) d.cluster.push_back(cluster_all[r]);
    const auto& year_num = data.num(spec.year_column);
    for (std::size_t r : rows)
        d.year.push_back(static_cast<int>(std::llround(year_num[r])));

    std::vector<double> married;
    if (spec.interact_with_marital) {
        const auto& mvals = data.level_strings(spec.marital_column);
        for (std::size_t r : rows)
            married.push_back(mvals[r] == "married" ? 1.0 : 0.0);
    }

    auto add_column = [&](const std::string& name, std::vector<double> col) {
        d.names.push_back(name);
        d.cols.push_back(std::move(col));
    };
    auto add_control = [&](const std::string& name) {
        add_column(name, gather(data.num(name)));
        if (!married.empty()) {
            std::vector<double> inter = d.cols.back();
            for (std::size_t i = 0; i < inter.size(); ++i) inter[i] *= married[i];
            add_column(name + ":married", std::move(inter));
        }
    };

    if (!spec.treatment.empty()) add_column(spec.treatment, gather(data.num(spec.treatment)));
    for (const auto& c : spec.controls) add_control(c);
    if (spec.model != 3 && spec.model != 5)
        for (const auto& c : spec.state_controls) add_control(c);

    return d;
}

/// Weighted within-transformation by alternating projections: each working
/// column (and y) is residualized against every factor in turn until the
/// largest per-entry change falls below tol. Columns converge independently,
/// so parallel workers cannot change the result.
inline void absorb_fixed_effects(DesignMatrix& d, double tol = 1e-10,
                                 int max_sweeps = 100000, int workers = 1,
                                 bool require_nondegenerate = true) {
    if (d.factors.empty()) {
        d.absorbed_dof = 0.0;
        d.absorbed = true;
        return;
    }
    const std::size_t n = d.n();

    // Per-factor weighted level totals never change; cache them.
    std::vector<std::vector<double>> level_weight(d.factors.size());
    for (std::size_t fi = 0; fi < d.factors.size(); ++fi) {
        level_weight[fi].assign(d.factors[fi].level_count(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            level_weight[fi][static_cast<std::size_t>(d.factors[fi].codes[i])] +=
                d.w[i];
    }

    auto residualize = [&](std::vector<double>& col) {
        double max_change = 0.0;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            max_change = 0.0;
            for (std::size_t fi = 0; fi < d.factors.size(); ++fi) {
                const Factor& f = d.factors[fi];
                std::vector<double> sums(f.level_count(), 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    sums[static_cast<std::size_t>(f.codes[i])] += d.w[i] * col[i];
                for (std::size_t l = 0; l < sums.size(); ++l)
                    sums[l] = level_weight[fi][l] > 0.0 ? sums[l] / level_weight[fi][l]
                                                        : 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double mean = sums[static_cast<std::size_t>(f.codes[i])];
                    if (mean != 0.0) {
                        col[i] -= mean;
                        max_change = std::max(max_change, std::abs(mean));
                    }
                }
            }
            if (max_change < tol) return;
        }
        throw ValidationError(
            "fixed-effect absorption did not converge within the sweep cap; "
            "last residual change = " +
            format_double(max_change));
    };

    const std::size_t targets = d.cols.size() + 1;
    parallel_index_map<int>(
        targets,
        [&](std::size_t t) {
            residualize(t == 0 ? d.y : d.cols[t - 1]);
            return 0;
        },
        workers);

    // Rank tolerance stays at its own default so the dof matches the
    // dummy-path pivot rule regardless of the convergence tolerance.
    d.absorbed_dof = detail::absorbed_dof_exact(d.factors, d.w);
    d.absorbed = true;

    if (require_nondegenerate && !d.cols.empty()) {
        bool any_alive = false;
        for (const auto& col : d.cols) {
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) ss += d.w[i] * col[i] * col[i];
            if (ss > tol) any_alive = true;
        }
        if (!any_alive)
            throw ValidationError(
                "degenerate design: every regressor is absorbed by the fixed "
                "effects");
    }
}

/// Full-dummy encoding of the factor list: an intercept plus levels-minus-one
/// dummies per factor (first level is the reference), appended after the
/// explicit columns so rank drops hit dummies before regressors.
inline void expand_factors_to_dummies(DesignMatrix& d) {
    const std::size_t n = d.n();
    if (!d.factors.empty() || !d.has_intercept_column) {
        std::vector<double> ones(n, 1.0);
        d.names.push_back("(intercept)");
        d.cols.push_back(std::move(ones));
        d.has_intercept_column = true;
    }
    for (const auto& f : d.factors) {
        for (std::size_t l = 1; l < f.level_count(); ++l) {
            std::vector<double> col(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (f.codes[i] == static_cast<int>(l)) col[i] = 1.0;
            d.names.push_back(f.name + "=" + f.levels[l]);
            d.cols.push_back(std::move(col));
        }
    }
    d.factors.clear();
    d.absorbed_dof = 0.0;
    d.absorbed = true;
}

} // namespace simelig
