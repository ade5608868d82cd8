#include "stagedrisk/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace staged {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string stratum_name(const Strata& s) {
    return "(" + s.sex + ", " + s.age_band + ", " + s.race + ")";
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // sample SD, n-1
    std::size_t n = 0;
};

MeanSd mean_sample_sd(const std::vector<double>& v) {
    MeanSd r;
    r.n = v.size();
    if (v.empty()) return r;
    double sum = 0.0;
    for (double x : v) sum += x;
    r.mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return r;
}

Cohort drop_named(const Cohort& cohort, const std::vector<DropRecord>& records) {
    std::vector<std::string> names;
    names.reserve(records.size());
    for (const auto& r : records) names.push_back(r.name);
    return cohort.drop_features(names);
}

} // namespace

std::string to_string(DropReason r) {
    switch (r) {
        case DropReason::high_missing: return "high-missing";
        case DropReason::nzv: return "nzv";
        case DropReason::correlated: return "correlated";
    }
    return "nzv";
}

std::pair<Cohort, std::vector<DropRecord>> drop_high_missing(const Cohort& cohort,
                                                             double max_frac) {
    std::vector<DropRecord> dropped;
    if (cohort.empty()) return {cohort, dropped};
    const double n = static_cast<double>(cohort.size());
    for (std::size_t j = 0; j < cohort.schema().size(); ++j) {
        std::size_t missing = 0;
        for (const auto& s : cohort.samples())
            if (std::isnan(s.features[j])) ++missing;
        if (static_cast<double>(missing) / n > max_frac)
            dropped.push_back({cohort.schema().at(j).name, DropReason::high_missing});
    }
    return {drop_named(cohort, dropped), dropped};
}

std::pair<Cohort, std::size_t> drop_incomplete_rows(const Cohort& cohort) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto& f = cohort.sample(i).features;
        if (std::none_of(f.begin(), f.end(), [](double v) { return std::isnan(v); }))
            keep.push_back(i);
    }
    if (keep.empty() && !cohort.empty())
        fail("drop_incomplete_rows: every row has a missing value");
    std::size_t n_dropped = cohort.size() - keep.size();
    return {cohort.select_rows(keep), n_dropped};
}

std::pair<Cohort, std::vector<DropRecord>> nzv_filter(const Cohort& cohort,
                                                      double freq_ratio_cut,
                                                      double unique_frac_cut) {
    std::vector<DropRecord> dropped;
    if (cohort.empty()) return {cohort, dropped};
    for (std::size_t j = 0; j < cohort.schema().size(); ++j) {
        std::map<double, std::size_t> counts;
        std::size_t n = 0;
        for (const auto& s : cohort.samples()) {
            double v = s.features[j];
            if (std::isnan(v)) continue;
            ++counts[v];
            ++n;
        }
        if (n == 0) continue;
        if (counts.size() < 2) {
            dropped.push_back({cohort.schema().at(j).name, DropReason::nzv});
            continue;
        }
        std::size_t first = 0, second = 0;
        for (const auto& [v, c] : counts) {
            if (c >= first) {
                second = first;
                first = c;
            } else if (c > second) {
                second = c;
            }
        }
        double ratio = static_cast<double>(first) / static_cast<double>(second);
        double unique_frac = static_cast<double>(counts.size()) / static_cast<double>(n);
        if (ratio >= freq_ratio_cut && unique_frac < unique_frac_cut)
            dropped.push_back({cohort.schema().at(j).name, DropReason::nzv});
    }
    return {drop_named(cohort, dropped), dropped};
}

std::pair<Cohort, std::vector<DropRecord>> correlation_filter(const Cohort& cohort,
                                                              double cutoff) {
    std::vector<std::string> numeric = cohort.schema().numeric_names();
    std::vector<DropRecord> dropped;
    if (numeric.size() < 2) return {cohort, dropped};

    const std::size_t m = numeric.size();
    const std::size_t n = cohort.size();
    std::vector<std::vector<double>> cols(m, std::vector<double>(n));
    for (std::size_t j = 0; j < m; ++j) {
        std::size_t cj = *cohort.schema().index_of(numeric[j]);
        for (std::size_t i = 0; i < n; ++i) cols[j][i] = cohort.value(i, cj);
    }

    std::vector<MeanSd> stats(m);
    for (std::size_t j = 0; j < m; ++j) stats[j] = mean_sample_sd(cols[j]);

    // |r| matrix; zero-variance columns correlate with nothing.
    std::vector<std::vector<double>> r(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            if (stats[a].sd == 0.0 || stats[b].sd == 0.0) continue;
            double cov = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                cov += (cols[a][i] - stats[a].mean) * (cols[b][i] - stats[b].mean);
            cov /= static_cast<double>(n - 1);
            double rho = cov / (stats[a].sd * stats[b].sd);
            r[a][b] = r[b][a] = std::abs(rho);
        }
    }

    std::vector<bool> active(m, true);
    while (true) {
        // Maximal |r| pair among active features; ties resolved by name pair.
        double best = cutoff;
        std::ptrdiff_t pa = -1, pb = -1;
        for (std::size_t a = 0; a < m; ++a) {
            if (!active[a]) continue;
            for (std::size_t b = a + 1; b < m; ++b) {
                if (!active[b]) continue;
                if (r[a][b] > best) {
                    best = r[a][b];
                    pa = static_cast<std::ptrdiff_t>(a);
                    pb = static_cast<std::ptrdiff_t>(b);
                } else if (r[a][b] == best && pa >= 0) {
                    auto key = std::minmax(numeric[a], numeric[b]);
                    auto cur = std::minmax(numeric[pa], numeric[pb]);
                    if (key < cur) {
                        pa = static_cast<std::ptrdiff_t>(a);
                        pb = static_cast<std::ptrdiff_t>(b);
                    }
                }
            }
        }
        if (pa < 0) break;

        auto mean_abs = [&](std::size_t j) {
            double sum = 0.0;
            std::size_t k = 0;
            for (std::size_t other = 0; other < m; ++other) {
                if (!active[other] || other == j) continue;
                sum += r[j][other];
                ++k;
            }
            return k ? sum / static_cast<double>(k) : 0.0;
        };
        double ma = mean_abs(pa), mb = mean_abs(pb);
        std::size_t out;
        if (ma > mb)
            out = static_cast<std::size_t>(pa);
        else if (mb > ma)
            out = static_cast<std::size_t>(pb);
        else // tie: keep the lexicographically smaller name
            out = numeric[pa] < numeric[pb] ? static_cast<std::size_t>(pb)
                                            : static_cast<std::size_t>(pa);
        active[out] = false;
        dropped.push_back({numeric[out], DropReason::correlated});
    }

    return {drop_named(cohort, dropped), dropped};
}

std::pair<Cohort, PreprocessPipeline> fit_apply_spatial_sign(const Cohort& cohort) {
    PreprocessPipeline pipeline;
    pipeline.spatial_sign_enabled = true;
    pipeline.scaled_features = cohort.schema().numeric_names();

    for (const auto& name : pipeline.scaled_features) {
        std::size_t j = *cohort.schema().index_of(name);
        std::vector<double> v;
        v.reserve(cohort.size());
        for (const auto& s : cohort.samples()) {
            if (std::isnan(s.features[j]))
                fail("spatial sign: feature '" + name + "' has missing values");
            v.push_back(s.features[j]);
        }
        MeanSd st = mean_sample_sd(v);
        if (st.sd == 0.0)
            fail("spatial sign: feature '" + name + "' has zero SD at fit time");
        pipeline.center.push_back(st.mean);
        pipeline.scale.push_back(st.sd);
    }

    return {pipeline.apply(cohort), pipeline};
}

TValueTable TValueTable::fit(const Cohort& reference, const std::vector<std::string>& features) {
    TValueTable table;
    table.features_ = features;

    std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference.sample(i).outcome != 0) continue; // non-fracture subjects only
        const Strata& s = reference.sample(i).strata;
        strata[{s.sex, s.age_band, s.race}].push_back(i);
    }

    for (const auto& name : features) {
        auto col = reference.schema().index_of(name);
        if (!col) fail("t-value: feature '" + name + "' not in reference schema");
        for (const auto& [key, rows] : strata) {
            std::vector<double> v;
            for (std::size_t i : rows) {
                double x = reference.value(i, *col);
                if (!std::isnan(x)) v.push_back(x);
            }
            MeanSd st = mean_sample_sd(v);
            if (st.n < 2 || st.sd == 0.0) continue; // validated at lookup
            Key k{std::get<0>(key), std::get<1>(key), std::get<2>(key), name};
            table.entries_[k] = Entry{st.mean, st.sd, st.n};
        }
    }
    return table;
}

TValueTable TValueTable::restore(std::vector<std::string> features,
                                 const std::vector<std::tuple<Key, Entry>>& entries) {
    TValueTable table;
    table.features_ = std::move(features);
    for (const auto& [key, entry] : entries) table.entries_[key] = entry;
    return table;
}

const TValueTable::Entry& TValueTable::lookup(const Strata& strata,
                                              const std::string& feature) const {
    Key k{strata.sex, strata.age_band, strata.race, feature};
    auto it = entries_.find(k);
    if (it == entries_.end())
        fail("t-value: stratum " + stratum_name(strata) + " has no usable reference for '" +
             feature + "' (needs >= 2 non-fracture subjects with SD > 0)");
    return it->second;
}

Cohort apply_t_values(const Cohort& target, const TValueTable& table) {
    std::vector<std::size_t> cols;
    std::vector<std::string> names;
    for (const auto& name : table.features()) {
        auto idx = target.schema().index_of(name);
        if (!idx) continue; // feature absent from this cohort
        cols.push_back(*idx);
        names.push_back(name);
    }
    std::vector<Sample> out = target.samples();
    for (auto& s : out) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double v = s.features[cols[k]];
            if (std::isnan(v)) continue;
            const auto& e = table.lookup(s.strata, names[k]);
            s.features[cols[k]] = (v - e.mean) / e.sd;
        }
    }
    return Cohort(target.schema(), std::move(out));
}

Cohort t_value_transform(const Cohort& target, const Cohort& reference,
                         const std::vector<std::string>& features) {
    return apply_t_values(target, TValueTable::fit(reference, features));
}

Cohort PreprocessPipeline::apply(const Cohort& raw) const {
    std::vector<std::string> high_missing, nzv, correlated;
    for (const auto& d : dropped) {
        switch (d.reason) {
            case DropReason::high_missing: high_missing.push_back(d.name); break;
            case DropReason::nzv: nzv.push_back(d.name); break;
            case DropReason::correlated: correlated.push_back(d.name); break;
        }
    }

    Cohort c = raw.drop_features(high_missing);
    c = drop_incomplete_rows(c).first;
    if (t_values) c = apply_t_values(c, *t_values);
    c = c.drop_features(nzv);
    c = c.drop_features(correlated);

    std::vector<std::size_t> cols;
    cols.reserve(scaled_features.size());
    for (const auto& name : scaled_features) {
        auto idx = c.schema().index_of(name);
        if (!idx) fail("pipeline replay: scaled feature '" + name + "' missing from data");
        cols.push_back(*idx);
    }

    std::vector<Sample> out = c.samples();
    for (auto& s : out) {
        double norm_sq = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double v = s.features[cols[k]];
            if (std::isnan(v))
                fail("pipeline replay: missing value in scaled feature '" + scaled_features[k] +
                     "' for sample '" + s.id + "'");
            double z = (v - center[k]) / scale[k];
            s.features[cols[k]] = z;
            norm_sq += z * z;
        }
        if (spatial_sign_enabled && norm_sq > 0.0) {
            double norm = std::sqrt(norm_sq);
            for (std::size_t k = 0; k < cols.size(); ++k) s.features[cols[k]] /= norm;
        }
    }
    return Cohort(c.schema(), std::move(out));
}

std::pair<Cohort, PreprocessPipeline> fit_pipeline(const Cohort& cohort,
                                                   const PreprocessOptions& options) {
    auto [c1, drop_missing] = drop_high_missing(cohort, options.missing_cutoff);
    auto [c2, n_rows] = drop_incomplete_rows(c1);
    if (c2.empty()) fail("preprocess: no rows survive the missing-value filters");

    std::optional<TValueTable> table;
    Cohort c3 = c2;
    if (!options.t_value_features.empty()) {
        std::vector<std::string> present;
        for (const auto& f : options.t_value_features)
            if (c2.schema().contains(f)) present.push_back(f);
        table = TValueTable::fit(c2, present);
        c3 = apply_t_values(c2, *table);
    }

    auto [c4, drop_nzv] = nzv_filter(c3, options.nzv_freq_ratio, options.nzv_unique_frac);
    auto [c5, drop_corr] = correlation_filter(c4, options.corr_cutoff);

    PreprocessPipeline pipeline;
    if (options.spatial_sign) {
        auto [c6, scaled] = fit_apply_spatial_sign(c5);
        pipeline = std::move(scaled);
        c5 = std::move(c6);
    }
    pipeline.dropped = drop_missing;
    pipeline.dropped.insert(pipeline.dropped.end(), drop_nzv.begin(), drop_nzv.end());
    pipeline.dropped.insert(pipeline.dropped.end(), drop_corr.begin(), drop_corr.end());
    pipeline.row_drop_count = n_rows;
    pipeline.spatial_sign_enabled = options.spatial_sign;
    pipeline.t_values = std::move(table);
    return {std::move(c5), std::move(pipeline)};
}

} // namespace staged
