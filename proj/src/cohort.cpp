#include "stagedrisk/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace staged {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool is_missing_token(const std::string& tok) { return tok.empty() || tok == "NA"; }

double parse_numeric(const std::string& tok, const std::string& column, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) fail("");
        return v;
    } catch (...) {
        fail("parse error: non-numeric value '" + tok + "' in column '" + column +
             "' at line " + std::to_string(line_no));
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::numeric: return "numeric";
        case FeatureKind::binary: return "binary";
        case FeatureKind::categorical: return "categorical";
    }
    return "numeric";
}

std::string to_string(StageTag t) {
    return t == StageTag::clinical ? "clinical" : "imaging";
}

FeatureKind feature_kind_from_string(std::string_view s) {
    if (s == "numeric") return FeatureKind::numeric;
    if (s == "binary") return FeatureKind::binary;
    if (s == "categorical") return FeatureKind::categorical;
    fail("unknown feature kind '" + std::string(s) + "'");
}

StageTag stage_tag_from_string(std::string_view s) {
    if (s == "clinical") return StageTag::clinical;
    if (s == "imaging") return StageTag::imaging;
    fail("unknown stage tag '" + std::string(s) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name.empty()) fail("schema: empty feature name");
        auto [it, inserted] = index_.emplace(entries_[i].name, i);
        (void)it;
        if (!inserted) fail("schema: duplicate feature name '" + entries_[i].name + "'");
    }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

std::vector<std::string> FeatureSchema::names_with(StageTag tag) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (e.stage == tag) out.push_back(e.name);
    return out;
}

std::vector<std::string> FeatureSchema::numeric_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
        if (e.kind == FeatureKind::numeric) out.push_back(e.name);
    return out;
}

FeatureSchema FeatureSchema::subset(const std::vector<std::string>& keep) const {
    std::vector<FeatureSpec> kept;
    for (const auto& e : entries_)
        if (std::find(keep.begin(), keep.end(), e.name) != keep.end()) kept.push_back(e);
    return FeatureSchema(std::move(kept));
}

Cohort::Cohort(FeatureSchema schema, std::vector<Sample> samples)
    : schema_(std::move(schema)), samples_(std::move(samples)) {
    for (const auto& s : samples_) {
        if (s.features.size() != schema_.size())
            fail("cohort: sample '" + s.id + "' has " + std::to_string(s.features.size()) +
                 " features, schema has " + std::to_string(schema_.size()));
        if (s.outcome != 0 && s.outcome != 1)
            fail("cohort: sample '" + s.id + "' outcome must be 0 or 1");
        if (s.outcome == 1)
            ++positives_;
        else
            ++negatives_;
    }
}

std::vector<int> Cohort::labels() const {
    std::vector<int> y;
    y.reserve(samples_.size());
    for (const auto& s : samples_) y.push_back(s.outcome);
    return y;
}

Cohort Cohort::select_rows(const std::vector<std::size_t>& rows) const {
    std::vector<Sample> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(samples_.at(r));
    return Cohort(schema_, std::move(out));
}

Cohort Cohort::keep_features(const std::vector<std::string>& keep) const {
    FeatureSchema sub = schema_.subset(keep);
    std::vector<std::size_t> cols;
    cols.reserve(sub.size());
    for (const auto& e : sub.entries()) cols.push_back(*schema_.index_of(e.name));
    std::vector<Sample> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) {
        Sample t;
        t.id = s.id;
        t.outcome = s.outcome;
        t.strata = s.strata;
        t.features.reserve(cols.size());
        for (std::size_t c : cols) t.features.push_back(s.features[c]);
        out.push_back(std::move(t));
    }
    return Cohort(std::move(sub), std::move(out));
}

Cohort Cohort::drop_features(const std::vector<std::string>& drop) const {
    std::vector<std::string> keep;
    for (const auto& e : schema_.entries())
        if (std::find(drop.begin(), drop.end(), e.name) == drop.end()) keep.push_back(e.name);
    return keep_features(keep);
}

LoadResult load_cohort(const std::filesystem::path& path, const FeatureSchema& schema,
                       const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) fail("'" + path.string() + "': missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);

    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

    auto col_index = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        if (name.empty()) return std::nullopt;
        auto it = col.find(name);
        if (it == col.end()) {
            if (required) fail("'" + path.string() + "': column '" + name + "' not found");
            return std::nullopt;
        }
        return it->second;
    };

    auto outcome_idx = col_index(options.outcome_col, true);
    auto id_idx = col_index(options.id_col, true);
    auto sex_idx = col_index(options.sex_col, true);
    auto age_idx = col_index(options.age_col, true);
    auto band_idx = col_index(options.age_band_col, true);
    auto race_idx = col_index(options.race_col, true);

    std::vector<std::size_t> feature_idx(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const std::string& name = schema.at(i).name;
        if (name == options.outcome_col)
            fail("'" + path.string() + "': outcome column '" + name + "' listed as a feature");
        feature_idx[i] = *col_index(name, true);
    }

    auto band_label = [&](double age) -> std::string {
        for (const auto& [lo, hi] : options.age_bands)
            if (age >= lo && age <= hi)
                return format_double(lo) + "-" + format_double(hi);
        return "other";
    };

    std::vector<Sample> samples;
    std::size_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            fail("parse error at line " + std::to_string(line_no) + ": expected " +
                 std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));

        const std::string& outcome_tok = fields[*outcome_idx];
        if (is_missing_token(outcome_tok)) {
            ++dropped;
            continue;
        }
        double o = parse_numeric(outcome_tok, options.outcome_col, line_no);
        if (o != 0.0 && o != 1.0)
            fail("parse error: outcome value '" + outcome_tok + "' at line " +
                 std::to_string(line_no) + " is not 0/1");

        Sample s;
        s.outcome = static_cast<int>(o);
        s.id = id_idx ? fields[*id_idx] : std::to_string(line_no - 1);
        if (sex_idx) s.strata.sex = fields[*sex_idx];
        if (race_idx) s.strata.race = fields[*race_idx];
        if (band_idx)
            s.strata.age_band = fields[*band_idx];
        else if (age_idx) {
            const std::string& tok = fields[*age_idx];
            if (!is_missing_token(tok))
                s.strata.age_band = band_label(parse_numeric(tok, options.age_col, line_no));
        }

        s.features.reserve(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const std::string& tok = fields[feature_idx[i]];
            if (is_missing_token(tok)) {
                s.features.push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                s.features.push_back(parse_numeric(tok, schema.at(i).name, line_no));
            }
        }
        samples.push_back(std::move(s));
    }

    return LoadResult{Cohort(schema, std::move(samples)), dropped};
}

void write_cohort_csv(const Cohort& cohort, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write '" + path.string() + "'");
    out << "id,sex,age_band,race";
    for (const auto& e : cohort.schema().entries()) out << ',' << e.name;
    out << ",outcome\n";
    for (const auto& s : cohort.samples()) {
        out << s.id << ',' << s.strata.sex << ',' << s.strata.age_band << ',' << s.strata.race;
        for (double v : s.features) {
            out << ',';
            if (std::isnan(v))
                out << "NA";
            else
                out << format_double(v);
        }
        out << ',' << s.outcome << '\n';
    }
    if (!out) fail("write failed for '" + path.string() + "'");
}

std::pair<Cohort, Cohort> stratified_split(const Cohort& cohort, double train_frac,
                                           std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) fail("stratified_split: train_frac must be in (0,1)");
    if (cohort.positives() < 2 || cohort.negatives() < 2)
        fail("stratified_split: need at least 2 samples of each class");

    RngStream rng = RngStream(seed).child(0x51);
    std::vector<std::size_t> train_rows, test_rows;
    for (int cls : {1, 0}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < cohort.size(); ++i)
            if (cohort.sample(i).outcome == cls) idx.push_back(i);
        // Fisher-Yates
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        // round(count * frac), ties toward train
        auto n_train = static_cast<std::size_t>(
            std::floor(static_cast<double>(idx.size()) * train_frac + 0.5));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? train_rows : test_rows).push_back(idx[i]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {cohort.select_rows(train_rows), cohort.select_rows(test_rows)};
}

std::vector<std::size_t> bootstrap_indices(const std::vector<int>& labels, RngStream& rng) {
    const std::size_t n = labels.size();
    if (n == 0) fail("bootstrap: empty cohort");
    std::vector<std::size_t> idx(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = rng.uniform_index(n);
            (labels[idx[i]] == 1 ? pos : neg) = true;
        }
        if (pos && neg) return idx;
    }
    fail("bootstrap: resample degenerate (single class) after 100 redraws");
}

Cohort bootstrap_resample(const Cohort& cohort, RngStream& rng) {
    std::vector<int> y = cohort.labels();
    return cohort.select_rows(bootstrap_indices(y, rng));
}

Cohort generate_synthetic(const SyntheticSpec& spec) {
    if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0))
        fail("synthetic: prevalence must be in (0,1)");
    if (!(spec.borderline_lo < spec.borderline_hi))
        fail("synthetic: borderline band must have lo < hi");
    if (spec.n == 0) fail("synthetic: n must be positive");

    std::vector<FeatureSpec> entries;
    for (const auto& [name, coef] : spec.clinical_effects) {
        (void)coef;
        entries.push_back({name, FeatureKind::numeric, StageTag::clinical});
    }
    for (const auto& [name, coef] : spec.imaging_effects) {
        (void)coef;
        entries.push_back({name, FeatureKind::numeric, StageTag::imaging});
    }
    FeatureSchema schema{entries};

    const std::size_t n_clin = spec.clinical_effects.size();
    const std::size_t n_img = spec.imaging_effects.size();

    RngStream rng = RngStream(spec.seed).child(0xc07);
    std::vector<Sample> samples(spec.n);
    std::vector<double> score(spec.n);
    std::vector<double> u(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Sample& s = samples[i];
        char buf[24];
        std::snprintf(buf, sizeof(buf), "s%06zu", i + 1);
        s.id = buf;
        s.features.resize(schema.size());
        double clin = 0.0;
        for (std::size_t j = 0; j < n_clin; ++j) {
            double x = rng.normal();
            s.features[j] = x;
            clin += spec.clinical_effects[j].second * x;
        }
        double img = 0.0;
        for (std::size_t j = 0; j < n_img; ++j) {
            double x = rng.normal();
            s.features[n_clin + j] = x;
            img += spec.imaging_effects[j].second * x;
        }
        bool in_band = clin >= spec.borderline_lo && clin <= spec.borderline_hi;
        score[i] = clin + (in_band ? img : 0.0);
        u[i] = rng.uniform01();
    }

    auto count_at = [&](double offset) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < spec.n; ++i) {
            double p = 1.0 / (1.0 + std::exp(-(score[i] + offset)));
            if (u[i] < p) ++c;
        }
        return c;
    };

    const double target = static_cast<double>(spec.n) * spec.prevalence;
    const auto target_count = static_cast<std::size_t>(std::llround(target));

    double lo = -40.0, hi = 40.0;
    if (count_at(lo) > target_count || count_at(hi) < target_count)
        fail("synthetic: cannot bracket target prevalence by intercept search");
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (count_at(mid) < target_count)
            lo = mid;
        else
            hi = mid;
    }
    const double offset = hi;
    const std::size_t achieved = count_at(offset);
    if (std::abs(static_cast<double>(achieved) - target) > 0.10 * target)
        fail("synthetic: intercept search missed target prevalence (achieved " +
             std::to_string(achieved) + " positives, target " + std::to_string(target_count) + ")");

    for (std::size_t i = 0; i < spec.n; ++i) {
        double p = 1.0 / (1.0 + std::exp(-(score[i] + offset)));
        samples[i].outcome = u[i] < p ? 1 : 0;
    }
    return Cohort(std::move(schema), std::move(samples));
}

} // namespace staged
