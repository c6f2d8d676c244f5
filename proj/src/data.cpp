#include "osm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "osm/errors.hpp"
#include "osm/rng.hpp"

namespace osm {

void SyntheticConfig::validate() const {
    if (n_known < 2) throw ValidationError("n_known must be >= 2, got " + std::to_string(n_known));
    if (n_unknown_subclasses < 1)
        throw ValidationError("n_unknown_subclasses must be >= 1, got " +
                              std::to_string(n_unknown_subclasses));
    if (dim < 2) throw ValidationError("dim must be >= 2, got " + std::to_string(dim));
    if (samples_per_class < 1)
        throw ValidationError("samples_per_class must be >= 1, got " +
                              std::to_string(samples_per_class));
    if (!(unknown_ratio > 0.0 && unknown_ratio < 1.0))
        throw ValidationError("unknown_ratio must be in (0,1), got " +
                              std::to_string(unknown_ratio));
    if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be nonnegative");
    if (class_separation <= 0.0) throw ValidationError("class_separation must be positive");
    if (guard_radius_sigmas < 0.0) throw ValidationError("guard_radius_sigmas must be nonnegative");
    if (!shift_translation.empty() && static_cast<int>(shift_translation.size()) != dim)
        throw ValidationError("shift_translation must have length dim=" + std::to_string(dim) +
                              ", got " + std::to_string(shift_translation.size()));
}

namespace {

std::vector<double> blob_sample(Rng& rng, const std::vector<double>& mean, double sigma) {
    std::vector<double> x(mean.size());
    for (size_t j = 0; j < mean.size(); ++j) x[j] = rng.normal(mean[j], sigma);
    return x;
}

void apply_shift(std::vector<double>& x, double rotation, const std::vector<double>& translation) {
    double c = std::cos(rotation), s = std::sin(rotation);
    double x0 = x[0], x1 = x[1];
    x[0] = c * x0 - s * x1;
    x[1] = s * x0 + c * x1;
    if (!translation.empty())
        for (size_t j = 0; j < x.size(); ++j) x[j] += translation[j];
}

double dist2(const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (size_t j = 0; j < u.size(); ++j) {
        double d = u[j] - v[j];
        s += d * d;
    }
    return s;
}

}  // namespace

std::pair<Dataset, Dataset> generate_pair(const SyntheticConfig& config) {
    config.validate();
    const int N = config.n_known, K = config.n_unknown_subclasses, d = config.dim;
    Rng rng(config.seed);

    // Known class means on a circle in the first two dims.
    std::vector<std::vector<double>> means(N, std::vector<double>(d, 0.0));
    for (int k = 0; k < N; ++k) {
        double ang = 2.0 * M_PI * k / N;
        means[k][0] = config.class_separation * std::cos(ang);
        means[k][1] = config.class_separation * std::sin(ang);
    }
    std::vector<std::vector<double>> shifted_means = means;
    for (auto& m : shifted_means) apply_shift(m, config.shift_rotation, config.shift_translation);

    Dataset source, target;
    source.dim = target.dim = d;

    for (int k = 0; k < N; ++k)
        for (int i = 0; i < config.samples_per_class; ++i)
            source.samples.push_back({blob_sample(rng, means[k], config.noise_sigma), k,
                                      Domain::Source});

    for (int k = 0; k < N; ++k)
        for (int i = 0; i < config.samples_per_class; ++i) {
            auto x = blob_sample(rng, means[k], config.noise_sigma);
            apply_shift(x, config.shift_rotation, config.shift_translation);
            target.samples.push_back({std::move(x), k, Domain::Target});
        }

    // Unknown blob means: rejection-sampled in the class circle's plane, kept
    // outside the guard radius of every known mean in both domains.
    const double guard = config.guard_radius_sigmas * config.noise_sigma;
    const double reach = 1.3 * config.class_separation;
    std::vector<std::vector<double>> unknown_means;
    for (int u = 0; u < K; ++u) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            std::vector<double> m(d, 0.0);
            m[0] = rng.uniform(-reach, reach);
            m[1] = rng.uniform(-reach, reach);
            bool clear = true;
            for (const auto& km : means) clear = clear && dist2(m, km) > guard * guard;
            for (const auto& km : shifted_means) clear = clear && dist2(m, km) > guard * guard;
            for (const auto& um : unknown_means) clear = clear && dist2(m, um) > guard * guard;
            if (clear) {
                unknown_means.push_back(std::move(m));
                placed = true;
            }
        }
        if (!placed)
            throw RuntimeFailure(
                "generate_pair: could not place unknown blob " + std::to_string(u) +
                " outside the guard radius after 1000 attempts (config too crowded)");
    }

    const int known_total = N * config.samples_per_class;
    const double r = config.unknown_ratio;
    const int unknown_total = static_cast<int>(std::llround(known_total * r / (1.0 - r)));
    for (int i = 0; i < unknown_total; ++i) {
        int u = i % K;
        target.samples.push_back({blob_sample(rng, unknown_means[u], config.noise_sigma), N + u,
                                  Domain::Target});
    }

    return {std::move(source), std::move(target)};
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "domain,label";
    for (int j = 0; j < ds.dim; ++j) out << ",f" << j;
    out << "\n";
    char buf[64];
    for (const auto& s : ds.samples) {
        out << (s.domain == Domain::Source ? "source" : "target") << ',' << s.label;
        for (double v : s.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double_strict(const std::string& tok, int line_no) {
    if (tok.empty()) throw IoError("parse error at line " + std::to_string(line_no) +
                                   ": empty feature field");
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
        throw IoError("parse error at line " + std::to_string(line_no) +
                      ": non-numeric feature '" + tok + "'");
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError("schema error: empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "domain" || header[1] != "label")
        throw IoError("schema error: bad header in " + path);
    Dataset ds;
    ds.dim = static_cast<int>(header.size()) - 2;
    for (int j = 0; j < ds.dim; ++j)
        if (header[2 + j] != "f" + std::to_string(j))
            throw IoError("schema error: expected column f" + std::to_string(j) + " in " + path);

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != ds.dim + 2)
            throw IoError("schema error at line " + std::to_string(line_no) + ": expected " +
                          std::to_string(ds.dim + 2) + " fields, got " +
                          std::to_string(fields.size()));
        LabeledSample s;
        if (fields[0] == "source")
            s.domain = Domain::Source;
        else if (fields[0] == "target")
            s.domain = Domain::Target;
        else
            throw IoError("parse error at line " + std::to_string(line_no) + ": bad domain '" +
                          fields[0] + "'");
        try {
            size_t pos = 0;
            s.label = std::stoi(fields[1], &pos);
            if (pos != fields[1].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw IoError("parse error at line " + std::to_string(line_no) + ": bad label '" +
                          fields[1] + "'");
        }
        s.features.reserve(ds.dim);
        for (int j = 0; j < ds.dim; ++j)
            s.features.push_back(parse_double_strict(fields[2 + j], line_no));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::vector<std::vector<int>> batch_iter(int n_samples, int batch_size, uint64_t seed, int epoch) {
    if (batch_size < 2)
        throw ValidationError("batch_size must be >= 2 (batch-norm requirement), got " +
                              std::to_string(batch_size));
    std::vector<int> perm(n_samples);
    for (int i = 0; i < n_samples; ++i) perm[i] = i;
    Rng rng = Rng::for_stream(seed, static_cast<uint64_t>(epoch));
    rng.shuffle(perm);

    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n_samples; start += batch_size) {
        int end = std::min(start + batch_size, n_samples);
        if (end - start < 2) break;  // drop size-1 remainder
        batches.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return batches;
}

Matrix features_matrix(const Dataset& ds, const std::vector<int>& idx) {
    Matrix x(static_cast<int>(idx.size()), ds.dim);
    for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < ds.dim; ++j) x(static_cast<int>(i), j) = ds.samples[idx[i]].features[j];
    return x;
}

Matrix all_features(const Dataset& ds) {
    Matrix x(ds.size(), ds.dim);
    for (int i = 0; i < ds.size(); ++i)
        for (int j = 0; j < ds.dim; ++j) x(i, j) = ds.samples[i].features[j];
    return x;
}

std::vector<int> labels_at(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> y(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) y[i] = ds.samples[idx[i]].label;
    return y;
}

}  // namespace osm
