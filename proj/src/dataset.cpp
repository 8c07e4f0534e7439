#include "qdelay/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csv.hpp"

namespace qdelay {

Dataset::Dataset(std::size_t h) : h_(h) {}

Dataset::Dataset(std::size_t h, std::vector<Sample> samples) : h_(h) {
    samples_.reserve(samples.size());
    for (auto& s : samples) push_back(std::move(s));
}

void Dataset::push_back(Sample s) {
    if (s.features.size() != h_) {
        throw std::invalid_argument("Dataset: sample has " + std::to_string(s.features.size()) + " features, expected " +
                                    std::to_string(h_));
    }
    if (!samples_.empty() && s.arrival_time < samples_.back().arrival_time) {
        throw std::invalid_argument("Dataset: samples must be in chronological order");
    }
    samples_.push_back(std::move(s));
}

std::vector<double> Dataset::labels() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.label);
    return out;
}

Dataset extract(const SimOutput& sim, std::size_t h) {
    if (h < 1) throw std::invalid_argument("extract: h must be >= 1");

    // Customers in the order they entered service.
    std::vector<const CustomerRecord*> by_entry(sim.records.size());
    for (const auto& r : sim.records) {
        if (r.entered_service_rank >= by_entry.size()) throw std::invalid_argument("extract: service rank out of range");
        by_entry[r.entered_service_rank] = &r;
    }
    std::vector<double> entry_times(by_entry.size());
    for (std::size_t i = 0; i < by_entry.size(); ++i) entry_times[i] = by_entry[i]->service_start;

    Dataset d(h);
    for (const auto& r : sim.records) {
        if (r.warmup || !(r.wait > 0.0)) continue;
        // Customers that entered service strictly before this arrival.
        const auto seen = static_cast<std::size_t>(
            std::lower_bound(entry_times.begin(), entry_times.end(), r.arrival_time) - entry_times.begin());
        if (seen < h) continue;
        Sample s;
        s.features.resize(h);
        for (std::size_t i = 0; i < h; ++i) s.features[i] = by_entry[seen - 1 - i]->wait;
        s.label = r.wait;
        s.arrival_time = r.arrival_time;
        s.hol = r.hol;
        d.push_back(std::move(s));
    }
    return d;
}

std::pair<Dataset, Dataset> split_chronological(const Dataset& d, std::size_t n_train, std::size_t n_test) {
    if (n_train + n_test > d.size()) {
        throw std::invalid_argument("split_chronological: need " + std::to_string(n_train + n_test) + " samples, dataset has " +
                                    std::to_string(d.size()));
    }
    const auto& all = d.samples();
    std::vector<Sample> train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Sample> test(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                             all.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
    return {Dataset(d.h(), std::move(train)), Dataset(d.h(), std::move(test))};
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.h() != b.h()) throw std::invalid_argument("concat: datasets differ in h");
    Dataset out(a.h());
    for (const auto& s : a.samples()) out.push_back(s);
    for (const auto& s : b.samples()) out.push_back(s);
    return out;
}

void Standardizer::apply_inplace(std::span<double> features) const {
    if (features.size() != mean.size()) throw std::invalid_argument("Standardizer: feature width mismatch");
    for (std::size_t i = 0; i < features.size(); ++i) features[i] = (features[i] - mean[i]) / std[i];
}

std::vector<double> Standardizer::apply(std::span<const double> features) const {
    std::vector<double> out(features.begin(), features.end());
    apply_inplace(out);
    return out;
}

std::vector<double> Standardizer::invert(std::span<const double> features) const {
    if (features.size() != mean.size()) throw std::invalid_argument("Standardizer: feature width mismatch");
    std::vector<double> out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) out[i] = features[i] * std[i] + mean[i];
    return out;
}

Standardizer Standardizer::identity(std::size_t width) {
    return Standardizer{std::vector<double>(width, 0.0), std::vector<double>(width, 1.0), std::vector<bool>(width, false)};
}

Standardizer fit_standardizer(const Dataset& train) {
    if (train.empty()) throw std::invalid_argument("fit_standardizer: training set is empty");
    const std::size_t h = train.h();
    const double n = static_cast<double>(train.size());
    Standardizer s{std::vector<double>(h, 0.0), std::vector<double>(h, 0.0), std::vector<bool>(h, false)};
    for (const auto& sample : train.samples())
        for (std::size_t i = 0; i < h; ++i) s.mean[i] += sample.features[i];
    for (auto& m : s.mean) m /= n;
    for (const auto& sample : train.samples())
        for (std::size_t i = 0; i < h; ++i) {
            const double dev = sample.features[i] - s.mean[i];
            s.std[i] += dev * dev;
        }
    for (std::size_t i = 0; i < h; ++i) {
        s.std[i] = std::sqrt(s.std[i] / n);
        if (!(s.std[i] > 0.0)) {
            s.std[i] = 1.0;
            s.degenerate[i] = true;
        }
    }
    return s;
}

namespace {

Dataset transform(const Dataset& d, const auto& fn) {
    std::vector<Sample> out = d.samples();
    for (auto& s : out) s.features = fn(s.features);
    return Dataset(d.h(), std::move(out));
}

}  // namespace

Dataset apply(const Standardizer& s, const Dataset& d) {
    return transform(d, [&](const std::vector<double>& f) { return s.apply(f); });
}

Dataset invert(const Standardizer& s, const Dataset& d) {
    return transform(d, [&](const std::vector<double>& f) { return s.invert(f); });
}

void to_json(nlohmann::json& j, const Standardizer& s) {
    j = {{"mean", s.mean}, {"std", s.std}};
}

void from_json(const nlohmann::json& j, Standardizer& s) {
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    if (s.mean.size() != s.std.size()) throw FormatError("standardizer: mean and std differ in length");
    s.degenerate.assign(s.mean.size(), false);
    for (double v : s.std)
        if (!(v > 0.0)) throw FormatError("standardizer: std entries must be > 0");
}

void write_csv(const Dataset& d, const std::string& path) {
    csv::Writer w(path);
    std::string header = "arrival_time";
    for (std::size_t i = 1; i <= d.h(); ++i) header += ",w" + std::to_string(i);
    header += ",label";
    w.line(header);
    for (const auto& s : d.samples()) {
        std::string text = csv::format_number(s.arrival_time);
        for (double f : s.features) {
            text += ',';
            text += csv::format_number(f);
        }
        text += ',';
        text += csv::format_number(s.label);
        w.line(text);
    }
    w.close();
}

Dataset read_csv(const std::string& path, std::size_t expected_h) {
    csv::Reader reader(path);
    const auto& header = reader.header();
    if (header.size() < 3) {
        throw FormatError(path + ":1: expected at least 3 columns (arrival_time,w1,...,label), found " +
                          std::to_string(header.size()));
    }
    const std::size_t h = header.size() - 2;
    if (expected_h != 0 && h != expected_h) {
        throw FormatError(path + ":1: expected " + std::to_string(expected_h + 2) + " columns for h=" +
                          std::to_string(expected_h) + ", found " + std::to_string(header.size()));
    }
    std::vector<std::string> columns{"arrival_time"};
    for (std::size_t i = 1; i <= h; ++i) columns.push_back("w" + std::to_string(i));
    columns.push_back("label");
    reader.expect_header(columns);

    Dataset d(h);
    std::vector<double> fields;
    while (reader.next(fields)) {
        Sample s;
        s.arrival_time = fields.front();
        s.features.assign(fields.begin() + 1, fields.end() - 1);
        s.label = fields.back();
        try {
            d.push_back(std::move(s));
        } catch (const std::invalid_argument& e) {
            throw FormatError(reader.where() + ": " + e.what());
        }
    }
    return d;
}

}  // namespace qdelay
