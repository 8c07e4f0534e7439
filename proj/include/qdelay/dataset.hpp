#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qdelay/simulator.hpp"

namespace qdelay {

/// One supervised example: the waits of the last h customers to enter service
/// before this arrival (most recent first) and this customer's own wait.
struct Sample {
    std::vector<double> features;
    double label = 0.0;
    double arrival_time = 0.0;
    /// HOL delay seen at arrival. NaN when unknown (e.g. loaded from CSV).
    double hol = std::numeric_limits<double>::quiet_NaN();
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t h);
    Dataset(std::size_t h, std::vector<Sample> samples);

    std::size_t h() const noexcept { return h_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }

    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }

    void push_back(Sample s);

    std::vector<double> labels() const;

private:
    std::size_t h_ = 0;
    std::vector<Sample> samples_;
};

/// One sample per post-warmup delayed customer with at least h customers in
/// service history at its arrival instant.
Dataset extract(const SimOutput& sim, std::size_t h);

/// First n_train samples, then the next n_test.
std::pair<Dataset, Dataset> split_chronological(const Dataset& d, std::size_t n_train, std::size_t n_test);

/// Samples of `a` followed by those of `b`; both must share h.
Dataset concat(const Dataset& a, const Dataset& b);

/// Per-feature z-scoring fitted on training data. Labels are never touched.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;
    /// Features whose training std was zero; their std is stored as 1.
    std::vector<bool> degenerate;

    std::size_t width() const noexcept { return mean.size(); }

    void apply_inplace(std::span<double> features) const;
    std::vector<double> apply(std::span<const double> features) const;
    std::vector<double> invert(std::span<const double> features) const;

    /// Identity transform for the given width.
    static Standardizer identity(std::size_t width);
};

Standardizer fit_standardizer(const Dataset& train);
Dataset apply(const Standardizer& s, const Dataset& d);
Dataset invert(const Standardizer& s, const Dataset& d);

void to_json(nlohmann::json& j, const Standardizer& s);
void from_json(const nlohmann::json& j, Standardizer& s);

/// Dataset CSV: arrival_time,w1,...,w{h},label
void write_csv(const Dataset& d, const std::string& path);

/// Reads a dataset CSV. When `expected_h` is nonzero the header must carry
/// exactly that many feature columns.
Dataset read_csv(const std::string& path, std::size_t expected_h = 0);

}  // namespace qdelay
