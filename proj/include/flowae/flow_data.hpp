#pragma once

#include "flowae/matrix.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowae {

inline constexpr std::size_t kNumFeatures = 21;

/// Column roles of a flow table.
///
/// Identity columns (addresses, ports, protocol, timestamps) are carried
/// through untouched. The compressible columns are the fixed, ordered
/// feature vector the autoencoder sees.
struct FeatureSchema {
    std::vector<std::string> identity_columns;
    std::vector<std::string> compressible_columns;
    std::optional<std::string> label_column;

    /// Throws SchemaError if the column roles are inconsistent.
    void validate() const;
    std::optional<std::size_t> feature_index(const std::string& name) const;
};

/// 3 directions x {duration_ms, packets, bytes}, then 3 directions x {min, mean, stddev, max}_ps.
FeatureSchema default_schema();

/// Reads {"identity_columns": [...], "compressible_columns": [...], "label_column": "..."}.
FeatureSchema load_schema(const std::filesystem::path& path);

namespace feature {
// Positions in the default ordering.
inline constexpr std::size_t kBiDuration = 0, kBiPackets = 1, kBiBytes = 2;
inline constexpr std::size_t kSrcDuration = 3, kSrcPackets = 4, kSrcBytes = 5;
inline constexpr std::size_t kDstDuration = 6, kDstPackets = 7, kDstBytes = 8;
/// First of {min, mean, stddev, max} for each direction.
inline constexpr std::size_t kBiPs = 9, kSrcPs = 13, kDstPs = 17;
}  // namespace feature

struct FlowRecord {
    std::map<std::string, std::string> identity;
    std::array<double, kNumFeatures> features{};
    std::optional<std::string> label;
};

class Dataset {
public:
    Dataset() = default;
    Dataset(FeatureSchema schema, std::vector<FlowRecord> records);

    const FeatureSchema& schema() const { return schema_; }
    const std::vector<FlowRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    /// N x 21 copy of the feature values in schema order.
    Matrix feature_matrix() const;
    bool labeled() const { return labeled_; }
    /// Class ids indexing class_names(); empty when unlabeled.
    const std::vector<int>& labels() const { return labels_; }
    /// Distinct labels, sorted.
    const std::vector<std::string>& class_names() const { return class_names_; }

private:
    FeatureSchema schema_;
    std::vector<FlowRecord> records_;
    std::vector<int> labels_;
    std::vector<std::string> class_names_;
    bool labeled_ = false;
};

/// Header-driven CSV ingestion. Extra columns are ignored.
Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
Dataset parse_csv(const std::string& text, const FeatureSchema& schema);

/// Header is identity columns, compressible columns, then the label column.
std::string to_csv(const Dataset& dataset);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

/// Per-class seeded shuffle, then prefix take. Each class contributes
/// floor(fraction * n_c) test rows; the shortfall against round(fraction * N)
/// goes one row each to the largest classes. Index lists are returned sorted.
SplitIndices stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// Seeded split without stratification, for unlabeled data.
SplitIndices random_split(std::size_t n, double test_fraction, std::uint64_t seed);

/// Log-normal marginal: value = exp(location + scale * N(0, 1)).
struct LogNormal {
    double location = 0.0;
    double scale = 0.0;
};

struct ClassSpec {
    std::string name;
    std::array<LogNormal, kNumFeatures> features{};
};

/// Draws n_per_class flows per class, then enforces flow consistency:
/// integral counts, bidirectional = src2dst + dst2src for packets and bytes,
/// bidirectional duration covers both directions, min <= mean <= max per direction.
/// Feature values are laid out in default_schema() order.
Dataset generate_synthetic(std::size_t n_per_class, const std::vector<ClassSpec>& class_specs, std::uint64_t seed);

/// Reads {"classes": [{"name": ..., "default": {location, scale}, "features": {column: {location, scale}}}]}.
std::vector<ClassSpec> load_synthetic_spec(const std::filesystem::path& path);
std::vector<ClassSpec> parse_synthetic_spec(const std::string& json_text);

/// Built-in spec of `n_classes` traffic classes with separated volume and packet-size profiles.
std::vector<ClassSpec> default_synthetic_spec(std::size_t n_classes = 5);

}  // namespace flowae
