#include "flowae/flow_data.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"
#include "flowae/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace flowae {
namespace {

// Feature positions that hold counts or packet-size statistics.
bool must_be_non_negative(std::size_t i) {
    using namespace feature;
    return i != kBiDuration && i != kSrcDuration && i != kDstDuration;
}

void check_record(const FlowRecord& rec, std::size_t row, const FeatureSchema& schema) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double v = rec.features[i];
        if (!std::isfinite(v)) throw RowError(row, schema.compressible_columns[i], "value is not finite");
        if (must_be_non_negative(i) && v < 0.0) {
            throw RowError(row, schema.compressible_columns[i], "value must be >= 0");
        }
    }
}

std::vector<std::string> json_string_list(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array()) throw UsageError(std::string("schema config needs array '") + key + "'");
    return j[key].get<std::vector<std::string>>();
}

}  // namespace

void FeatureSchema::validate() const {
    if (compressible_columns.size() != kNumFeatures) {
        throw SchemaError("schema must list exactly " + std::to_string(kNumFeatures) +
                              " compressible columns, got " + std::to_string(compressible_columns.size()),
                          "");
    }
    std::set<std::string> seen;
    for (const auto& c : compressible_columns) {
        if (!seen.insert(c).second) throw SchemaError("duplicate compressible column '" + c + "'", c);
    }
    std::set<std::string> ids;
    for (const auto& c : identity_columns) {
        if (seen.count(c)) throw SchemaError("column '" + c + "' is both identity and compressible", c);
        if (!ids.insert(c).second) throw SchemaError("duplicate identity column '" + c + "'", c);
    }
    if (label_column) {
        if (seen.count(*label_column) || ids.count(*label_column)) {
            throw SchemaError("label column '" + *label_column + "' overlaps another role", *label_column);
        }
    }
}

std::optional<std::size_t> FeatureSchema::feature_index(const std::string& name) const {
    auto it = std::find(compressible_columns.begin(), compressible_columns.end(), name);
    if (it == compressible_columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - compressible_columns.begin());
}

FeatureSchema default_schema() {
    FeatureSchema s;
    s.identity_columns = {"src_ip", "dst_ip", "src_port", "dst_port", "protocol",
                          "bidirectional_first_seen_ms", "bidirectional_last_seen_ms"};
    for (const char* dir : {"bidirectional", "src2dst", "dst2src"}) {
        for (const char* m : {"duration_ms", "packets", "bytes"}) s.compressible_columns.push_back(std::string(dir) + "_" + m);
    }
    for (const char* dir : {"bidirectional", "src2dst", "dst2src"}) {
        for (const char* m : {"min_ps", "mean_ps", "stddev_ps", "max_ps"}) s.compressible_columns.push_back(std::string(dir) + "_" + m);
    }
    s.label_column = "application_name";
    return s;
}

FeatureSchema load_schema(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("invalid schema file " + path.string() + ": " + e.what());
    }
    FeatureSchema s;
    s.identity_columns = json_string_list(j, "identity_columns");
    s.compressible_columns = json_string_list(j, "compressible_columns");
    if (j.contains("label_column") && !j["label_column"].is_null()) s.label_column = j["label_column"].get<std::string>();
    s.validate();
    return s;
}

Dataset::Dataset(FeatureSchema schema, std::vector<FlowRecord> records)
    : schema_(std::move(schema)), records_(std::move(records)) {
    schema_.validate();
    std::size_t n_labeled = 0;
    for (std::size_t r = 0; r < records_.size(); ++r) {
        check_record(records_[r], r + 1, schema_);
        if (records_[r].label) ++n_labeled;
    }
    if (n_labeled != 0 && n_labeled != records_.size()) throw DataError("dataset mixes labeled and unlabeled records");
    labeled_ = !records_.empty() && n_labeled == records_.size();
    if (labeled_) {
        std::set<std::string> names;
        for (const auto& rec : records_) names.insert(*rec.label);
        class_names_.assign(names.begin(), names.end());
        std::unordered_map<std::string, int> ids;
        for (std::size_t c = 0; c < class_names_.size(); ++c) ids[class_names_[c]] = static_cast<int>(c);
        labels_.reserve(records_.size());
        for (const auto& rec : records_) labels_.push_back(ids.at(*rec.label));
    }
}

Matrix Dataset::feature_matrix() const {
    Matrix m(records_.size(), kNumFeatures);
    for (std::size_t r = 0; r < records_.size(); ++r) {
        std::copy(records_[r].features.begin(), records_[r].features.end(), m.row(r).begin());
    }
    return m;
}

Dataset parse_csv(const std::string& text, const FeatureSchema& schema) {
    schema.validate();
    std::istringstream in(text);
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw EmptyDatasetError("empty CSV: no header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    const auto header = io::split_csv_line(line);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
    auto locate = [&](const std::string& name) {
        auto it = position.find(name);
        if (it == position.end()) throw SchemaError("missing column '" + name + "'", name);
        return it->second;
    };
    std::vector<std::size_t> identity_pos, feature_pos;
    for (const auto& c : schema.identity_columns) identity_pos.push_back(locate(c));
    for (const auto& c : schema.compressible_columns) feature_pos.push_back(locate(c));
    std::optional<std::size_t> label_pos;
    if (schema.label_column) label_pos = locate(*schema.label_column);

    std::vector<FlowRecord> records;
    std::size_t row = 0;
    while (next_line()) {
        ++row;
        const auto cells = io::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw RowError(row, "", "expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        }
        FlowRecord rec;
        for (std::size_t i = 0; i < identity_pos.size(); ++i) rec.identity[schema.identity_columns[i]] = cells[identity_pos[i]];
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            if (!io::parse_double(cells[feature_pos[i]], rec.features[i])) {
                throw RowError(row, schema.compressible_columns[i], "cannot parse '" + cells[feature_pos[i]] + "' as a number");
            }
        }
        if (label_pos) {
            if (cells[*label_pos].empty()) throw RowError(row, *schema.label_column, "empty label");
            rec.label = cells[*label_pos];
        }
        check_record(rec, row, schema);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw EmptyDatasetError("CSV has a header but no data rows");
    return Dataset(schema, std::move(records));
}

Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
    if (!std::filesystem::exists(path)) throw DataError("input file not found: " + path.string());
    return parse_csv(io::read_file(path), schema);
}

std::string to_csv(const Dataset& dataset) {
    const auto& schema = dataset.schema();
    std::string out;
    bool first = true;
    auto cell = [&](std::string_view v) {
        if (!first) out.push_back(',');
        first = false;
        out += io::csv_escape(v);
    };
    for (const auto& c : schema.identity_columns) cell(c);
    for (const auto& c : schema.compressible_columns) cell(c);
    const bool with_label = schema.label_column && dataset.labeled();
    if (with_label) cell(*schema.label_column);
    out.push_back('\n');
    for (const auto& rec : dataset.records()) {
        first = true;
        for (const auto& c : schema.identity_columns) {
            auto it = rec.identity.find(c);
            cell(it == rec.identity.end() ? std::string_view{} : std::string_view{it->second});
        }
        for (double v : rec.features) cell(io::format_double(v));
        if (with_label) cell(*rec.label);
        out.push_back('\n');
    }
    return out;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
    io::write_file_atomic(path, to_csv(dataset));
}

SplitIndices stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test fraction must be in (0, 1)");
    if (!dataset.labeled()) throw DataError("stratified split needs a labeled dataset");
    const auto& names = dataset.class_names();
    std::vector<std::vector<std::size_t>> members(names.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) members[static_cast<std::size_t>(dataset.labels()[i])].push_back(i);
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (members[c].size() < 2) throw DataError("class '" + names[c] + "' has fewer than 2 records");
    }

    std::vector<std::size_t> take(names.size());
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < names.size(); ++c) {
        take[c] = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(members[c].size())));
        assigned += take[c];
    }
    const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(dataset.size())));
    std::vector<std::size_t> by_size(names.size());
    std::iota(by_size.begin(), by_size.end(), 0);
    std::stable_sort(by_size.begin(), by_size.end(),
                     [&](std::size_t a, std::size_t b) { return members[a].size() > members[b].size(); });
    for (std::size_t c : by_size) {
        if (assigned >= target) break;
        if (take[c] + 1 < members[c].size()) {
            ++take[c];
            ++assigned;
        }
    }

    SplitIndices split;
    split.seed = seed;
    for (std::size_t c = 0; c < names.size(); ++c) {
        Rng rng(mix_seed(seed, c));
        auto idx = members[c];
        rng.shuffle(idx);
        split.test.insert(split.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
        split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

SplitIndices random_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test fraction must be in (0, 1)");
    if (n < 2) throw DataError("need at least 2 records to split");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, 0xFFFF));
    rng.shuffle(idx);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    SplitIndices split;
    split.seed = seed;
    split.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

Dataset generate_synthetic(std::size_t n_per_class, const std::vector<ClassSpec>& class_specs, std::uint64_t seed) {
    using namespace feature;
    if (class_specs.size() < 2) throw UsageError("synthetic generation needs at least 2 classes");
    if (n_per_class < 1) throw UsageError("n_per_class must be at least 1");

    Rng rng(seed);
    std::vector<FlowRecord> records;
    records.reserve(n_per_class * class_specs.size());
    double clock_ms = 1.6e12;
    for (const auto& spec : class_specs) {
        for (std::size_t n = 0; n < n_per_class; ++n) {
            std::array<double, kNumFeatures> v{};
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                v[i] = std::exp(spec.features[i].location + spec.features[i].scale * rng.normal());
            }
            v[kSrcPackets] = std::max(1.0, std::round(v[kSrcPackets]));
            v[kDstPackets] = std::round(v[kDstPackets]);
            v[kSrcBytes] = std::round(v[kSrcBytes]);
            v[kDstBytes] = std::round(v[kDstBytes]);
            if (v[kDstPackets] == 0.0) {
                v[kDstBytes] = 0.0;
                v[kDstDuration] = 0.0;
                for (std::size_t k = 0; k < 4; ++k) v[kDstPs + k] = 0.0;
            }
            v[kBiPackets] = v[kSrcPackets] + v[kDstPackets];
            v[kBiBytes] = v[kSrcBytes] + v[kDstBytes];
            v[kBiDuration] = std::max({v[kBiDuration], v[kSrcDuration], v[kDstDuration]});
            for (std::size_t base : {kBiPs, kSrcPs, kDstPs}) {
                // min, mean, max sorted in place; stddev at base + 2 is already >= 0.
                std::array<double, 3> s{v[base], v[base + 1], v[base + 3]};
                std::sort(s.begin(), s.end());
                v[base] = s[0];
                v[base + 1] = s[1];
                v[base + 3] = s[2];
            }

            FlowRecord rec;
            rec.features = v;
            rec.label = spec.name;
            const auto host = rng.below(1 << 16);
            rec.identity["src_ip"] = "10.0." + std::to_string(host >> 8) + "." + std::to_string(host & 0xFF);
            rec.identity["dst_ip"] = "192.0.2." + std::to_string(rng.below(254) + 1);
            rec.identity["src_port"] = std::to_string(49152 + rng.below(16384));
            rec.identity["dst_port"] = std::to_string(rng.below(2) ? 443 : 80);
            rec.identity["protocol"] = rng.below(4) == 0 ? "17" : "6";
            clock_ms += std::floor(rng.uniform(0.0, 50.0));
            rec.identity["bidirectional_first_seen_ms"] = io::format_double(clock_ms);
            rec.identity["bidirectional_last_seen_ms"] = io::format_double(clock_ms + std::round(v[kBiDuration]));
            records.push_back(std::move(rec));
        }
    }
    rng.shuffle(records);
    return Dataset(default_schema(), std::move(records));
}

std::vector<ClassSpec> parse_synthetic_spec(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("invalid synthetic spec: ") + e.what());
    }
    if (!j.contains("classes") || !j["classes"].is_array()) throw UsageError("synthetic spec needs a 'classes' array");
    const auto schema = default_schema();
    auto read_param = [](const nlohmann::json& p) {
        return LogNormal{p.at("location").get<double>(), p.at("scale").get<double>()};
    };
    std::vector<ClassSpec> specs;
    try {
        for (const auto& c : j["classes"]) {
            ClassSpec spec;
            spec.name = c.at("name").get<std::string>();
            const bool has_default = c.contains("default");
            if (has_default) spec.features.fill(read_param(c["default"]));
            std::vector<bool> set(kNumFeatures, has_default);
            if (c.contains("features")) {
                for (const auto& [name, p] : c["features"].items()) {
                    auto idx = schema.feature_index(name);
                    if (!idx) throw UsageError("synthetic spec names unknown feature '" + name + "'");
                    spec.features[*idx] = read_param(p);
                    set[*idx] = true;
                }
            }
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                if (!set[i]) throw UsageError("class '" + spec.name + "' has no parameters for '" + schema.compressible_columns[i] + "'");
                if (spec.features[i].scale < 0.0) throw UsageError("negative scale in class '" + spec.name + "'");
            }
            specs.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("invalid synthetic spec: ") + e.what());
    }
    return specs;
}

std::vector<ClassSpec> load_synthetic_spec(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw UsageError("synthetic spec not found: " + path.string());
    return parse_synthetic_spec(io::read_file(path));
}

std::vector<ClassSpec> default_synthetic_spec(std::size_t n_classes) {
    using namespace feature;
    static const char* const kNames[] = {"TLS.Facebook", "TLS.TikTok", "HTTP", "WhatsApp", "BitTorrent"};
    std::vector<ClassSpec> specs;
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double duration = 6.0 + 1.0 * static_cast<double>(c % 5);
        const double packets = 2.0 + 0.75 * static_cast<double>((c * 2) % 5);
        const double packet_size = 5.0 + 0.5 * static_cast<double>((c * 3) % 5);
        ClassSpec s;
        s.name = c < 5 ? kNames[c] : "class_" + std::to_string(c);
        s.features[kBiDuration] = {duration + 0.1, 0.6};
        s.features[kSrcDuration] = {duration - 0.1, 0.6};
        s.features[kDstDuration] = {duration - 0.3, 0.6};
        s.features[kSrcPackets] = {packets, 0.5};
        s.features[kDstPackets] = {packets - 0.3, 0.5};
        s.features[kBiPackets] = {packets + 0.5, 0.5};
        s.features[kSrcBytes] = {packets + packet_size, 0.5};
        s.features[kDstBytes] = {packets - 0.1 + packet_size, 0.5};
        s.features[kBiBytes] = {packets + 0.5 + packet_size, 0.5};
        for (std::size_t base : {kBiPs, kSrcPs, kDstPs}) {
            s.features[base] = {packet_size - 1.5, 0.3};
            s.features[base + 1] = {packet_size, 0.2};
            s.features[base + 2] = {packet_size - 1.0, 0.3};
            s.features[base + 3] = {packet_size + 0.6, 0.2};
        }
        specs.push_back(std::move(s));
    }
    return specs;
}

}  // namespace flowae
