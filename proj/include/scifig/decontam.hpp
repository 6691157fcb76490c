#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scifig/util/bytes.hpp"

namespace scifig::decontam {

inline constexpr double kDefaultThreshold = 0.604169;

// Unit-norm float vector.
struct Descriptor {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
};

// Normalizes `values` to unit L2 norm. Throws Error(Format) for an empty
// or all-zero vector.
Descriptor make_descriptor(std::vector<float> values);

// Dot product accumulated in double, rounded to float.
float dot(const float* a, const float* b, std::size_t dim);

// Evaluation-set descriptors, one label (dataset name) per row.
//
// File layout, little-endian:
//   "SFDX1" | u32 dim | u64 count | count*dim f32 | count * (u32 len, label bytes)
class DescriptorIndex {
public:
    // Throws Error(DimMismatch) when rows differ in length, Error(Format) for
    // zero rows, a zero-norm row or a label count mismatch.
    static DescriptorIndex build(const std::vector<std::vector<float>>& rows, std::vector<std::string> labels);
    static DescriptorIndex parse(ByteView bytes);
    static DescriptorIndex load(const std::filesystem::path& path);

    Bytes serialize() const;
    void write(const std::filesystem::path& path) const;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return labels_.size(); }
    const float* row(std::size_t i) const { return rows_.data() + i * dim_; }
    const std::string& label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const { return labels_; }

private:
    std::size_t dim_ = 0;
    std::vector<float> rows_;
    std::vector<std::string> labels_;
};

struct Match {
    float score = 0.0f;
    std::size_t row = 0;  // lowest index among ties
    std::string label;
};

// Throws Error(DimMismatch) when the query dimension differs.
Match max_similarity(const Descriptor& query, const DescriptorIndex& index);

// Best score per evaluation dataset label.
std::map<std::string, float> max_similarity_per_label(const Descriptor& query, const DescriptorIndex& index);

// Removal test, made in single precision so that a score equal to the
// threshold's float value is kept.
bool exceeds_threshold(float score, double threshold);

struct DecontamReport {
    std::size_t total = 0;
    std::size_t removed = 0;
    std::size_t undecided = 0;
    double removal_rate = 0.0;  // removed / total; 0 when total is 0
    std::map<std::string, std::size_t> per_eval_dataset_hits;
    double threshold = kDefaultThreshold;
    std::string provider;
    bool provider_paper_faithful = false;
    std::string similarity_input = "normalized JPEG (max side 512)";
};

struct FilterResult {
    std::vector<std::size_t> kept;       // input positions, in input order
    std::vector<std::size_t> removed;
    std::vector<std::size_t> undecided;  // no descriptor available
    std::vector<std::optional<Match>> matches;
    DecontamReport report;
};

// Partitions items by their best score against `index`. An absent
// descriptor marks an item the provider could not describe.
FilterResult filter_pairs(const std::vector<std::optional<Descriptor>>& descriptors, const DescriptorIndex& index,
                          double threshold = kDefaultThreshold);

// Turns normalized image bytes into a descriptor. Throws Error(Provider).
class DescriptorProvider {
public:
    virtual ~DescriptorProvider() = default;
    virtual Descriptor describe(ByteView jpeg, const std::string& sha256) const = 0;
    virtual std::string name() const = 0;
    virtual bool paper_faithful() const = 0;
};

// JSONL rows {"sha256": hex, "vector": [floats]} keyed by image content hash.
class SidecarProvider final : public DescriptorProvider {
public:
    explicit SidecarProvider(const std::filesystem::path& path);
    Descriptor describe(ByteView jpeg, const std::string& sha256) const override;
    std::string name() const override;
    bool paper_faithful() const override { return true; }

private:
    std::filesystem::path path_;
    std::map<std::string, std::vector<float>> vectors_;
};

// Runs a shell command per image; {input} is the image path and the command
// prints a JSON array of numbers on stdout.
class ProcessProvider final : public DescriptorProvider {
public:
    explicit ProcessProvider(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(120));
    Descriptor describe(ByteView jpeg, const std::string& sha256) const override;
    std::string name() const override;
    bool paper_faithful() const override { return true; }

private:
    std::string command_;
    std::chrono::milliseconds timeout_;
};

// 64-bit difference hash over a 9x8 grayscale reduction; bit i becomes
// component i with value +1/8 or -1/8. Not the learned descriptor the
// threshold was tuned for.
class PhashProvider final : public DescriptorProvider {
public:
    Descriptor describe(ByteView jpeg, const std::string& sha256) const override;
    std::string name() const override { return "phash"; }
    bool paper_faithful() const override { return false; }
};

std::uint64_t difference_hash(ByteView image_bytes);
Descriptor descriptor_from_hash(std::uint64_t hash);

// "phash", "sidecar:PATH" or "exec:COMMAND". Throws Error(Config).
std::unique_ptr<DescriptorProvider> make_provider(const std::string& spec);

}  // namespace scifig::decontam
