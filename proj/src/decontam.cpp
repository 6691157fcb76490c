#include "scifig/decontam.hpp"

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "scifig/error.hpp"
#include "scifig/image.hpp"
#include "scifig/util/subprocess.hpp"
#include "scifig/util/text.hpp"

namespace scifig::decontam {

Descriptor make_descriptor(std::vector<float> values) {
    double norm2 = 0.0;
    for (float v : values) norm2 += static_cast<double>(v) * v;
    if (values.empty() || !(norm2 > 0.0) || !std::isfinite(norm2)) {
        throw Error(ErrorKind::Format, "descriptor must be a finite non-zero vector");
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (float& v : values) v = static_cast<float>(v * inv);
    return Descriptor{std::move(values)};
}

float dot(const float* a, const float* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) acc += static_cast<double>(a[i]) * b[i];
    return static_cast<float>(acc);
}

namespace {

constexpr char kMagic[5] = {'S', 'F', 'D', 'X', '1'};

class Cursor {
public:
    explicit Cursor(ByteView b) : b_(b) {}

    template <typename T>
    T read() {
        T v;
        std::memcpy(&v, need(sizeof(T)), sizeof(T));
        return v;
    }
    const std::uint8_t* need(std::size_t n) {
        if (b_.size() - pos_ < n) throw Error(ErrorKind::Format, "descriptor index is truncated");
        const std::uint8_t* p = b_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool at_end() const { return pos_ == b_.size(); }

private:
    ByteView b_;
    std::size_t pos_ = 0;
};

template <typename T>
void put(Bytes& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

DescriptorIndex DescriptorIndex::build(const std::vector<std::vector<float>>& rows, std::vector<std::string> labels) {
    if (rows.empty()) throw Error(ErrorKind::Format, "descriptor index has no rows");
    if (labels.size() != rows.size()) throw Error(ErrorKind::Format, "one label per descriptor row is required");
    DescriptorIndex index;
    index.dim_ = rows.front().size();
    index.rows_.reserve(rows.size() * index.dim_);
    for (const auto& r : rows) {
        if (r.size() != index.dim_) throw Error(ErrorKind::DimMismatch, "descriptor rows differ in dimension");
        const Descriptor d = make_descriptor(r);
        index.rows_.insert(index.rows_.end(), d.values.begin(), d.values.end());
    }
    index.labels_ = std::move(labels);
    return index;
}

DescriptorIndex DescriptorIndex::parse(ByteView bytes) {
    Cursor c(bytes);
    if (std::memcmp(c.need(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorKind::Format, "bad descriptor index magic");
    }
    const auto dim = c.read<std::uint32_t>();
    const auto count = c.read<std::uint64_t>();
    if (dim == 0) throw Error(ErrorKind::Format, "descriptor dimension is zero");
    if (count == 0) throw Error(ErrorKind::Format, "descriptor index has no rows");
    if (count > bytes.size() / (static_cast<std::uint64_t>(dim) * sizeof(float))) {
        throw Error(ErrorKind::Format, "descriptor index is truncated");
    }
    std::vector<std::vector<float>> rows(count, std::vector<float>(dim));
    for (auto& r : rows) std::memcpy(r.data(), c.need(dim * sizeof(float)), dim * sizeof(float));
    std::vector<std::string> labels;
    labels.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = c.read<std::uint32_t>();
        const auto* p = c.need(len);
        labels.emplace_back(reinterpret_cast<const char*>(p), len);
    }
    if (!c.at_end()) throw Error(ErrorKind::Format, "trailing bytes after descriptor index");
    return build(rows, std::move(labels));
}

DescriptorIndex DescriptorIndex::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Bytes DescriptorIndex::serialize() const {
    Bytes out(kMagic, kMagic + sizeof kMagic);
    put(out, static_cast<std::uint32_t>(dim_));
    put(out, static_cast<std::uint64_t>(size()));
    for (float v : rows_) put(out, v);
    for (const auto& l : labels_) {
        put(out, static_cast<std::uint32_t>(l.size()));
        out.insert(out.end(), l.begin(), l.end());
    }
    return out;
}

void DescriptorIndex::write(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Match max_similarity(const Descriptor& query, const DescriptorIndex& index) {
    if (query.dim() != index.dim()) throw Error(ErrorKind::DimMismatch, "query dimension differs from index");
    Match best;
    best.score = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < index.size(); ++i) {
        const float s = dot(query.values.data(), index.row(i), index.dim());
        if (s > best.score) {
            best.score = s;
            best.row = i;
        }
    }
    best.label = index.label(best.row);
    return best;
}

std::map<std::string, float> max_similarity_per_label(const Descriptor& query, const DescriptorIndex& index) {
    if (query.dim() != index.dim()) throw Error(ErrorKind::DimMismatch, "query dimension differs from index");
    std::map<std::string, float> best;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const float s = dot(query.values.data(), index.row(i), index.dim());
        auto [it, inserted] = best.try_emplace(index.label(i), s);
        if (!inserted && s > it->second) it->second = s;
    }
    return best;
}

bool exceeds_threshold(float score, double threshold) { return score > static_cast<float>(threshold); }

FilterResult filter_pairs(const std::vector<std::optional<Descriptor>>& descriptors, const DescriptorIndex& index,
                          double threshold) {
    FilterResult res;
    res.report.threshold = threshold;
    res.report.total = descriptors.size();
    res.matches.resize(descriptors.size());
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (!descriptors[i]) {
            res.undecided.push_back(i);
            continue;
        }
        const Match m = max_similarity(*descriptors[i], index);
        res.matches[i] = m;
        if (!exceeds_threshold(m.score, threshold)) {
            res.kept.push_back(i);
            continue;
        }
        res.removed.push_back(i);
        for (const auto& [label, score] : max_similarity_per_label(*descriptors[i], index)) {
            if (exceeds_threshold(score, threshold)) ++res.report.per_eval_dataset_hits[label];
        }
    }
    res.report.removed = res.removed.size();
    res.report.undecided = res.undecided.size();
    res.report.removal_rate =
        res.report.total == 0 ? 0.0 : static_cast<double>(res.report.removed) / static_cast<double>(res.report.total);
    return res;
}

namespace {

std::vector<float> parse_vector(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(ErrorKind::Provider, "descriptor is not a JSON array");
    std::vector<float> v;
    v.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw Error(ErrorKind::Provider, "descriptor has a non-numeric component");
        v.push_back(x.get<float>());
    }
    return v;
}

Descriptor provider_descriptor(std::vector<float> v) {
    try {
        return make_descriptor(std::move(v));
    } catch (const Error& e) {
        throw Error(ErrorKind::Provider, e.what());
    }
}

}  // namespace

SidecarProvider::SidecarProvider(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open sidecar " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            vectors_[j.at("sha256").get<std::string>()] = parse_vector(j.at("vector"));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::Format, "sidecar line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

Descriptor SidecarProvider::describe(ByteView /*jpeg*/, const std::string& sha256) const {
    const auto it = vectors_.find(sha256);
    if (it == vectors_.end()) throw Error(ErrorKind::Provider, "no sidecar descriptor for " + sha256);
    return provider_descriptor(it->second);
}

std::string SidecarProvider::name() const { return "sidecar:" + path_.string(); }

ProcessProvider::ProcessProvider(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

Descriptor ProcessProvider::describe(ByteView jpeg, const std::string& /*sha256*/) const {
    std::string tmpl = (std::filesystem::temp_directory_path() / "scifig-embed-XXXXXX.jpg").string();
    const int fd = ::mkstemps(tmpl.data(), 4);
    if (fd < 0) throw Error(ErrorKind::Io, "cannot create temporary file");
    ::close(fd);
    const std::filesystem::path input = tmpl;
    struct Cleanup {
        std::filesystem::path p;
        ~Cleanup() {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    } cleanup{input};
    write_file_atomic(input, jpeg);
    const ProcessResult res = run_shell(expand_template(command_, {{"input", shell_quote(input.string())}}), timeout_, true);
    if (res.timed_out) throw Error(ErrorKind::Provider, "embedder timed out");
    if (res.exit_code != 0) throw Error(ErrorKind::Provider, "embedder exited with " + std::to_string(res.exit_code));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res.stdout_text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Provider, std::string("embedder output is not JSON: ") + e.what());
    }
    return provider_descriptor(parse_vector(j));
}

std::string ProcessProvider::name() const { return "exec:" + command_; }

std::uint64_t difference_hash(ByteView image_bytes) {
    const image::Raster img = image::decode_image(image_bytes, ingest::ImageFormat::Jpg, std::nullopt);
    constexpr int kW = 9;
    constexpr int kH = 8;
    // Area-average the luma plane onto a 9x8 grid.
    std::vector<double> grid(kW * kH, 0.0);
    std::vector<double> area(kW * kH, 0.0);
    for (int y = 0; y < img.height; ++y) {
        const double y0 = static_cast<double>(y) * kH / img.height;
        const double y1 = static_cast<double>(y + 1) * kH / img.height;
        for (int x = 0; x < img.width; ++x) {
            const double x0 = static_cast<double>(x) * kW / img.width;
            const double x1 = static_cast<double>(x + 1) * kW / img.width;
            const std::uint8_t* p = img.at(x, y);
            const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            for (int gy = static_cast<int>(y0); gy < kH && gy < y1; ++gy) {
                const double oy = std::min(y1, gy + 1.0) - std::max(y0, static_cast<double>(gy));
                if (oy <= 0) continue;
                for (int gx = static_cast<int>(x0); gx < kW && gx < x1; ++gx) {
                    const double ox = std::min(x1, gx + 1.0) - std::max(x0, static_cast<double>(gx));
                    if (ox <= 0) continue;
                    grid[gy * kW + gx] += luma * ox * oy;
                    area[gy * kW + gx] += ox * oy;
                }
            }
        }
    }
    std::uint64_t hash = 0;
    for (int y = 0; y < kH; ++y) {
        for (int x = 0; x < kW - 1; ++x) {
            const double left = grid[y * kW + x] / area[y * kW + x];
            const double right = grid[y * kW + x + 1] / area[y * kW + x + 1];
            hash = (hash << 1) | (left > right ? 1u : 0u);
        }
    }
    return hash;
}

Descriptor descriptor_from_hash(std::uint64_t hash) {
    Descriptor d;
    d.values.resize(64);
    for (int i = 0; i < 64; ++i) d.values[i] = ((hash >> (63 - i)) & 1u) ? 0.125f : -0.125f;
    return d;
}

Descriptor PhashProvider::describe(ByteView jpeg, const std::string& /*sha256*/) const {
    try {
        return descriptor_from_hash(difference_hash(jpeg));
    } catch (const Error& e) {
        throw Error(ErrorKind::Provider, e.what());
    }
}

std::unique_ptr<DescriptorProvider> make_provider(const std::string& spec) {
    if (spec == "phash") return std::make_unique<PhashProvider>();
    if (spec.rfind("sidecar:", 0) == 0 && spec.size() > 8) return std::make_unique<SidecarProvider>(spec.substr(8));
    if (spec.rfind("exec:", 0) == 0 && spec.size() > 5) return std::make_unique<ProcessProvider>(spec.substr(5));
    throw Error(ErrorKind::Config, "unknown descriptor provider '" + spec + "' (phash, sidecar:PATH, exec:COMMAND)");
}

}  // namespace scifig::decontam
