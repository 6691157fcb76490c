#include "scifig/fetch.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <curl/curl.h>

#include <json.hpp>

#include "scifig/error.hpp"
#include "scifig/ingest.hpp"
#include "scifig/util/sha256.hpp"
#include "scifig/util/text.hpp"

namespace scifig::fetch {

namespace fs = std::filesystem;

std::string_view to_string(FetchStatus status) {
    switch (status) {
        case FetchStatus::Ok: return "OK";
        case FetchStatus::ChecksumMismatch: return "ChecksumMismatch";
        case FetchStatus::TransportError: return "TransportError";
        case FetchStatus::Exhausted: return "Exhausted";
    }
    return "";
}

std::vector<AcquisitionEntry> read_acquisition_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open acquisition manifest " + path.string());
    std::vector<AcquisitionEntry> entries;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        AcquisitionEntry e;
        try {
            const auto j = nlohmann::json::parse(line);
            e.uri = j.at("uri").get<std::string>();
            e.dest = j.at("dest").get<std::string>();
            if (const auto it = j.find("sha256"); it != j.end() && !it->is_null()) {
                e.expected_sha256 = to_lower_ascii(it->get<std::string>());
            }
            if (const auto it = j.find("size_bytes"); it != j.end() && !it->is_null()) {
                e.size_bytes = it->get<std::uint64_t>();
            }
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorKind::Format, where + ": " + ex.what());
        }
        const auto normalized = ingest::normalize_member_path(e.dest);
        if (!normalized || normalized->empty()) throw Error(ErrorKind::Config, where + ": dest escapes the output directory");
        e.dest = *normalized;
        if (!seen.insert(e.dest).second) throw Error(ErrorKind::Config, where + ": duplicate dest " + e.dest);
        entries.push_back(std::move(e));
    }
    return entries;
}

namespace {

enum class AttemptOutcome { Complete, Retryable, Fatal };

struct Attempt {
    AttemptOutcome outcome = AttemptOutcome::Complete;
    std::uint64_t bytes = 0;
    std::string message;
};

std::uint64_t file_size_or_zero(const fs::path& p) {
    std::error_code ec;
    const auto n = fs::file_size(p, ec);
    return ec ? 0 : n;
}

bool is_http(std::string_view uri) { return uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0; }

fs::path local_source(const std::string& uri, const fs::path& base) {
    fs::path p = uri.rfind("file://", 0) == 0 ? fs::path(uri.substr(7)) : fs::path(uri);
    return p.is_absolute() ? p : base / p;
}

Attempt copy_local(const fs::path& src, const fs::path& part) {
    Attempt a;
    std::ifstream in(src, std::ios::binary);
    if (!in) return {AttemptOutcome::Fatal, 0, "cannot open " + src.string()};
    const std::uint64_t total = file_size_or_zero(src);
    std::uint64_t offset = file_size_or_zero(part);
    if (offset > total) {
        fs::remove(part);
        offset = 0;
    }
    std::ofstream out(part, std::ios::binary | std::ios::app);
    if (!out) return {AttemptOutcome::Fatal, 0, "cannot write " + part.string()};
    in.seekg(static_cast<std::streamoff>(offset));
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got <= 0) break;
        out.write(buf.data(), got);
        a.bytes += static_cast<std::uint64_t>(got);
    }
    out.flush();
    if (!out) return {AttemptOutcome::Retryable, a.bytes, "write failed"};
    return a;
}

struct HttpSink {
    std::FILE* file = nullptr;
    fs::path part;
    std::uint64_t offset = 0;
    long status = 0;
    bool decided = false;
    bool failed = false;
    std::uint64_t bytes = 0;
    CURL* curl = nullptr;
};

std::size_t http_write(char* ptr, std::size_t size, std::size_t n, void* user) {
    auto* sink = static_cast<HttpSink*>(user);
    const std::size_t len = size * n;
    if (!sink->decided) {
        sink->decided = true;
        curl_easy_getinfo(sink->curl, CURLINFO_RESPONSE_CODE, &sink->status);
        if (sink->status >= 400) {
            sink->failed = true;
            return 0;
        }
        // A 200 to a ranged request carries the whole body; start over.
        const bool append = sink->offset > 0 && sink->status == 206;
        sink->file = std::fopen(sink->part.c_str(), append ? "ab" : "wb");
        if (sink->file == nullptr) return 0;
    }
    if (sink->file == nullptr) return 0;
    const std::size_t wrote = std::fwrite(ptr, 1, len, sink->file);
    sink->bytes += wrote;
    return wrote;
}

Attempt download_http(const std::string& url, const fs::path& part, const FetchOptions& opt) {
    HttpSink sink;
    sink.part = part;
    sink.offset = file_size_or_zero(part);
    CURL* curl = curl_easy_init();
    if (curl == nullptr) return {AttemptOutcome::Retryable, 0, "curl init failed"};
    sink.curl = curl;
    char err[CURL_ERROR_SIZE] = {0};
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_NOSIGNAL, 1L);
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, static_cast<long>(opt.connect_timeout.count()));
    curl_easy_setopt(curl, CURLOPT_LOW_SPEED_LIMIT, 1L);
    curl_easy_setopt(curl, CURLOPT_LOW_SPEED_TIME, 60L);
    curl_easy_setopt(curl, CURLOPT_ERRORBUFFER, err);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, http_write);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &sink);
    if (sink.offset > 0) curl_easy_setopt(curl, CURLOPT_RESUME_FROM_LARGE, static_cast<curl_off_t>(sink.offset));
    const CURLcode rc = curl_easy_perform(curl);
    long status = 0;
    curl_easy_getinfo(curl, CURLINFO_RESPONSE_CODE, &status);
    curl_easy_cleanup(curl);
    if (sink.file != nullptr) std::fclose(sink.file);

    if (rc == CURLE_RANGE_ERROR && sink.offset > 0) {
        // libcurl refuses a 200 answer to a ranged request; fetch it whole.
        std::error_code ec;
        fs::remove(part, ec);
        return download_http(url, part, opt);
    }
    Attempt a;
    a.bytes = sink.bytes;
    if (status == 416 && sink.offset > 0) {
        // Nothing left past our offset: the .part already holds the body.
        return a;
    }
    if (rc == CURLE_OK && status >= 200 && status < 300) {
        if (!sink.decided) {
            // Empty body: make sure the part file exists.
            if (std::FILE* f = std::fopen(part.c_str(), sink.offset > 0 && status == 206 ? "ab" : "wb")) std::fclose(f);
        }
        return a;
    }
    if (status >= 400) {
        const bool transient = status == 408 || status == 429 || status >= 500;
        a.outcome = transient ? AttemptOutcome::Retryable : AttemptOutcome::Fatal;
        a.message = "HTTP " + std::to_string(status);
        return a;
    }
    a.outcome = AttemptOutcome::Retryable;
    a.message = err[0] != '\0' ? std::string(err) : std::string(curl_easy_strerror(rc));
    return a;
}

void quarantine(const fs::path& from, const fs::path& final_path) {
    std::error_code ec;
    fs::rename(from, fs::path(final_path.string() + ".bad"), ec);
}

FetchResult fetch_one(const AcquisitionEntry& e, const fs::path& out_dir, const FetchOptions& opt) {
    FetchResult r;
    r.dest = e.dest;
    r.uri = e.uri;
    const fs::path final_path = out_dir / e.dest;
    const fs::path part = fs::path(final_path.string() + ".part");
    std::error_code ec;
    fs::create_directories(final_path.parent_path(), ec);

    if (fs::exists(final_path)) {
        const std::string have = sha256_file(final_path);
        if (!e.expected_sha256 || have == *e.expected_sha256) {
            r.sha256 = have;
            r.message = "already present";
            return r;
        }
        quarantine(final_path, final_path);
    }

    auto delay = opt.initial_backoff;
    for (int attempt = 1; attempt <= std::max(1, opt.attempts); ++attempt) {
        r.attempts = attempt;
        Attempt a;
        try {
            a = is_http(e.uri) ? download_http(e.uri, part, opt) : copy_local(local_source(e.uri, opt.base_dir), part);
        } catch (const std::exception& ex) {
            a = {AttemptOutcome::Retryable, 0, ex.what()};
        }
        r.bytes_transferred += a.bytes;
        if (a.outcome == AttemptOutcome::Fatal) {
            r.status = FetchStatus::TransportError;
            r.message = a.message;
            return r;
        }
        if (a.outcome == AttemptOutcome::Complete) {
            const std::string have = sha256_file(part);
            r.sha256 = have;
            const bool size_ok = !e.size_bytes || file_size_or_zero(part) == *e.size_bytes;
            if (!size_ok || (e.expected_sha256 && have != *e.expected_sha256)) {
                quarantine(part, final_path);
                r.status = FetchStatus::ChecksumMismatch;
                r.message = size_ok ? "sha256 " + have + " != expected " + *e.expected_sha256 : "size mismatch";
                return r;
            }
            fs::rename(part, final_path, ec);
            if (ec) {
                r.status = FetchStatus::TransportError;
                r.message = "rename failed: " + ec.message();
                return r;
            }
            r.status = FetchStatus::Ok;
            r.message.clear();
            return r;
        }
        r.message = a.message;
        if (attempt < opt.attempts) {
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * opt.backoff_factor));
        }
    }
    r.status = FetchStatus::Exhausted;
    return r;
}

}  // namespace

std::vector<FetchResult> fetch_all(const std::vector<AcquisitionEntry>& entries, const fs::path& out_dir,
                                   const FetchOptions& options) {
    static std::once_flag curl_once;
    std::call_once(curl_once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<FetchResult> results(entries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            results[i] = fetch_one(entries[i], out_dir, options);
        }
    };
    const int n = std::clamp(options.parallelism, 1, static_cast<int>(std::max<std::size_t>(1, entries.size())));
    std::vector<std::thread> threads;
    for (int t = 1; t < n; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    return results;
}

void write_fetch_report(const std::vector<FetchResult>& results, const fs::path& path) {
    std::string text;
    for (const auto& r : results) {
        nlohmann::ordered_json j;
        j["dest"] = r.dest;
        j["uri"] = r.uri;
        j["status"] = to_string(r.status);
        j["attempts"] = r.attempts;
        j["bytes_transferred"] = r.bytes_transferred;
        j["sha256"] = r.sha256 ? nlohmann::ordered_json(*r.sha256) : nlohmann::ordered_json(nullptr);
        j["message"] = r.message;
        text += j.dump() + "\n";
    }
    write_file_atomic(path, text);
}

}  // namespace scifig::fetch
