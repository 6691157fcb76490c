#include "scifig/util/bytes.hpp"

#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "scifig/error.hpp"

namespace scifig {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    Bytes data(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(data.data()), size)) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    return data;
}

void write_file_atomic(const fs::path& path, ByteView data) {
    static std::atomic<unsigned> counter{0};
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(tid % 100000) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::Io, "cannot create " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (!out) {
            throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot rename into " + path.string());
    }
}

void write_file_atomic(const fs::path& path, std::string_view data) {
    write_file_atomic(path, as_bytes(data));
}

std::size_t ByteSource::read_full(std::span<std::uint8_t> out) {
    std::size_t total = 0;
    while (total < out.size()) {
        const std::size_t n = read(out.subspan(total));
        if (n == 0) break;
        total += n;
    }
    return total;
}

std::size_t MemorySource::read(std::span<std::uint8_t> out) {
    const std::size_t n = std::min(out.size(), data_.size() - pos_);
    if (n > 0) {
        std::memcpy(out.data(), data_.data() + pos_, n);
        pos_ += n;
    }
    return n;
}

FileSource::FileSource(const fs::path& path) : file_(std::fopen(path.c_str(), "rb")) {
    if (file_ == nullptr) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
}

FileSource::~FileSource() {
    if (file_ != nullptr) std::fclose(file_);
}

std::size_t FileSource::read(std::span<std::uint8_t> out) {
    const std::size_t n = std::fread(out.data(), 1, out.size(), file_);
    if (n == 0 && std::ferror(file_)) {
        throw Error(ErrorKind::Io, "read failure");
    }
    return n;
}

}  // namespace scifig
