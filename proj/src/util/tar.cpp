#include "scifig/util/tar.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include "scifig/error.hpp"

namespace scifig {

namespace {

constexpr std::size_t kBlock = 512;

std::uint64_t parse_octal(const std::uint8_t* field, std::size_t len) {
    // GNU base-256 extension for large sizes.
    if ((field[0] & 0x80) != 0) {
        std::uint64_t v = field[0] & 0x7F;
        for (std::size_t i = 1; i < len; ++i) v = (v << 8) | field[i];
        return v;
    }
    std::uint64_t v = 0;
    std::size_t i = 0;
    while (i < len && (field[i] == ' ' || field[i] == 0)) ++i;
    for (; i < len && field[i] >= '0' && field[i] <= '7'; ++i) {
        v = v * 8 + static_cast<std::uint64_t>(field[i] - '0');
    }
    return v;
}

std::string field_string(const std::uint8_t* field, std::size_t len) {
    const auto* end = std::find(field, field + len, 0);
    return std::string(reinterpret_cast<const char*>(field), static_cast<std::size_t>(end - field));
}

bool is_zero_block(const std::uint8_t* block) {
    return std::all_of(block, block + kBlock, [](std::uint8_t b) { return b == 0; });
}

bool checksum_ok(const std::uint8_t* block) {
    const std::uint64_t stored = parse_octal(block + 148, 8);
    std::uint64_t unsigned_sum = 0;
    std::int64_t signed_sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
        const std::uint8_t b = (i >= 148 && i < 156) ? ' ' : block[i];
        unsigned_sum += b;
        signed_sum += static_cast<std::int8_t>(b);
    }
    return stored == unsigned_sum || static_cast<std::int64_t>(stored) == signed_sum;
}

// Parses "len key=value\n" records of a pax extended header.
std::optional<std::string> pax_path(const Bytes& payload) {
    std::string_view s = as_chars(payload);
    std::optional<std::string> path;
    while (!s.empty()) {
        const auto sp = s.find(' ');
        if (sp == std::string_view::npos) break;
        std::size_t len = 0;
        for (char c : s.substr(0, sp)) {
            if (c < '0' || c > '9') return path;
            len = len * 10 + static_cast<std::size_t>(c - '0');
        }
        if (len == 0 || len > s.size()) break;
        std::string_view rec = s.substr(sp + 1, len - sp - 1);
        if (!rec.empty() && rec.back() == '\n') rec.remove_suffix(1);
        const auto eq = rec.find('=');
        if (eq != std::string_view::npos && rec.substr(0, eq) == "path") {
            path = std::string(rec.substr(eq + 1));
        }
        s.remove_prefix(len);
    }
    return path;
}

}  // namespace

bool looks_like_tar(ByteView data) {
    if (data.size() < kBlock) return false;
    if (is_zero_block(data.data())) {
        return data.size() >= 2 * kBlock && is_zero_block(data.data() + kBlock);
    }
    return checksum_ok(data.data());
}

bool TarReader::read_block(std::uint8_t* block) {
    const std::size_t n = source_.read_full(std::span<std::uint8_t>(block, kBlock));
    if (n == 0) return false;
    if (n != kBlock) throw Error(ErrorKind::Tar, "truncated tar header");
    return true;
}

Bytes TarReader::read_payload(std::uint64_t size) {
    Bytes data(static_cast<std::size_t>(size));
    if (source_.read_full(data) != data.size()) {
        throw Error(ErrorKind::Tar, "truncated tar entry");
    }
    const std::size_t pad = static_cast<std::size_t>((kBlock - size % kBlock) % kBlock);
    if (pad > 0) {
        std::array<std::uint8_t, kBlock> scratch{};
        if (source_.read_full(std::span<std::uint8_t>(scratch.data(), pad)) != pad) {
            throw Error(ErrorKind::Tar, "truncated tar padding");
        }
    }
    return data;
}

std::optional<TarEntry> TarReader::next() {
    if (done_) return std::nullopt;
    std::array<std::uint8_t, kBlock> block{};
    std::optional<std::string> long_name;
    for (;;) {
        if (!read_block(block.data())) {
            // EOF on a block boundary without the zero-block trailer; tolerated.
            done_ = true;
            return std::nullopt;
        }
        if (is_zero_block(block.data())) {
            done_ = true;
            return std::nullopt;
        }
        if (!checksum_ok(block.data())) {
            throw Error(ErrorKind::Tar, "bad tar header checksum");
        }
        const char typeflag = static_cast<char>(block[156]);
        const std::uint64_t size = parse_octal(block.data() + 124, 12);

        if (typeflag == 'L') {
            Bytes payload = read_payload(size);
            long_name = field_string(payload.data(), payload.size());
            continue;
        }
        if (typeflag == 'x' || typeflag == 'g') {
            Bytes payload = read_payload(size);
            if (typeflag == 'x') {
                if (auto p = pax_path(payload)) long_name = std::move(*p);
            }
            continue;
        }

        TarEntry entry;
        if (long_name) {
            entry.name = std::move(*long_name);
        } else {
            std::string name = field_string(block.data(), 100);
            const bool ustar = std::memcmp(block.data() + 257, "ustar", 5) == 0;
            if (ustar) {
                std::string prefix = field_string(block.data() + 345, 155);
                if (!prefix.empty()) name = prefix + "/" + name;
            }
            entry.name = std::move(name);
        }
        switch (typeflag) {
            case '0':
            case '\0':
            case '7':
                entry.type = TarEntryType::Regular;
                break;
            case '5':
                entry.type = TarEntryType::Directory;
                break;
            case '2':
                entry.type = TarEntryType::Symlink;
                break;
            case '1':
                entry.type = TarEntryType::Hardlink;
                break;
            default:
                entry.type = TarEntryType::Other;
                break;
        }
        // Links and directories carry no payload even if size is set.
        const bool has_payload = entry.type == TarEntryType::Regular || entry.type == TarEntryType::Other;
        entry.size = has_payload ? size : 0;
        if (has_payload) {
            Bytes payload = read_payload(size);
            if (entry.type == TarEntryType::Regular) entry.data = std::move(payload);
        }
        return entry;
    }
}

namespace {

void write_octal(char* field, std::size_t len, std::uint64_t value) {
    // len-1 digits plus NUL terminator.
    std::string digits(len - 1, '0');
    for (std::size_t i = len - 1; i-- > 0;) {
        digits[i] = static_cast<char>('0' + (value & 7));
        value >>= 3;
    }
    std::memcpy(field, digits.data(), len - 1);
    field[len - 1] = 0;
}

void write_padding(std::ostream& out, std::uint64_t size) {
    static const std::array<char, kBlock> zeros{};
    const std::size_t pad = static_cast<std::size_t>((kBlock - size % kBlock) % kBlock);
    out.write(zeros.data(), static_cast<std::streamsize>(pad));
}

std::array<char, kBlock> make_header(const std::string& name, char typeflag, std::uint64_t size,
                                     const std::string& link) {
    std::array<char, kBlock> h{};
    std::memcpy(h.data(), name.data(), std::min<std::size_t>(name.size(), 100));
    write_octal(h.data() + 100, 8, typeflag == '5' ? 0755 : 0644);
    write_octal(h.data() + 108, 8, 0);
    write_octal(h.data() + 116, 8, 0);
    write_octal(h.data() + 124, 12, size);
    write_octal(h.data() + 136, 12, 0);
    h[156] = typeflag;
    std::memcpy(h.data() + 157, link.data(), std::min<std::size_t>(link.size(), 100));
    std::memcpy(h.data() + 257, "ustar", 6);
    std::memcpy(h.data() + 263, "00", 2);
    std::memset(h.data() + 148, ' ', 8);
    unsigned sum = 0;
    for (char c : h) sum += static_cast<unsigned char>(c);
    write_octal(h.data() + 148, 7, sum);
    h[155] = ' ';
    return h;
}

}  // namespace

void TarWriter::write_long_name(const std::string& name) {
    const std::string payload = name + '\0';
    auto h = make_header("././@LongLink", 'L', payload.size(), {});
    out_.write(h.data(), kBlock);
    out_.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    write_padding(out_, payload.size());
}

void TarWriter::add_entry(const std::string& name, TarEntryType type, ByteView data, const std::string& link) {
    if (name.size() > 100) write_long_name(name);
    char flag = '0';
    switch (type) {
        case TarEntryType::Directory: flag = '5'; break;
        case TarEntryType::Symlink: flag = '2'; break;
        case TarEntryType::Hardlink: flag = '1'; break;
        case TarEntryType::Regular: flag = '0'; break;
        case TarEntryType::Other: flag = '3'; break;
    }
    const std::uint64_t size = (type == TarEntryType::Regular) ? data.size() : 0;
    auto h = make_header(name, flag, size, link);
    out_.write(h.data(), kBlock);
    if (size > 0) {
        out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(size));
        write_padding(out_, size);
    }
    if (!out_) throw Error(ErrorKind::Io, "tar write failed");
}

void TarWriter::add_file(const std::string& name, ByteView data) {
    add_entry(name, TarEntryType::Regular, data);
}

void TarWriter::finish() {
    if (finished_) return;
    static const std::array<char, 2 * kBlock> zeros{};
    out_.write(zeros.data(), zeros.size());
    out_.flush();
    if (!out_) throw Error(ErrorKind::Io, "tar write failed");
    finished_ = true;
}

}  // namespace scifig
