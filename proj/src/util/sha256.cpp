#include "scifig/util/sha256.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "scifig/error.hpp"

namespace scifig {

struct Sha256::State {
    EVP_MD_CTX* ctx = nullptr;
};

Sha256::Sha256() : state_(std::make_unique<State>()) {
    state_->ctx = EVP_MD_CTX_new();
    if (state_->ctx == nullptr || EVP_DigestInit_ex(state_->ctx, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("EVP sha256 init failed");
    }
}

Sha256::~Sha256() {
    EVP_MD_CTX_free(state_->ctx);
}

void Sha256::update(ByteView data) {
    EVP_DigestUpdate(state_->ctx, data.data(), data.size());
}

std::string Sha256::hex_digest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(state_->ctx, md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string sha256_hex(ByteView data) {
    Sha256 h;
    h.update(data);
    return h.hex_digest();
}

std::string sha256_hex(std::string_view data) {
    return sha256_hex(as_bytes(data));
}

std::string sha256_file(const std::filesystem::path& path) {
    FileSource src(path);
    Sha256 h;
    std::array<std::uint8_t, 1 << 16> buf{};
    while (std::size_t n = src.read(buf)) {
        h.update(ByteView(buf.data(), n));
    }
    return h.hex_digest();
}

}  // namespace scifig
