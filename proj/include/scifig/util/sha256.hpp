#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "scifig/util/bytes.hpp"

namespace scifig {

// Incremental SHA-256, hex-encoded lowercase output.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(ByteView data);
    std::string hex_digest();

private:
    struct State;
    std::unique_ptr<State> state_;
};

std::string sha256_hex(ByteView data);
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace scifig
