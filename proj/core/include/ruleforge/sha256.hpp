#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace ruleforge {

/// Incremental SHA-256 (FIPS 180-4). Self-contained so that fingerprints
/// never depend on an external crypto library version.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }

    /// Finalizes and returns the 32-byte digest. The object must be reset
    /// before reuse.
    std::array<std::uint8_t, 32> digest();

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t bit_count_;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_;
};

/// SHA-256 of a byte string as 64-char lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace ruleforge
