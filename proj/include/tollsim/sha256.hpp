#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tollsim {

using Digest = std::array<uint8_t, 32>;

// FIPS 180-4 SHA-256. Compact incremental implementation; verified against
// the NIST test vectors in the unit tests.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, size_t len);
    Digest finish();

    static Digest hash(const void* data, size_t len) {
        Sha256 h;
        h.update(data, len);
        return h.finish();
    }
    static Digest hash(const std::vector<uint8_t>& bytes) { return hash(bytes.data(), bytes.size()); }
    static Digest hash(std::string_view text) { return hash(text.data(), text.size()); }

private:
    void process_block(const uint8_t* block);

    uint32_t state_[8];
    uint64_t bit_count_;
    uint8_t buffer_[64];
    size_t buffer_len_;
};

std::string to_hex(const Digest& d);
std::optional<Digest> digest_from_hex(std::string_view hex);

constexpr Digest zero_digest() { return Digest{}; }

}  // namespace tollsim
