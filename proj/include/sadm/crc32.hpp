#pragma once

#include <cstddef>
#include <cstdint>

namespace sadm {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320), byte-at-a-time table.
class Crc32 {
public:
    void update(const void* data, std::size_t len);
    std::uint32_t value() const { return ~state_; }

    static std::uint32_t of(const void* data, std::size_t len) {
        Crc32 c;
        c.update(data, len);
        return c.value();
    }

private:
    std::uint32_t state_ = 0xffffffffu;
};

}  // namespace sadm
