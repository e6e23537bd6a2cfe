#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>

namespace pondstat {

/// Read-only memory mapping of a whole file. Pages are loaded lazily by the
/// OS, so mapping a file larger than RAM is fine; nothing is copied.
class MappedFile {
public:
    explicit MappedFile(const std::filesystem::path& path);
    ~MappedFile();

    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;

    [[nodiscard]] std::string_view bytes() const noexcept {
        return {static_cast<const char*>(data_), size_};
    }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }

private:
    void* data_ = nullptr;
    std::size_t size_ = 0;
};

} // namespace pondstat
