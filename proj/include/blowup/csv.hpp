#pragma once

// Deterministic text output: doubles at 17 significant digits (round-trip
// exact), LF line endings, and atomic replace via a temp file in the target
// directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace blowup {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open " + tmp.string() +
                                     " for writing");
        out << content;
        if (!out.flush())
            throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

class CsvBuilder {
public:
    explicit CsvBuilder(const std::string& header) {
        body_ = header;
        body_ += '\n';
    }

    CsvBuilder& cell(const std::string& s) {
        if (!first_) body_ += ',';
        body_ += s;
        first_ = false;
        return *this;
    }
    CsvBuilder& cell(double v) { return cell(format_double(v)); }
    CsvBuilder& cell(long v) { return cell(std::to_string(v)); }
    CsvBuilder& cell(int v) { return cell(std::to_string(v)); }
    CsvBuilder& endrow() {
        body_ += '\n';
        first_ = true;
        return *this;
    }

    const std::string& str() const { return body_; }

private:
    std::string body_;
    bool first_ = true;
};

} // namespace blowup
