#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace icins {

/// Provenance written at the top of every output file.
struct Manifest {
    std::string version;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string command;
};

/// %.17g, the round-trip representation used in every output.
std::string format_number(double v);

/// CSV file with '#'-prefixed manifest lines followed by a header row.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const Manifest& manifest, const std::vector<std::string>& columns);

    void row(const std::vector<std::string>& cells);
    /// Finishes the file; throws Error if any write failed.
    void close();
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

private:
    std::string path_;
    std::ofstream out_;
    std::size_t columns_ = 0;
};

}  // namespace icins
