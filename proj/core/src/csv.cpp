#include "icins/csv.hpp"

#include <cstdio>

#include "icins/error.hpp"

namespace icins {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const Manifest& m, const std::vector<std::string>& columns)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(columns.size()) {
    if (!out_) throw Error("cannot open '" + path + "' for writing");
    out_ << "# icins " << m.version << "\n";
    out_ << "# config_hash " << m.config_hash << "\n";
    out_ << "# seed " << m.seed << "\n";
    out_ << "# command " << m.command << "\n";
    row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error("csv row width mismatch in '" + path_ + "'");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
}

void CsvWriter::close() {
    if (!out_.is_open()) return;
    out_.flush();
    const bool ok = static_cast<bool>(out_);
    out_.close();
    if (!ok) throw Error("write to '" + path_ + "' failed");
}

CsvWriter::~CsvWriter() {
    if (out_.is_open()) out_.close();
}

}  // namespace icins
