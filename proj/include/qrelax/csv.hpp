#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrelax::csv {

// 17 significant digits round-trips doubles exactly.
inline std::string format_double(double x) {
    std::ostringstream oss;
    oss << std::setprecision(17) << x;
    return oss.str();
}

// Minimal CSV emitter: header row, '.' decimal separator, no quoting (the
// schemas contain no commas).
class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw std::runtime_error("csv: cannot open " + path.string());
    }

    void header(const std::vector<std::string>& names) { line(names); }

    void line(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    class Row {
    public:
        explicit Row(Writer& writer) : writer_(writer) {}
        Row& add(double x) { return add_raw(format_double(x)); }
        Row& add(int x) { return add_raw(std::to_string(x)); }
        Row& add(long x) { return add_raw(std::to_string(x)); }
        Row& add(const std::string& s) { return add_raw(s); }
        ~Row() { writer_.out_ << '\n'; }
        Row(const Row&) = delete;
        Row& operator=(const Row&) = delete;

    private:
        Row& add_raw(const std::string& s) {
            if (count_++) writer_.out_ << ',';
            writer_.out_ << s;
            return *this;
        }
        Writer& writer_;
        int count_ = 0;
    };

    Row row() { return Row(*this); }

private:
    std::ofstream out_;
};

} // namespace qrelax::csv
