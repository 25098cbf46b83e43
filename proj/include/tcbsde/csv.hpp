#pragma once

#include <ostream>
#include <string>

namespace tcbsde {

/// Formats with 17 significant digits and '.' decimal separator, so a value
/// round-trips exactly and reruns produce byte-identical artifacts.
std::string format_double(double x);

class CsvWriter {
  public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void field(double x) {
        sep();
        out_ << format_double(x);
    }
    void field(long long x) {
        sep();
        out_ << x;
    }
    void raw_field(const std::string& s) {
        sep();
        out_ << s;
    }
    /// Writes a prebuilt fragment (e.g. a header prefix) without separator logic.
    void raw(const std::string& s) {
        out_ << s;
        first_ = false;
    }
    void end_row() {
        out_ << '\n';
        first_ = true;
    }

  private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }
    std::ostream& out_;
    bool first_ = true;
};

}  // namespace tcbsde
