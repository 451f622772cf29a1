#pragma once

// NDJSON report records. Non-finite numbers are written as the strings
// "inf", "-inf" and "nan".

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "flowatlas/core.hpp"
#include "flowatlas/verify.hpp"

namespace flowatlas {

using Record = nlohmann::ordered_json;

Record json_number(double v);
Record json_state(std::span<const double> x);
Record json_sample(const SamplePoint& p);

Record condition_record(const ConditionReport& r);
Record value_record(std::span<const double> x);
Record interval_record(const EscapeInterval& j);
Record error_record(const std::string& error, const std::string& message);

// One object per line, written in call order.
class ReportWriter
{
public:
    ReportWriter(std::ostream& os, bool timestamps);

    // {"kind":"run", ...} header; carries the timestamp unless disabled.
    void header(const std::string& command, const std::string& source, std::uint64_t seed);
    void write(const Record& r);

private:
    std::ostream& os_;
    bool timestamps_;
};

} // namespace flowatlas
