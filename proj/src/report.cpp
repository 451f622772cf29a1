#include "flowatlas/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>

namespace flowatlas {

Record json_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

Record json_state(std::span<const double> x)
{
    Record arr = Record::array();
    for (double v : x)
        arr.push_back(json_number(v));
    return arr;
}

Record json_sample(const SamplePoint& p)
{
    Record r = Record::object();
    if (p.tau)
        r["tau"] = json_number(*p.tau);
    if (p.sigma)
        r["sigma"] = json_number(*p.sigma);
    if (p.rho)
        r["rho"] = json_number(*p.rho);
    r["a"] = json_state(p.a);
    return r;
}

Record condition_record(const ConditionReport& c)
{
    Record r;
    r["kind"] = "condition";
    r["name"] = c.name;
    r["max_residual"] = json_number(c.max_residual);
    r["worst_case"] = c.worst_case ? json_sample(*c.worst_case) : Record(nullptr);
    r["tolerance"] = json_number(c.tolerance);
    r["samples_checked"] = c.samples_checked;
    r["samples_skipped"] = c.samples_skipped;
    r["pass"] = c.pass;
    if (!c.note.empty())
        r["note"] = c.note;
    return r;
}

Record value_record(std::span<const double> x)
{
    Record r;
    r["kind"] = "value";
    r["value"] = json_state(x);
    return r;
}

Record interval_record(const EscapeInterval& j)
{
    Record r;
    r["kind"] = "interval";
    r["lower"] = json_number(j.lower);
    r["upper"] = json_number(j.upper);
    r["lower_kind"] = to_string(j.lower_kind);
    r["upper_kind"] = to_string(j.upper_kind);
    return r;
}

Record error_record(const std::string& error, const std::string& message)
{
    Record r;
    r["kind"] = "error";
    r["error"] = error;
    r["message"] = message;
    return r;
}

ReportWriter::ReportWriter(std::ostream& os, bool timestamps) : os_(os), timestamps_(timestamps) {}

void ReportWriter::header(const std::string& command, const std::string& source, std::uint64_t seed)
{
    Record r;
    r["kind"] = "run";
    r["command"] = command;
    r["source"] = source;
    r["seed"] = seed;
    if (timestamps_) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        r["timestamp"] = buf;
    }
    write(r);
}

void ReportWriter::write(const Record& r)
{
    os_ << r.dump() << '\n';
    os_.flush();
}

} // namespace flowatlas
