#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "cavicrys/coupling.hpp"
#include "cavicrys/sweeps.hpp"
#include "cavicrys/units.hpp"

namespace cavicrys {

inline constexpr const char* csv_schema_line = "# cavicrys-schema=1";

/// Shortest-faithful rendering at the configured significant digits.
inline std::string format_double(double v, int precision) {
    if (!std::isfinite(v)) return "nan";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

namespace jsondetail {

class Writer {
public:
    explicit Writer(int precision) : precision_(precision) {}

    Writer& begin_object() { return raw("{"); }
    Writer& end_object() { return raw("}"); }
    Writer& begin_array() { return raw("["); }
    Writer& end_array() { return raw("]"); }
    Writer& comma() { return raw(","); }

    Writer& key(const std::string& k) { return raw("\"" + k + "\":"); }
    Writer& value(double v) { return raw(format_double(v, precision_)); }
    Writer& value(long long v) { return raw(std::to_string(v)); }
    Writer& value(bool v) { return raw(v ? "true" : "false"); }
    Writer& value_str(const std::string& s) { return raw("\"" + s + "\""); }

    Writer& field(const std::string& k, double v) { return key(k).value(v); }
    Writer& field(const std::string& k, long long v) { return key(k).value(v); }
    Writer& field(const std::string& k, bool v) { return key(k).value(v); }
    Writer& field_str(const std::string& k, const std::string& v) {
        return key(k).value_str(v);
    }

    /// rate in rad/s plus the MHz/(2pi) companion
    Writer& rate(const std::string& stem, double rad_per_s) {
        field(stem + "_rad_per_s", rad_per_s).comma();
        return field(stem + "_mhz_over_2pi", mhz_over_2pi(rad_per_s));
    }

    const std::string& str() const { return out_; }

private:
    Writer& raw(const std::string& s) {
        out_ += s;
        return *this;
    }
    std::string out_;
    int precision_;
};

}  // namespace jsondetail

inline std::string coupling_result_json(const CouplingResult& r, int precision) {
    jsondetail::Writer w(precision);
    w.begin_object();
    w.field("g_squared_rad2_per_s2", r.g_squared).comma();
    w.rate("g_rate", r.g_rate).comma();
    w.field("est_rel_error", r.est_rel_error).comma();
    w.field_str("method", to_string(r.method_used)).comma();
    w.field("evaluations", r.evaluations);
    w.end_object();
    return w.str() + "\n";
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records,
                            int precision) {
    os << csv_schema_line << "\n";
    os << "sweep_value,mode,raw_G_squared,normalized_value,est_rel_error\n";
    for (const SweepRecord& rec : records) {
        os << format_double(rec.sweep_value, precision) << ',' << rec.mode.label() << ','
           << format_double(rec.raw_g_squared, precision) << ',';
        if (rec.normalized_value) os << format_double(*rec.normalized_value, precision);
        os << ',' << format_double(rec.est_rel_error, precision) << "\n";
    }
}

inline std::string sweep_records_json(const std::vector<SweepRecord>& records,
                                      int precision) {
    jsondetail::Writer w(precision);
    w.begin_object().field_str("schema", "cavicrys-1").comma().key("records").begin_array();
    bool first = true;
    for (const SweepRecord& rec : records) {
        if (!first) w.comma();
        first = false;
        w.begin_object();
        w.field("sweep_value", rec.sweep_value).comma();
        w.field_str("mode", rec.mode.label()).comma();
        w.field("raw_G_squared", rec.raw_g_squared).comma();
        if (rec.normalized_value) w.field("normalized_value", *rec.normalized_value).comma();
        w.field("est_rel_error", rec.est_rel_error).comma();
        w.field("converged", rec.converged);
        w.end_object();
    }
    w.end_array().end_object();
    return w.str() + "\n";
}

inline void write_detuning_csv(std::ostream& os, const DetuningSweepResult& result,
                               const ProbePhysics& ph, int precision) {
    os << csv_schema_line << "\n";
    os << "delta_rad_per_s,delta_mhz_over_2pi,mode,broadening_rad_per_s,"
          "broadening_mhz_over_2pi,sigma_rad_per_s\n";
    for (const DetuningPoint& pt : result.points) {
        os << format_double(pt.delta, precision) << ','
           << format_double(mhz_over_2pi(pt.delta), precision) << ',' << pt.mode.label()
           << ',' << format_double(pt.broadening, precision) << ','
           << format_double(mhz_over_2pi(pt.broadening), precision) << ','
           << format_double(pt.sigma, precision) << "\n";
    }
    for (const DetuningModeResult& m : result.modes) {
        os << "# fit mode=" << m.mode.label()
           << " G_rad_per_s=" << format_double(m.fit.g_rate, precision)
           << " G_mhz_over_2pi=" << format_double(mhz_over_2pi(m.fit.g_rate), precision)
           << " gamma_rad_per_s=" << format_double(m.fit.gamma_fit, precision)
           << " optical_depth="
           << format_double(m.fit.g_rate * m.fit.g_rate / (ph.kappa * m.fit.gamma_fit),
                            precision)
           << "\n";
    }
}

inline std::string detuning_result_json(const DetuningSweepResult& result,
                                        const ProbePhysics& ph, int precision) {
    jsondetail::Writer w(precision);
    w.begin_object().field_str("schema", "cavicrys-1").comma();
    w.key("points").begin_array();
    bool first = true;
    for (const DetuningPoint& pt : result.points) {
        if (!first) w.comma();
        first = false;
        w.begin_object();
        w.rate("delta", pt.delta).comma();
        w.field_str("mode", pt.mode.label()).comma();
        w.rate("broadening", pt.broadening).comma();
        w.rate("sigma", pt.sigma);
        w.end_object();
    }
    w.end_array().comma().key("fits").begin_array();
    first = true;
    for (const DetuningModeResult& m : result.modes) {
        if (!first) w.comma();
        first = false;
        double od = m.fit.g_rate * m.fit.g_rate / (ph.kappa * m.fit.gamma_fit);
        w.begin_object();
        w.field_str("mode", m.mode.label()).comma();
        w.rate("G", m.fit.g_rate).comma();
        w.rate("G_se", m.fit.g_rate_se).comma();
        w.rate("gamma", m.fit.gamma_fit).comma();
        w.rate("gamma_se", m.fit.gamma_se).comma();
        w.field("optical_depth", od).comma();
        w.field("residual_norm", m.fit.residual_norm).comma();
        w.field("consistency_warning", m.fit.consistency_warning).comma();
        w.rate("G_model", m.coupling.g_rate);
        w.end_object();
    }
    w.end_array().end_object();
    return w.str() + "\n";
}

}  // namespace cavicrys
