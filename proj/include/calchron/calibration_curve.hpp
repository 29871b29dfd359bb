#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "calchron/error.hpp"

namespace calchron {

/// One row of a calibration curve: calendar age (cal BP), radiocarbon age
/// mu (BP) and the one-sigma curve uncertainty gamma (BP).
struct CurveKnot {
    double cal_age = 0.0;
    double c14_age = 0.0;
    double curve_sd = 0.0;
};

/// Interpolated curve value at a calendar age.
struct CurvePoint {
    double mu = 0.0;
    double gamma = 0.0;
};

/// Piecewise-linear calibration curve over calendar age. Immutable after
/// construction; safe to share across threads.
class CalibrationCurve {
public:
    /// Builds a curve from knots in any order. Sorts ascending by cal_age and
    /// validates: >= 2 knots, no duplicate cal_age, curve_sd >= 0, finite values.
    static CalibrationCurve from_knots(std::vector<CurveKnot> knots, std::string name) {
        CalibrationCurve c;
        c.name_ = std::move(name);
        c.knots_ = std::move(knots);
        for (const CurveKnot& k : c.knots_) {
            if (!std::isfinite(k.cal_age) || !std::isfinite(k.c14_age) || !std::isfinite(k.curve_sd))
                throw Error(errc::malformed_row, "non-finite knot value in curve '" + c.name_ + "'");
            if (k.curve_sd < 0.0)
                throw Error(errc::negative_sigma,
                            "curve standard deviation must be >= 0 (cal age " + std::to_string(k.cal_age) + ")");
        }
        std::stable_sort(c.knots_.begin(), c.knots_.end(),
                         [](const CurveKnot& a, const CurveKnot& b) { return a.cal_age < b.cal_age; });
        for (std::size_t i = 1; i < c.knots_.size(); ++i) {
            if (c.knots_[i].cal_age == c.knots_[i - 1].cal_age)
                throw Error(errc::duplicate_cal_age,
                            "duplicate calendar age " + std::to_string(c.knots_[i].cal_age));
        }
        if (c.knots_.size() < 2)
            throw Error(errc::too_few_knots, "calibration curve needs at least 2 knots, got " +
                                                 std::to_string(c.knots_.size()));
        return c;
    }

    /// Parses a curve file: one knot per line with columns
    /// (cal BP, 14C age BP, one-sigma), comma- or whitespace-delimited.
    /// Lines starting with '#' are comments; columns beyond the third are
    /// ignored. Rows may come in ascending or descending cal BP order.
    static CalibrationCurve parse(std::string_view text, std::string name) {
        std::vector<CurveKnot> knots;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t eol = text.find('\n', pos);
            std::string_view line =
                text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
            pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

            std::size_t first = line.find_first_not_of(" \t");
            if (first == std::string_view::npos) continue;  // blank
            if (line[first] == '#') continue;               // comment

            double v[3];
            if (!parse_row(line, v))
                throw Error(errc::malformed_row, "line " + std::to_string(line_no) +
                                                     ": expected at least 3 numeric columns");
            if (v[2] < 0.0)
                throw Error(errc::negative_sigma,
                            "line " + std::to_string(line_no) + ": negative one-sigma value");
            knots.push_back({v[0], v[1], v[2]});
        }
        return from_knots(std::move(knots), std::move(name));
    }

    /// Interpolated (mu, gamma) at calendar age theta; both linear between
    /// the bracketing knots, exact at knot abscissae.
    CurvePoint at(double theta) const {
        if (!contains(theta))
            throw Error(errc::theta_out_of_domain,
                        "theta " + std::to_string(theta) + " outside curve domain [" +
                            std::to_string(min_cal_age()) + ", " + std::to_string(max_cal_age()) + "]");
        auto it = std::upper_bound(knots_.begin(), knots_.end(), theta,
                                   [](double v, const CurveKnot& k) { return v < k.cal_age; });
        if (it == knots_.end()) --it;   // theta == max cal age: use last segment
        if (it == knots_.begin()) ++it;
        const CurveKnot& hi = *it;
        const CurveKnot& lo = *(it - 1);
        const double t = (theta - lo.cal_age) / (hi.cal_age - lo.cal_age);
        return {std::lerp(lo.c14_age, hi.c14_age, t), std::lerp(lo.curve_sd, hi.curve_sd, t)};
    }

    bool contains(double theta) const {
        return theta >= min_cal_age() && theta <= max_cal_age();
    }

    double min_cal_age() const { return knots_.front().cal_age; }
    double max_cal_age() const { return knots_.back().cal_age; }
    const std::vector<CurveKnot>& knots() const { return knots_; }
    const std::string& name() const { return name_; }

    /// Writes the curve back out in the format parse() accepts, with enough
    /// digits that parse(serialize()) reproduces every knot bit-exactly.
    std::string serialize() const {
        std::string out = "# calibration curve: " + name_ + "\n# cal BP, 14C age BP, one-sigma BP\n";
        char buf[128];
        for (const CurveKnot& k : knots_) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", k.cal_age, k.c14_age, k.curve_sd);
            out += buf;
        }
        return out;
    }

private:
    CalibrationCurve() = default;

    static bool parse_row(std::string_view line, double out[3]) {
        // Commas and whitespace both act as field separators.
        std::string buf(line);
        for (char& ch : buf)
            if (ch == ',' || ch == '\t' || ch == ';') ch = ' ';
        const char* p = buf.c_str();
        char* end = nullptr;
        for (int i = 0; i < 3; ++i) {
            const double v = std::strtod(p, &end);
            if (end == p) return false;
            if (!std::isfinite(v)) return false;
            out[i] = v;
            p = end;
        }
        // Anything after the third column is ignored, but it must start with a
        // separator (already normalized to space) rather than garbage glued to
        // the number, which strtod would have stopped on.
        if (*p != '\0' && *p != ' ') return false;
        return true;
    }

    std::vector<CurveKnot> knots_;
    std::string name_;
};

}  // namespace calchron
