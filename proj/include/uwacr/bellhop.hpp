// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reader/writer for BELLHOP ASCII arrival files (.arr).
//
// Two layouts are accepted:
//   modern  : "'2D'" line, frequency line, "N v1..vN" lines for source depths,
//             receiver depths and receiver ranges; arrival rows carry 8 fields
//             (amp, phase[deg], delay re, delay im, src angle, rcv angle,
//             top bounces, bottom bounces).
//   legacy  : "freq Nsd Nrd Nrr" line followed by the three value lists;
//             arrival rows carry 7 fields (no imaginary delay).
// Both continue with, per source depth, the maximum arrival count and then,
// per (receiver depth, receiver range), an arrival count followed by that many
// arrival rows. Output is always the modern layout.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "uwacr/chanmodel.hpp"

namespace uwacr::bellhop {

struct Arrival {
    double amplitude = 0.0;
    double phase_deg = 0.0;
    double delay = 0.0;
    double delay_imag = 0.0;
    double source_angle = 0.0;
    double receiver_angle = 0.0;
    long top_bounces = 0;
    long bottom_bounces = 0;
    friend bool operator==(const Arrival&, const Arrival&) = default;
};

struct Receiver {
    std::size_t source_index = 0;
    std::size_t depth_index = 0;
    std::size_t range_index = 0;
    std::vector<Arrival> arrivals;
    friend bool operator==(const Receiver&, const Receiver&) = default;
};

struct ArrivalFile {
    double frequency = 0.0;
    RVec source_depths;
    RVec receiver_depths;
    RVec receiver_ranges;
    std::vector<std::size_t> max_arrivals;  // one per source depth
    std::vector<Receiver> receivers;        // source-major, then depth, then range
    friend bool operator==(const ArrivalFile&, const ArrivalFile&) = default;
};

namespace detail {

struct Line {
    std::size_t number;
    std::vector<std::string> fields;
};

inline std::vector<Line> tokenize(std::string_view text) {
    std::vector<Line> lines;
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        ++number;
        std::string_view raw = text.substr(pos, end - pos);
        std::vector<std::string> fields;
        std::size_t i = 0;
        while (i < raw.size()) {
            while (i < raw.size() && (std::isspace(static_cast<unsigned char>(raw[i])) || raw[i] == ',')) ++i;
            std::size_t j = i;
            while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j])) && raw[j] != ',') ++j;
            if (j > i) fields.emplace_back(raw.substr(i, j - i));
            i = j;
        }
        if (!fields.empty()) lines.push_back({number, std::move(fields)});
        if (end == text.size()) break;
        pos = end + 1;
    }
    return lines;
}

inline double to_double(const std::string& token, std::size_t line) {
    std::string t = token;
    std::replace(t.begin(), t.end(), 'D', 'E');
    std::replace(t.begin(), t.end(), 'd', 'e');
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
        throw ParseError(line, "expected a number, found '" + token + "'");
    return v;
}

inline long to_integer(const std::string& token, std::size_t line, const char* what) {
    const double v = to_double(token, line);
    if (v != std::floor(v) || v < 0.0) throw ParseError(line, std::string(what) + " must be a nonnegative integer");
    return static_cast<long>(v);
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class Cursor {
public:
    explicit Cursor(std::vector<Line> lines) : lines_(std::move(lines)) {}

    const Line& next(const char* what) {
        if (pos_ >= lines_.size()) {
            const std::size_t n = lines_.empty() ? 1 : lines_.back().number + 1;
            throw ParseError(n, std::string("unexpected end of file, expected ") + what);
        }
        return lines_[pos_++];
    }
    bool done() const { return pos_ >= lines_.size(); }
    const Line& peek() const { return lines_[pos_]; }

private:
    std::vector<Line> lines_;
    std::size_t pos_ = 0;
};

inline RVec read_counted_list(Cursor& cur, const char* what) {
    const Line& line = cur.next(what);
    const long n = to_integer(line.fields[0], line.number, what);
    if (n < 1) throw ParseError(line.number, std::string(what) + " count must be at least 1");
    if (line.fields.size() != static_cast<std::size_t>(n) + 1)
        throw ParseError(line.number, std::string(what) + ": declared " + std::to_string(n) + " values, found " +
                                          std::to_string(line.fields.size() - 1));
    RVec out;
    for (std::size_t i = 1; i < line.fields.size(); ++i) out.push_back(to_double(line.fields[i], line.number));
    return out;
}

inline RVec read_plain_list(Cursor& cur, std::size_t n, const char* what) {
    const Line& line = cur.next(what);
    if (line.fields.size() != n)
        throw ParseError(line.number, std::string(what) + ": expected " + std::to_string(n) + " values, found " +
                                          std::to_string(line.fields.size()));
    RVec out;
    for (const auto& f : line.fields) out.push_back(to_double(f, line.number));
    return out;
}

}  // namespace detail

inline ArrivalFile parse_arrival_file(std::string_view text) {
    using namespace detail;
    Cursor cur(tokenize(text));
    ArrivalFile file;

    const Line& first = cur.next("header");
    std::size_t row_fields = 8;
    std::string tag = first.fields[0];
    std::erase(tag, '\'');
    std::erase(tag, '"');
    if (tag == "2D") {
        if (first.fields.size() != 1) throw ParseError(first.number, "malformed header: extra fields after '2D'");
        const Line& f = cur.next("frequency");
        if (f.fields.size() != 1) throw ParseError(f.number, "malformed header: expected a single frequency value");
        file.frequency = to_double(f.fields[0], f.number);
        file.source_depths = read_counted_list(cur, "source depths");
        file.receiver_depths = read_counted_list(cur, "receiver depths");
        file.receiver_ranges = read_counted_list(cur, "receiver ranges");
    } else if (tag == "3D") {
        throw ParseError(first.number, "3D arrival files are not supported");
    } else {
        if (first.fields.size() != 4)
            throw ParseError(first.number, "malformed header: expected '2D' or 'freq Nsd Nrd Nrr'");
        row_fields = 7;
        file.frequency = to_double(first.fields[0], first.number);
        const long nsd = to_integer(first.fields[1], first.number, "source depth count");
        const long nrd = to_integer(first.fields[2], first.number, "receiver depth count");
        const long nrr = to_integer(first.fields[3], first.number, "receiver range count");
        if (nsd < 1 || nrd < 1 || nrr < 1) throw ParseError(first.number, "malformed header: empty grid");
        file.source_depths = read_plain_list(cur, static_cast<std::size_t>(nsd), "source depths");
        file.receiver_depths = read_plain_list(cur, static_cast<std::size_t>(nrd), "receiver depths");
        file.receiver_ranges = read_plain_list(cur, static_cast<std::size_t>(nrr), "receiver ranges");
    }
    if (!(file.frequency > 0.0)) throw ParseError(first.number, "malformed header: frequency must be positive");

    for (std::size_t s = 0; s < file.source_depths.size(); ++s) {
        const Line& m = cur.next("maximum arrival count");
        if (m.fields.size() != 1) throw ParseError(m.number, "expected the maximum arrival count");
        const auto max_narr = static_cast<std::size_t>(to_integer(m.fields[0], m.number, "maximum arrival count"));
        file.max_arrivals.push_back(max_narr);
        for (std::size_t d = 0; d < file.receiver_depths.size(); ++d) {
            for (std::size_t r = 0; r < file.receiver_ranges.size(); ++r) {
                const Line& c = cur.next("arrival count");
                if (c.fields.size() != 1)
                    throw ParseError(c.number, "expected an arrival count, found " + std::to_string(c.fields.size()) +
                                                   " fields");
                const auto narr = static_cast<std::size_t>(to_integer(c.fields[0], c.number, "arrival count"));
                if (narr > max_narr)
                    throw ParseError(c.number, "arrival count " + std::to_string(narr) +
                                                   " exceeds the declared maximum " + std::to_string(max_narr));
                Receiver rx{s, d, r, {}};
                for (std::size_t a = 0; a < narr; ++a) {
                    if (cur.done() || cur.peek().fields.size() == 1)
                        throw ParseError(c.number, "arrival count mismatch: declared " + std::to_string(narr) +
                                                       " arrivals, found " + std::to_string(a));
                    const Line& row = cur.next("arrival row");
                    if (row.fields.size() != row_fields)
                        throw ParseError(row.number, "malformed arrival row " + std::to_string(a + 1) + " of " +
                                                         std::to_string(narr) + ": expected " +
                                                         std::to_string(row_fields) + " fields, found " +
                                                         std::to_string(row.fields.size()));
                    Arrival arr;
                    std::size_t i = 0;
                    arr.amplitude = to_double(row.fields[i++], row.number);
                    arr.phase_deg = to_double(row.fields[i++], row.number);
                    arr.delay = to_double(row.fields[i++], row.number);
                    if (row_fields == 8) arr.delay_imag = to_double(row.fields[i++], row.number);
                    arr.source_angle = to_double(row.fields[i++], row.number);
                    arr.receiver_angle = to_double(row.fields[i++], row.number);
                    arr.top_bounces = to_integer(row.fields[i++], row.number, "top bounce count");
                    arr.bottom_bounces = to_integer(row.fields[i++], row.number, "bottom bounce count");
                    if (arr.amplitude < 0.0) throw ParseError(row.number, "negative arrival amplitude");
                    if (arr.delay < 0.0) throw ParseError(row.number, "negative arrival delay");
                    rx.arrivals.push_back(arr);
                }
                file.receivers.push_back(std::move(rx));
            }
        }
    }
    if (!cur.done()) throw ParseError(cur.peek().number, "trailing content after the last receiver");
    return file;
}

/// Canonical (modern layout) text for a parsed file.
inline std::string serialize_arrival_file(const ArrivalFile& file) {
    using detail::format_double;
    std::ostringstream os;
    auto list = [&](const RVec& v) {
        os << v.size();
        for (double x : v) os << ' ' << format_double(x);
        os << '\n';
    };
    os << "'2D'\n" << format_double(file.frequency) << '\n';
    list(file.source_depths);
    list(file.receiver_depths);
    list(file.receiver_ranges);
    const std::size_t per_source = file.receiver_depths.size() * file.receiver_ranges.size();
    for (std::size_t s = 0; s < file.source_depths.size(); ++s) {
        os << (s < file.max_arrivals.size() ? file.max_arrivals[s] : 0) << '\n';
        for (std::size_t i = 0; i < per_source; ++i) {
            const std::size_t idx = s * per_source + i;
            if (idx >= file.receivers.size()) break;
            const auto& rx = file.receivers[idx];
            os << rx.arrivals.size() << '\n';
            for (const auto& a : rx.arrivals) {
                os << format_double(a.amplitude) << ' ' << format_double(a.phase_deg) << ' '
                   << format_double(a.delay) << ' ' << format_double(a.delay_imag) << ' '
                   << format_double(a.source_angle) << ' ' << format_double(a.receiver_angle) << ' '
                   << a.top_bounces << ' ' << a.bottom_bounces << '\n';
            }
        }
    }
    return os.str();
}

/// One impulse response per receiver; gain = amplitude * exp(i * phase).
/// Taps are sorted by delay, delay values are kept as parsed.
inline std::vector<ChannelImpulseResponse> to_cirs(const ArrivalFile& file) {
    std::vector<ChannelImpulseResponse> out;
    const std::size_t per_source = file.receiver_depths.size() * file.receiver_ranges.size();
    for (std::size_t i = 0; i < file.receivers.size(); ++i) {
        const auto& rx = file.receivers[i];
        if (rx.arrivals.empty())
            throw ChannelError("receiver " + std::to_string(i) + " (depth " + std::to_string(rx.depth_index) +
                               ", range " + std::to_string(rx.range_index) + ") has no arrivals");
        ChannelImpulseResponse cir;
        cir.link = {static_cast<int>(rx.source_index), static_cast<int>(per_source == 0 ? i : i % per_source)};
        for (const auto& a : rx.arrivals)
            cir.taps.push_back({a.delay, std::polar(a.amplitude, a.phase_deg * kPi / 180.0)});
        std::stable_sort(cir.taps.begin(), cir.taps.end(),
                         [](const Tap& x, const Tap& y) { return x.delay < y.delay; });
        cir.validate();
        out.push_back(std::move(cir));
    }
    return out;
}

inline std::vector<ChannelImpulseResponse> parse_bellhop_arrivals(std::string_view text) {
    return to_cirs(parse_arrival_file(text));
}

}  // namespace uwacr::bellhop
