#include "fpvbench/trajio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace fpvbench {

namespace {

bool parse_double(std::string_view tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool as_integer(double v, std::int64_t& out) {
    if (v != std::floor(v) || std::abs(v) > 9.0e15) return false;
    out = static_cast<std::int64_t>(v);
    return true;
}

}  // namespace

std::vector<RawRecord> parse_trajectory_file(std::istream& in) {
    std::vector<RawRecord> out;
    std::set<std::pair<std::int64_t, AgentId>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::vector<std::string_view> toks;
        std::string_view sv(line);
        std::size_t i = 0;
        while (i < sv.size()) {
            while (i < sv.size() && std::isspace(static_cast<unsigned char>(sv[i]))) ++i;
            std::size_t j = i;
            while (j < sv.size() && !std::isspace(static_cast<unsigned char>(sv[j]))) ++j;
            if (j > i) toks.push_back(sv.substr(i, j - i));
            i = j;
        }
        if (toks.empty()) continue;
        if (toks.size() != 4) {
            throw ParseError(lineno, "expected 4 columns, found " + std::to_string(toks.size()));
        }
        double v[4];
        for (int k = 0; k < 4; ++k) {
            if (!parse_double(toks[k], v[k])) {
                throw ParseError(lineno, "not a number: '" + std::string(toks[k]) + "'");
            }
        }
        RawRecord r;
        if (!as_integer(v[0], r.frame_id)) throw ParseError(lineno, "fractional frame_id");
        if (r.frame_id < 0) throw ParseError(lineno, "negative frame_id");
        if (!as_integer(v[1], r.agent_id)) throw ParseError(lineno, "fractional agent_id");
        r.x = v[2];
        r.y = v[3];
        if (!seen.emplace(r.frame_id, r.agent_id).second) {
            throw DuplicateRecordError(lineno, "duplicate (frame " + std::to_string(r.frame_id) +
                                                   ", agent " + std::to_string(r.agent_id) + ")");
        }
        out.push_back(r);
    }
    return out;
}

std::vector<RawRecord> parse_trajectory_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_trajectory_file(in);
}

std::int64_t infer_frame_stride(std::span<const RawRecord> records) {
    std::map<AgentId, std::vector<std::int64_t>> frames;
    for (const auto& r : records) frames[r.agent_id].push_back(r.frame_id);
    std::int64_t g = 0;
    for (auto& [id, f] : frames) {
        std::sort(f.begin(), f.end());
        for (std::size_t i = 1; i < f.size(); ++i) g = std::gcd(g, f[i] - f[i - 1]);
    }
    if (g == 0) {
        std::set<std::int64_t> all;
        for (const auto& r : records) all.insert(r.frame_id);
        std::int64_t prev = -1;
        for (auto f : all) {
            if (prev >= 0) g = std::gcd(g, f - prev);
            prev = f;
        }
    }
    return g == 0 ? 1 : g;
}

Step Recording::min_step() const noexcept {
    Step m = 0;
    bool any = false;
    for (const auto& t : tracks) {
        m = any ? std::min(m, t.start_step) : t.start_step;
        any = true;
    }
    return m;
}

Step Recording::max_step() const noexcept {
    Step m = -1;
    for (const auto& t : tracks) m = std::max(m, t.end_step() - 1);
    return m;
}

Recording build_recording(std::span<const RawRecord> records, std::string name) {
    Recording rec;
    rec.name = std::move(name);
    if (records.empty()) return rec;

    rec.frame_stride = infer_frame_stride(records);
    rec.frame_base = std::min_element(records.begin(), records.end(), [](auto& a, auto& b) {
                         return a.frame_id < b.frame_id;
                     })->frame_id;

    std::map<AgentId, std::vector<const RawRecord*>> by_agent;
    for (const auto& r : records) {
        if ((r.frame_id - rec.frame_base) % rec.frame_stride != 0) {
            throw FormatError("non-uniform frame stride: frame " + std::to_string(r.frame_id) +
                              " is off the stride-" + std::to_string(rec.frame_stride) +
                              " grid starting at " + std::to_string(rec.frame_base));
        }
        by_agent[r.agent_id].push_back(&r);
    }

    int handle = 0;
    for (auto& [id, rows] : by_agent) {
        std::sort(rows.begin(), rows.end(),
                  [](auto* a, auto* b) { return a->frame_id < b->frame_id; });
        AgentTrack cur;
        for (const RawRecord* r : rows) {
            const Step s = (r->frame_id - rec.frame_base) / rec.frame_stride;
            if (!cur.positions.empty() && s == cur.end_step() - 1) {
                throw FormatError("agent " + std::to_string(id) + " appears twice in frame " +
                                  std::to_string(r->frame_id));
            }
            if (cur.positions.empty() || s != cur.end_step()) {
                if (!cur.positions.empty()) rec.tracks.push_back(std::move(cur));
                cur = AgentTrack{};
                cur.agent_id = id;
                cur.handle = handle++;
                cur.start_step = s;
            }
            cur.positions.push_back({r->x, r->y});
            cur.headings.push_back(0.0);
        }
        rec.tracks.push_back(std::move(cur));
    }
    return rec;
}

std::vector<AgentTrack> build_tracks(std::span<const RawRecord> records) {
    return build_recording(records).tracks;
}

double slerp_angle(double from, double to, double t) noexcept {
    return wrap_angle(from + t * angle_diff(to, from));
}

std::vector<double> raw_headings(std::span<const Vec2> positions) {
    const std::size_t n = positions.size();
    std::vector<double> h(n, 0.0);
    if (n < 2) return h;
    std::vector<bool> valid(n, false);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const Vec2 d = positions[t + 1] - positions[t];
        if (d.norm() >= kStationaryEps) {
            h[t] = std::atan2(d.y, d.x);
            valid[t] = true;
        }
    }
    // Leading stationary steps take the first moving heading.
    std::size_t first = 0;
    while (first + 1 < n && !valid[first]) ++first;
    const double lead = (first + 1 < n) ? h[first] : 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        if (!valid[t]) h[t] = (t == 0 || t < first) ? lead : h[t - 1];
    }
    h[n - 1] = h[n - 2];
    return h;
}

std::vector<double> smooth_headings(std::span<const double> raw, int slerp_window) {
    const auto n = static_cast<std::ptrdiff_t>(raw.size());
    std::vector<double> out(raw.begin(), raw.end());
    const std::ptrdiff_t r = std::max(0, slerp_window / 2);
    if (r == 0) return out;
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - r);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + r);
        double m = raw[lo];
        for (std::ptrdiff_t k = lo + 1; k <= hi; ++k) {
            m = slerp_angle(m, raw[k], 1.0 / static_cast<double>(k - lo + 1));
        }
        out[t] = wrap_angle(m);
    }
    return out;
}

AgentTrack derive_headings(AgentTrack track, int slerp_window) {
    track.headings = smooth_headings(raw_headings(track.positions), slerp_window);
    return track;
}

std::vector<RawRecord> to_records(const Recording& rec) {
    std::vector<RawRecord> out;
    for (const auto& t : rec.tracks) {
        for (std::size_t i = 0; i < t.positions.size(); ++i) {
            const Step s = t.start_step + static_cast<Step>(i);
            out.push_back({rec.frame_base + s * rec.frame_stride, t.agent_id, t.positions[i].x,
                           t.positions[i].y});
        }
    }
    std::sort(out.begin(), out.end(), [](const RawRecord& a, const RawRecord& b) {
        return std::tie(a.frame_id, a.agent_id) < std::tie(b.frame_id, b.agent_id);
    });
    return out;
}

std::string format_records(std::span<const RawRecord> records) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& r : records) {
        os << r.frame_id << '\t' << r.agent_id << '\t' << r.x << '\t' << r.y << '\n';
    }
    return os.str();
}

Recording load_recording(const std::string& path, int slerp_window) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trajectory file: " + path);
    std::vector<RawRecord> records;
    try {
        records = parse_trajectory_file(in);
    } catch (const ParseError& e) {
        throw DataError(path + ":" + e.what());
    }
    auto stem = path.substr(path.find_last_of('/') + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos) stem.resize(dot);
    Recording rec;
    try {
        rec = build_recording(records, stem);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
    for (auto& t : rec.tracks) t = derive_headings(std::move(t), slerp_window);
    return rec;
}

}  // namespace fpvbench
