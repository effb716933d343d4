#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"
#include "crowdps/log.hpp"

namespace crowdps {

struct Observation {
    std::string obs_id;
    std::string location_id;
    GeoPoint point;              // wgs84, x = lon, y = lat
    std::optional<double> value; // empty field in the input = missing, to be imputed
    std::string date;            // YYYY-MM-DD
    std::string collector_id;    // may be empty
};

struct RejectedRow {
    std::size_t row = 0; // 1-based line or feature number
    std::string reason;
    std::string raw;
};

struct IngestResult {
    std::vector<Observation> observations;
    std::vector<RejectedRow> rejects;
};

inline constexpr const char* kCsvHeader = "obs_id,location_id,lat,lon,value,date,collector_id";

/// Fixed-precision decimal rendering so artifacts are byte-stable.
inline std::string to_fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return std::string(buf);
}

/// Write-temp-then-rename so readers never see a half-written artifact.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot open " + tmp.string() + " for writing");
        os << content;
        if (!os) throw DataError("write failed on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Comma splitter with double-quote fields and "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline bool valid_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    const int y = std::stoi(s.substr(0, 4));
    const int m = std::stoi(s.substr(5, 2));
    const int d = std::stoi(s.substr(8, 2));
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int cap = days[m - 1];
    if (m == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) cap = 29;
    return d <= cap;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t used = 0;
    try {
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

namespace detail {

/// Field-level checks shared by both ingest formats. Returns an error reason
/// or empty string.
inline std::string build_observation(const std::string& obs_id, const std::string& location_id,
                                     const std::string& lat, const std::string& lon,
                                     const std::string& value, const std::string& date,
                                     const std::string& collector, Observation& out) {
    if (obs_id.empty()) return "empty-obs-id";
    if (location_id.empty()) return "empty-location-id";
    const auto lat_v = parse_double(lat);
    if (!lat_v) return "unparseable-lat";
    const auto lon_v = parse_double(lon);
    if (!lon_v) return "unparseable-lon";
    if (*lat_v < -90.0 || *lat_v > 90.0) return "lat-out-of-range";
    if (*lon_v < -180.0 || *lon_v > 180.0) return "lon-out-of-range";
    std::optional<double> value_v;
    if (!value.empty()) {
        value_v = parse_double(value);
        if (!value_v) return "unparseable-value";
    }
    if (!valid_date(date)) return "bad-date";
    out.obs_id = obs_id;
    out.location_id = location_id;
    out.point = GeoPoint{*lon_v, *lat_v, Crs::wgs84};
    out.value = value_v;
    out.date = date;
    out.collector_id = collector;
    return "";
}

} // namespace detail

/// Reads the fixed-schema observation CSV. Malformed rows land in rejects
/// with a reason; they are never silently dropped. Duplicate obs_id keeps the
/// first occurrence. Zero valid rows is an error.
inline IngestResult ingest_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw DataError(path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) {
        const auto have = split_csv_line(line);
        const auto want = split_csv_line(kCsvHeader);
        for (const auto& col : want) {
            bool found = false;
            for (const auto& h : have)
                if (h == col) found = true;
            if (!found)
                throw DataError(path.string() + ": missing required column '" + col + "'");
        }
        throw DataError(path.string() + ": header must be exactly '" + kCsvHeader + "'");
    }

    IngestResult res;
    std::vector<std::string> seen_ids;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 7) {
            res.rejects.push_back({row, "field-count", line});
            continue;
        }
        Observation obs;
        const std::string reason =
            detail::build_observation(f[0], f[1], f[2], f[3], f[4], f[5], f[6], obs);
        if (!reason.empty()) {
            res.rejects.push_back({row, reason, line});
            continue;
        }
        bool dup = false;
        for (const auto& id : seen_ids)
            if (id == obs.obs_id) dup = true;
        if (dup) {
            res.rejects.push_back({row, "duplicate-obs-id", line});
            continue;
        }
        seen_ids.push_back(obs.obs_id);
        res.observations.push_back(std::move(obs));
    }
    if (res.observations.empty()) throw DataError(path.string() + ": no valid rows");
    if (!res.rejects.empty())
        log_warn(path.string() + ": rejected " + std::to_string(res.rejects.size()) + " row(s)");
    return res;
}

/// GeoJSON FeatureCollection of Point features carrying the same fields in
/// properties; geometry order is [lon, lat].
inline IngestResult ingest_geojson(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const std::exception& e) {
        throw DataError(path.string() + ": invalid json: " + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
        throw DataError(path.string() + ": expected a FeatureCollection");

    auto str_prop = [](const nlohmann::json& props, const char* key) -> std::string {
        if (!props.contains(key) || props[key].is_null()) return "";
        const auto& v = props[key];
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) return to_fixed(v.get<double>());
        return "";
    };

    IngestResult res;
    std::vector<std::string> seen_ids;
    std::size_t idx = 0;
    for (const auto& feat : doc["features"]) {
        ++idx;
        const std::string raw = feat.dump();
        if (!feat.contains("geometry") || feat["geometry"].is_null() ||
            feat["geometry"].value("type", "") != "Point" ||
            !feat["geometry"].contains("coordinates") ||
            !feat["geometry"]["coordinates"].is_array() ||
            feat["geometry"]["coordinates"].size() < 2) {
            res.rejects.push_back({idx, "bad-geometry", raw});
            continue;
        }
        if (!feat.contains("properties") || !feat["properties"].is_object()) {
            res.rejects.push_back({idx, "missing-properties", raw});
            continue;
        }
        const auto& props = feat["properties"];
        const auto& coords = feat["geometry"]["coordinates"];
        if (!coords[0].is_number() || !coords[1].is_number()) {
            res.rejects.push_back({idx, "bad-geometry", raw});
            continue;
        }
        Observation obs;
        const std::string reason = detail::build_observation(
            str_prop(props, "obs_id"), str_prop(props, "location_id"),
            to_fixed(coords[1].get<double>(), 10), to_fixed(coords[0].get<double>(), 10),
            props.contains("value") && props["value"].is_number()
                ? to_fixed(props["value"].get<double>(), 10)
                : str_prop(props, "value"),
            str_prop(props, "date"), str_prop(props, "collector_id"), obs);
        if (!reason.empty()) {
            res.rejects.push_back({idx, reason, raw});
            continue;
        }
        bool dup = false;
        for (const auto& id : seen_ids)
            if (id == obs.obs_id) dup = true;
        if (dup) {
            res.rejects.push_back({idx, "duplicate-obs-id", raw});
            continue;
        }
        seen_ids.push_back(obs.obs_id);
        res.observations.push_back(std::move(obs));
    }
    if (res.observations.empty()) throw DataError(path.string() + ": no valid features");
    if (!res.rejects.empty())
        log_warn(path.string() + ": rejected " + std::to_string(res.rejects.size()) +
                 " feature(s)");
    return res;
}

enum class IngestFormat { csv, geojson };

inline IngestFormat ingest_format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return IngestFormat::csv;
    if (ext == ".geojson" || ext == ".json") return IngestFormat::geojson;
    throw ConfigError("cannot infer input format from '" + ext + "', expected .csv or .geojson");
}

inline IngestResult ingest(const std::filesystem::path& path, IngestFormat format) {
    return format == IngestFormat::csv ? ingest_csv(path) : ingest_geojson(path);
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

/// Serializes observations back to the input schema. Values render at fixed
/// precision; missing values stay empty.
inline std::string render_observations_csv(const std::vector<Observation>& obs) {
    std::ostringstream os;
    os << kCsvHeader << '\n';
    for (const auto& o : obs) {
        os << csv_quote(o.obs_id) << ',' << csv_quote(o.location_id) << ','
           << to_fixed(o.point.y) << ',' << to_fixed(o.point.x) << ','
           << (o.value ? to_fixed(*o.value) : std::string{}) << ',' << o.date << ','
           << csv_quote(o.collector_id) << '\n';
    }
    return os.str();
}

inline std::string render_rejects_csv(const std::vector<RejectedRow>& rejects) {
    std::ostringstream os;
    os << "row,reason,raw\n";
    for (const auto& r : rejects)
        os << r.row << ',' << r.reason << ',' << csv_quote(r.raw) << '\n';
    return os.str();
}

} // namespace crowdps
