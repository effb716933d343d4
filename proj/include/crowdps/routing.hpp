#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <httplib.h>

// httplib drags in glibc's <resolv.h>, which leaves `_res` defined as an
// object-like macro; that corrupts later headers (Eigen names kernel
// parameters `_res`), so clear it before anything else is included.
#ifdef _res
#undef _res
#endif

#include <nlohmann/json.hpp>

#include "crowdps/distance.hpp"
#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"
#include "crowdps/hash.hpp"
#include "crowdps/log.hpp"

namespace crowdps {

/// Configuration of the HTTP routing-distance backend.
///
/// The backend serves `GET /distance?from=<lat>,<lon>&to=<lat>,<lon>` and
/// answers `{"distance_m": <meters>}`. The API key, when the env var is set,
/// travels in the X-Api-Key header. Responses are cached on disk keyed by
/// the coordinate pair rounded to 1e-6 degrees.
struct RoutingConfig {
    std::string base_url;                                // e.g. http://localhost:8080
    std::string api_key_env = "CROWDPS_ROUTING_API_KEY"; // env var holding the key
    std::string cache_dir;                               // empty = in-memory cache only
    bool offline = false;                                // force great-circle, no HTTP
    bool allow_fallback = true;                          // per-pair great-circle fallback
    int timeout_s = 5;
};

class RoutingApiProvider final : public DistanceProvider {
public:
    explicit RoutingApiProvider(RoutingConfig cfg) : cfg_(std::move(cfg)) {
        if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
    }

    DistanceProviderTag tag() const override {
        return cfg_.offline ? DistanceProviderTag::great_circle
                            : DistanceProviderTag::routing_api;
    }

    // road distances need not be symmetric; callers symmetrize
    bool symmetric() const override { return cfg_.offline; }

    double distance(const GeoPoint& a, const GeoPoint& b) override {
        if (cfg_.offline) return great_circle_m(a, b);
        const std::string key = cache_key(a, b);
        if (auto hit = lookup(key)) return *hit;
        if (auto fetched = fetch(a, b)) {
            store(key, *fetched);
            return *fetched;
        }
        if (!cfg_.allow_fallback)
            throw NumericError("routing provider unreachable for pair " + key +
                               " and fallback disabled");
        log_warn("routing request failed for " + key + "; falling back to great-circle");
        return great_circle_m(a, b);
    }

    long fallback_count() const { return fallbacks_; }

private:
    static std::string coord_token(const GeoPoint& p) {
        // rounded to 1e-6 degrees: the cache key resolution
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", p.y, p.x);
        return buf;
    }

    static std::string cache_key(const GeoPoint& a, const GeoPoint& b) {
        return coord_token(a) + "|" + coord_token(b);
    }

    std::optional<double> lookup(const std::string& key) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
        if (cfg_.cache_dir.empty()) return std::nullopt;
        std::ifstream in(cache_path(key));
        if (!in) return std::nullopt;
        std::string stored_key;
        double value = 0.0;
        if (std::getline(in, stored_key) && stored_key == key && (in >> value)) {
            memory_[key] = value;
            return value;
        }
        return std::nullopt;
    }

    void store(const std::string& key, double value) {
        std::lock_guard<std::mutex> lock(mutex_); // cache writes are serialized
        memory_[key] = value;
        if (cfg_.cache_dir.empty()) return;
        const std::string path = cache_path(key);
        const std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp);
            out.precision(12);
            out << key << "\n" << value << "\n";
        }
        std::filesystem::rename(tmp, path);
    }

    std::string cache_path(const std::string& key) const {
        return (std::filesystem::path(cfg_.cache_dir) / (to_hex(fnv1a64(key)) + ".dist"))
            .string();
    }

    std::optional<double> fetch(const GeoPoint& a, const GeoPoint& b) {
        try {
            httplib::Client client(cfg_.base_url);
            client.set_connection_timeout(cfg_.timeout_s, 0);
            client.set_read_timeout(cfg_.timeout_s, 0);
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("X-Api-Key", api_key_);
            const std::string path = "/distance?from=" + coord_token(a) + "&to=" + coord_token(b);
            auto res = client.Get(path, headers);
            if (!res || res->status != 200) {
                ++fallbacks_;
                return std::nullopt;
            }
            const auto body = nlohmann::json::parse(res->body);
            if (!body.contains("distance_m") || !body["distance_m"].is_number()) {
                ++fallbacks_;
                return std::nullopt;
            }
            const double d = body["distance_m"].get<double>();
            if (!(d >= 0.0)) {
                ++fallbacks_;
                return std::nullopt;
            }
            return d;
        } catch (const std::exception&) {
            ++fallbacks_;
            return std::nullopt;
        }
    }

    RoutingConfig cfg_;
    std::string api_key_;
    std::mutex mutex_;
    std::unordered_map<std::string, double> memory_;
    long fallbacks_ = 0;
};

/// Deterministic stand-in for a road-network backend: great-circle scaled by
/// a fixed detour factor. Useful for offline runs and tests.
class MockRoutingProvider final : public DistanceProvider {
public:
    explicit MockRoutingProvider(double detour_factor = 1.25) : factor_(detour_factor) {}
    double distance(const GeoPoint& a, const GeoPoint& b) override {
        return factor_ * great_circle_m(a, b);
    }
    DistanceProviderTag tag() const override { return DistanceProviderTag::routing_api; }
    bool symmetric() const override { return true; }

private:
    double factor_;
};

} // namespace crowdps
