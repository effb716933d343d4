#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>

#include <httplib.h>

#include "crowdps/geo.hpp"
#include "crowdps/routing.hpp"

using namespace crowdps;
namespace fs = std::filesystem;

namespace {
const GeoPoint kA = make_wgs84(7.4, 10.5);
const GeoPoint kB = make_wgs84(8.0, 11.0);

struct TestServer {
    httplib::Server svr;
    std::thread worker;
    int port = 0;
    std::atomic<int> hits{0};

    explicit TestServer(double distance_m = 98765.5, bool fail = false,
                        const std::string& require_key = "") {
        svr.Get("/distance", [this, distance_m, fail, require_key](const httplib::Request& req,
                                                                   httplib::Response& res) {
            ++hits;
            if (!require_key.empty() && req.get_header_value("X-Api-Key") != require_key) {
                res.status = 401;
                return;
            }
            if (fail || !req.has_param("from") || !req.has_param("to")) {
                res.status = 500;
                return;
            }
            res.set_content("{\"distance_m\": " + std::to_string(distance_m) + "}",
                            "application/json");
        });
        port = svr.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        worker = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

    ~TestServer() {
        svr.stop();
        if (worker.joinable()) worker.join();
    }
};

fs::path fresh_cache(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "crowdps_route_tests" / name;
    fs::remove_all(d);
    return d;
}
} // namespace

TEST_CASE("the mock routing backend applies a fixed detour factor") {
    MockRoutingProvider mock; // default 1.25
    REQUIRE(mock.distance(kA, kB) == Catch::Approx(1.25 * great_circle_m(kA, kB)));
    REQUIRE(mock.symmetric());
    REQUIRE(mock.tag() == DistanceProviderTag::routing_api);
    MockRoutingProvider twice(2.0);
    REQUIRE(twice.distance(kA, kB) == Catch::Approx(2.0 * great_circle_m(kA, kB)));
}

TEST_CASE("offline mode never touches the network") {
    RoutingConfig cfg;
    cfg.base_url = "http://127.0.0.1:9"; // unroutable on purpose
    cfg.offline = true;
    RoutingApiProvider p(cfg);
    REQUIRE(p.distance(kA, kB) == great_circle_m(kA, kB));
    REQUIRE(p.symmetric());
    REQUIRE(p.tag() == DistanceProviderTag::great_circle);
    REQUIRE(p.fallback_count() == 0);
}

TEST_CASE("distances come from the backend and are cached in memory") {
    TestServer server(12345.5);
    RoutingConfig cfg;
    cfg.base_url = server.url();
    RoutingApiProvider p(cfg);
    REQUIRE(p.distance(kA, kB) == Catch::Approx(12345.5));
    REQUIRE(p.distance(kA, kB) == Catch::Approx(12345.5));
    REQUIRE(server.hits.load() == 1); // the repeat was answered from cache
    REQUIRE(p.fallback_count() == 0);
    REQUIRE_FALSE(p.symmetric()); // road distances may be directional
}

TEST_CASE("the disk cache outlives both the provider and the backend") {
    const fs::path cache = fresh_cache("persist");
    {
        TestServer server(54321.0);
        RoutingConfig cfg;
        cfg.base_url = server.url();
        cfg.cache_dir = cache.string();
        RoutingApiProvider p(cfg);
        REQUIRE(p.distance(kA, kB) == Catch::Approx(54321.0));
    } // server gone

    RoutingConfig cfg;
    cfg.base_url = "http://127.0.0.1:9"; // nothing listens here
    cfg.cache_dir = cache.string();
    cfg.allow_fallback = false; // a cache miss would now throw
    RoutingApiProvider p(cfg);
    REQUIRE(p.distance(kA, kB) == Catch::Approx(54321.0));
    REQUIRE(p.fallback_count() == 0);
}

TEST_CASE("a failing backend falls back to great-circle when allowed") {
    TestServer server(1.0, /*fail=*/true);
    RoutingConfig cfg;
    cfg.base_url = server.url();
    RoutingApiProvider p(cfg);
    REQUIRE(p.distance(kA, kB) == Catch::Approx(great_circle_m(kA, kB)));
    REQUIRE(p.fallback_count() == 1);

    cfg.allow_fallback = false;
    RoutingApiProvider strict(cfg);
    REQUIRE_THROWS_AS(strict.distance(kA, kB), NumericError);
}

TEST_CASE("an unreachable backend behaves like a failing one") {
    RoutingConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";
    cfg.timeout_s = 1;
    RoutingApiProvider p(cfg);
    REQUIRE(p.distance(kA, kB) == Catch::Approx(great_circle_m(kA, kB)));
    REQUIRE(p.fallback_count() == 1);
}

TEST_CASE("the api key travels in the request header") {
    ::setenv("CROWDPS_TEST_ROUTING_KEY", "sekret", 1);
    TestServer server(777.0, /*fail=*/false, /*require_key=*/"sekret");
    RoutingConfig cfg;
    cfg.base_url = server.url();
    cfg.api_key_env = "CROWDPS_TEST_ROUTING_KEY";
    RoutingApiProvider p(cfg);
    REQUIRE(p.distance(kA, kB) == Catch::Approx(777.0));
    REQUIRE(p.fallback_count() == 0);

    // without the key the backend refuses and the provider falls back
    RoutingConfig anon = cfg;
    anon.api_key_env = "CROWDPS_TEST_ROUTING_KEY_UNSET";
    RoutingApiProvider q(anon);
    REQUIRE(q.distance(kA, kB) == Catch::Approx(great_circle_m(kA, kB)));
    REQUIRE(q.fallback_count() == 1);
    ::unsetenv("CROWDPS_TEST_ROUTING_KEY");
}
