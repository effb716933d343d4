#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"

namespace crowdps {

enum class DistanceProviderTag { great_circle, euclidean, routing_api };

inline const char* to_string(DistanceProviderTag tag) {
    switch (tag) {
        case DistanceProviderTag::great_circle: return "great-circle";
        case DistanceProviderTag::euclidean: return "euclidean";
        default: return "routing-api";
    }
}

/// Full pairwise distance matrix over a set of locations.
/// Symmetric by construction except for raw routing output, which is
/// symmetrized by averaging before any neighbor derivation.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::size_t n, DistanceProviderTag tag)
        : n_(n), tag_(tag), d_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    DistanceProviderTag provider_tag() const { return tag_; }

    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
    double& at(std::size_t i, std::size_t j) { return d_[i * n_ + j]; }

    bool symmetric(double tol = 0.0) const {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
        return true;
    }

    /// Replaces d with (d + d^T)/2. Raw routing matrices pass through here.
    void symmetrize() {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) {
                const double m = 0.5 * ((*this)(i, j) + (*this)(j, i));
                at(i, j) = m;
                at(j, i) = m;
            }
    }

    void write_csv(const std::string& path, const std::vector<std::string>& location_ids) const {
        if (location_ids.size() != n_)
            throw DataError("distance csv: location_id count does not match matrix size");
        std::ofstream out(path);
        if (!out) throw DataError("cannot open " + path + " for writing");
        out << "location_id";
        for (const auto& id : location_ids) out << "," << id;
        out << "\n";
        out.precision(10);
        for (std::size_t i = 0; i < n_; ++i) {
            out << location_ids[i];
            for (std::size_t j = 0; j < n_; ++j) out << "," << (*this)(i, j);
            out << "\n";
        }
    }

private:
    std::size_t n_ = 0;
    DistanceProviderTag tag_ = DistanceProviderTag::great_circle;
    std::vector<double> d_;
};

/// Pluggable pairwise distance source.
class DistanceProvider {
public:
    virtual ~DistanceProvider() = default;
    virtual double distance(const GeoPoint& a, const GeoPoint& b) = 0;
    virtual DistanceProviderTag tag() const = 0;
    /// Routing backends may return a != b -> b != a distances.
    virtual bool symmetric() const { return true; }
};

class GreatCircleProvider final : public DistanceProvider {
public:
    double distance(const GeoPoint& a, const GeoPoint& b) override { return great_circle_m(a, b); }
    DistanceProviderTag tag() const override { return DistanceProviderTag::great_circle; }
};

class EuclideanProvider final : public DistanceProvider {
public:
    double distance(const GeoPoint& a, const GeoPoint& b) override { return euclidean(a, b); }
    DistanceProviderTag tag() const override { return DistanceProviderTag::euclidean; }
};

/// Builds the full matrix. Requires >= 2 points sharing one crs.
/// Asymmetric providers are symmetrized by pairwise averaging.
inline DistanceMatrix build_distance_matrix(const std::vector<GeoPoint>& points,
                                            DistanceProvider& provider) {
    if (points.size() < 2) throw DataError("build_distance_matrix: need at least 2 points");
    const Crs crs = points.front().crs;
    for (const auto& p : points)
        if (p.crs != crs) throw DataError("build_distance_matrix: mixed crs input rejected");

    const std::size_t n = points.size();
    DistanceMatrix m(n, provider.tag());
    if (provider.symmetric()) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = provider.distance(points[i], points[j]);
                m.at(i, j) = d;
                m.at(j, i) = d;
            }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) m.at(i, j) = provider.distance(points[i], points[j]);
        m.symmetrize();
    }
    return m;
}

/// Allows passing a freshly constructed provider in place.
inline DistanceMatrix build_distance_matrix(const std::vector<GeoPoint>& points,
                                            DistanceProvider&& provider) {
    return build_distance_matrix(points, provider);
}

/// Convenience: euclidean matrix for planar points, great-circle for wgs84.
inline DistanceMatrix default_distance_matrix(const std::vector<GeoPoint>& points) {
    if (points.empty()) throw DataError("default_distance_matrix: empty input");
    if (points.front().crs == Crs::planar_unit) {
        EuclideanProvider p;
        return build_distance_matrix(points, p);
    }
    GreatCircleProvider p;
    return build_distance_matrix(points, p);
}

} // namespace crowdps
