#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mobaudit/geo.hpp"
#include "mobaudit/ingest.hpp"

namespace mobaudit::networks {

struct Stay {
    std::string user_id;
    std::string tract; // tract GEOID of the medoid ping
    int64_t start = 0; // epoch seconds of first ping in the stay
    int64_t end = 0;   // epoch seconds of last ping in the stay
};

struct Trip {
    std::string user_id;
    std::string origin;
    std::string destination;
    int64_t departure = 0; // end of the origin stay
};

// Directed weighted mobility graph for one production group (or "all").
struct MobilityNetwork {
    std::string group_id;                            // "q01".."q20" or "all"
    std::map<std::string, uint64_t> node_users;      // tract -> distinct visiting users
    std::map<std::pair<std::string, std::string>, uint64_t> edges; // (o,d) -> trips
    uint64_t total_weight() const;
};

struct TimedPoint {
    int64_t ts = 0;
    double lat = 0;
    double lon = 0;
};

// Greedy stay-point detection: a maximal run of pings all within radius_m
// (haversine) of the run's FIRST ping, spanning at least dwell_s, becomes a
// stay located at the tract of the run's medoid. Pings must be time-sorted.
std::vector<Stay> detect_stays(const std::string& user_id,
                               const std::vector<TimedPoint>& pings,
                               const geo::RegionIndex& index, double radius_m = 200.0,
                               int64_t dwell_s = 600);

// One trip per consecutive stay pair of the same user.
std::vector<Trip> extract_trips(const std::vector<Stay>& stays);

// Users sorted by ping_count descending (ties by user_id ascending), dealt
// into g contiguous groups; sizes differ by at most one, remainder going to
// the top groups. Group 1 holds the heaviest producers. Returns user_id ->
// group (1-based). Throws DataError when fewer users than groups.
std::map<std::string, int> partition_groups(const std::vector<ingest::UserProfile>& profiles,
                                            int g = 20);

// Aggregate trips of the given users into a network. A trip contributes its
// endpoints to node visit sets and one unit of weight to its directed edge.
MobilityNetwork build_network(const std::vector<Trip>& trips,
                              const std::set<std::string>& members,
                              const std::string& group_id);

// Drop edges below min_w. Node set is left untouched: isolated nodes keep
// their degree-0 meaning in the correlations.
MobilityNetwork filter_min_weight(const MobilityNetwork& net, uint64_t min_w = 2);

// Noise-corrected backbone: with out-strength k_i, in-strength k_j and total
// weight W, an edge survives iff w > E + delta * sqrt(V) where E = k_i*k_j/W
// and V = E * (1 - k_i*k_j/W^2).
MobilityNetwork nc_backbone(const MobilityNetwork& net, double delta = 1.0);

// Pearson correlation of per-tract total degree (in + out, unweighted edge
// count) over a common node universe; absent node -> degree 0.
double degree_correlation(const MobilityNetwork& a, const MobilityNetwork& b,
                          const std::vector<std::string>& universe);

// Pearson correlation of edge weights over the union of both edge sets;
// absent edge -> weight 0.
double edge_weight_correlation(const MobilityNetwork& a, const MobilityNetwork& b);

// Plain Pearson r; throws UndefinedStatistic when either side has zero
// variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

void write_edges(const std::string& path, const MobilityNetwork& net);
MobilityNetwork read_edges(const std::string& path, const std::string& group_id);

} // namespace mobaudit::networks
