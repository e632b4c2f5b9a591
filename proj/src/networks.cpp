#include "mobaudit/networks.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mobaudit/csv.hpp"
#include "mobaudit/errors.hpp"

namespace mobaudit::networks {

uint64_t MobilityNetwork::total_weight() const {
    uint64_t w = 0;
    for (const auto& [_, count] : edges) w += count;
    return w;
}

std::vector<Stay> detect_stays(const std::string& user_id,
                               const std::vector<TimedPoint>& pings,
                               const geo::RegionIndex& index, double radius_m,
                               int64_t dwell_s) {
    std::vector<Stay> stays;
    size_t i = 0;
    while (i < pings.size()) {
        // Maximal run anchored at ping i: every member within radius of it.
        size_t j = i + 1;
        while (j < pings.size() &&
               geo::haversine_m(pings[i].lat, pings[i].lon, pings[j].lat, pings[j].lon) <=
                   radius_m)
            ++j;
        int64_t span = pings[j - 1].ts - pings[i].ts;
        if (span < dwell_s) {
            ++i;
            continue;
        }

        // Medoid over the run, weighted by coordinate multiplicity; ties go
        // to the earliest ping. Equivalent to the plain all-pairs medoid.
        std::vector<std::pair<double, double>> coords; // first-occurrence order
        std::vector<double> weight;
        std::unordered_map<double, std::unordered_map<double, size_t>> slot_of;
        for (size_t k = i; k < j; ++k) {
            auto& s = slot_of[pings[k].lat];
            auto it = s.find(pings[k].lon);
            if (it == s.end()) {
                s.emplace(pings[k].lon, coords.size());
                coords.emplace_back(pings[k].lat, pings[k].lon);
                weight.push_back(1);
            } else {
                weight[it->second] += 1;
            }
        }
        size_t best = 0;
        double best_sum = 1e300;
        for (size_t a = 0; a < coords.size(); ++a) {
            double sum = 0;
            for (size_t b = 0; b < coords.size(); ++b)
                sum += weight[b] * geo::haversine_m(coords[a].first, coords[a].second,
                                                    coords[b].first, coords[b].second);
            if (sum < best_sum - 1e-9) {
                best_sum = sum;
                best = a;
            }
        }
        auto slot = index.locate(coords[best].second, coords[best].first);
        if (slot) {
            Stay s;
            s.user_id = user_id;
            s.tract = index.tract(*slot);
            s.start = pings[i].ts;
            s.end = pings[j - 1].ts;
            stays.push_back(std::move(s));
        }
        i = j;
    }
    return stays;
}

std::vector<Trip> extract_trips(const std::vector<Stay>& stays) {
    // Pair each stay with the user's previous one; users may interleave in
    // the input as long as each user's own stays arrive time-sorted.
    std::map<std::string, const Stay*> last;
    std::vector<Trip> trips;
    for (const auto& s : stays) {
        auto [it, fresh] = last.try_emplace(s.user_id, &s);
        if (!fresh) {
            trips.push_back(Trip{s.user_id, it->second->tract, s.tract, it->second->end});
            it->second = &s;
        }
    }
    return trips;
}

std::map<std::string, int> partition_groups(const std::vector<ingest::UserProfile>& profiles,
                                            int g) {
    if (g < 1) throw ConfigError("group count must be positive");
    if (profiles.size() < static_cast<size_t>(g))
        throw DataError("cannot split " + std::to_string(profiles.size()) + " users into " +
                        std::to_string(g) + " groups");
    std::vector<const ingest::UserProfile*> order;
    order.reserve(profiles.size());
    for (const auto& p : profiles) order.push_back(&p);
    std::sort(order.begin(), order.end(),
              [](const ingest::UserProfile* a, const ingest::UserProfile* b) {
                  if (a->ping_count != b->ping_count) return a->ping_count > b->ping_count;
                  return a->user_id < b->user_id;
              });

    size_t base = order.size() / static_cast<size_t>(g);
    size_t remainder = order.size() % static_cast<size_t>(g);
    std::map<std::string, int> assignment;
    size_t pos = 0;
    for (int q = 1; q <= g; ++q) {
        size_t size = base + (static_cast<size_t>(q) <= remainder ? 1 : 0);
        for (size_t k = 0; k < size; ++k) assignment[order[pos++]->user_id] = q;
    }
    return assignment;
}

MobilityNetwork build_network(const std::vector<Trip>& trips,
                              const std::set<std::string>& members,
                              const std::string& group_id) {
    MobilityNetwork net;
    net.group_id = group_id;
    std::map<std::string, std::set<std::string>> visitors;
    for (const auto& t : trips) {
        if (!members.count(t.user_id)) continue;
        ++net.edges[{t.origin, t.destination}];
        visitors[t.origin].insert(t.user_id);
        visitors[t.destination].insert(t.user_id);
    }
    for (const auto& [tract, users] : visitors) net.node_users[tract] = users.size();
    return net;
}

MobilityNetwork filter_min_weight(const MobilityNetwork& net, uint64_t min_w) {
    MobilityNetwork out;
    out.group_id = net.group_id;
    out.node_users = net.node_users;
    for (const auto& [key, w] : net.edges)
        if (w >= min_w) out.edges.emplace(key, w);
    return out;
}

MobilityNetwork nc_backbone(const MobilityNetwork& net, double delta) {
    MobilityNetwork out;
    out.group_id = net.group_id;
    out.node_users = net.node_users;
    double W = static_cast<double>(net.total_weight());
    if (W <= 0) return out;

    std::map<std::string, double> k_out, k_in;
    for (const auto& [key, w] : net.edges) {
        k_out[key.first] += static_cast<double>(w);
        k_in[key.second] += static_cast<double>(w);
    }
    for (const auto& [key, w] : net.edges) {
        double kk = k_out[key.first] * k_in[key.second];
        double expected = kk / W;
        double variance = std::max(0.0, expected * (1.0 - kk / (W * W)));
        if (static_cast<double>(w) > expected + delta * std::sqrt(variance))
            out.edges.emplace(key, w);
    }
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty())
        throw UndefinedStatistic("pearson needs two equal-length non-empty vectors");
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0 || syy <= 0)
        throw UndefinedStatistic("pearson undefined: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

// in+out unweighted edge count; a self-loop counts once on each side.
std::map<std::string, double> degrees(const MobilityNetwork& net) {
    std::map<std::string, double> deg;
    for (const auto& [key, _] : net.edges) {
        deg[key.first] += 1;
        deg[key.second] += 1;
    }
    return deg;
}

} // namespace

double degree_correlation(const MobilityNetwork& a, const MobilityNetwork& b,
                          const std::vector<std::string>& universe) {
    auto da = degrees(a), db = degrees(b);
    std::vector<double> x, y;
    x.reserve(universe.size());
    y.reserve(universe.size());
    for (const auto& tract : universe) {
        auto ia = da.find(tract);
        auto ib = db.find(tract);
        x.push_back(ia == da.end() ? 0.0 : ia->second);
        y.push_back(ib == db.end() ? 0.0 : ib->second);
    }
    return pearson(x, y);
}

double edge_weight_correlation(const MobilityNetwork& a, const MobilityNetwork& b) {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [key, _] : a.edges) keys.insert(key);
    for (const auto& [key, _] : b.edges) keys.insert(key);
    std::vector<double> x, y;
    x.reserve(keys.size());
    y.reserve(keys.size());
    for (const auto& key : keys) {
        auto ia = a.edges.find(key);
        auto ib = b.edges.find(key);
        x.push_back(ia == a.edges.end() ? 0.0 : static_cast<double>(ia->second));
        y.push_back(ib == b.edges.end() ? 0.0 : static_cast<double>(ib->second));
    }
    return pearson(x, y);
}

void write_edges(const std::string& path, const MobilityNetwork& net) {
    CsvWriter w(path);
    w.write_row({"origin", "destination", "weight"});
    for (const auto& [key, weight] : net.edges) // std::map: already (o,d)-sorted
        w.write_row({key.first, key.second, std::to_string(weight)});
}

MobilityNetwork read_edges(const std::string& path, const std::string& group_id) {
    CsvReader r(path);
    size_t o = r.require_column("origin");
    size_t d = r.require_column("destination");
    size_t wcol = r.require_column("weight");
    MobilityNetwork net;
    net.group_id = group_id;
    std::vector<std::string_view> f;
    while (r.next_row(f)) {
        auto w = parse_i64(f[wcol]);
        if (!w || *w < 0)
            throw DataError(path + ": bad weight at line " + std::to_string(r.line_number()));
        net.edges[{std::string(f[o]), std::string(f[d])}] += static_cast<uint64_t>(*w);
    }
    // Visit counts are not serialized; endpoints stand in for the node set.
    for (const auto& [key, _] : net.edges) {
        net.node_users.emplace(key.first, 0);
        net.node_users.emplace(key.second, 0);
    }
    return net;
}

} // namespace mobaudit::networks
