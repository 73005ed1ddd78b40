#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardflow/csv.hpp"
#include "wardflow/geo.hpp"
#include "wardflow/isotime.hpp"
#include "wardflow/types.hpp"

namespace wardflow {

namespace detail {

inline void require_header(const std::vector<std::string>& got,
                           const std::vector<std::string>& want, const std::string& path) {
  if (got != want) {
    std::string msg = "malformed header in " + path + ": expected ";
    for (std::size_t i = 0; i < want.size(); ++i) msg += (i ? "," : "") + want[i];
    throw data_error(msg);
  }
}

inline std::optional<bool> parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  return std::nullopt;
}

}  // namespace detail

/// venues.csv: id,lat,lon,category,parent_category,is_cultural,created_at,user_count
/// Row-level errors are counted and skipped; only a missing file or a bad
/// header is fatal.
inline VenueTable parse_venues(const std::string& path) {
  CsvReader rd = CsvReader::from_file(path);
  std::vector<std::string> f;
  if (!rd.next(f)) throw data_error("empty file: " + path);
  detail::require_header(
      f, {"id", "lat", "lon", "category", "parent_category", "is_cultural", "created_at",
          "user_count"},
      path);

  VenueTable t;
  while (rd.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;  // trailing blank line
    ++t.input_rows;
    if (f.size() != 8) {
      t.rejects.add("wrong field count");
      continue;
    }
    if (f[0].empty()) {
      t.rejects.add("empty id");
      continue;
    }
    auto lat = parse_double(f[1]);
    auto lon = parse_double(f[2]);
    if (!lat || !lon) {
      t.rejects.add("malformed coordinate");
      continue;
    }
    // negated forms so NaN coordinates are rejected too
    if (!(*lat >= -90.0 && *lat <= 90.0)) {
      t.rejects.add("lat out of range");
      continue;
    }
    if (!(*lon >= -180.0 && *lon <= 180.0)) {
      t.rejects.add("lon out of range");
      continue;
    }
    auto cultural = detail::parse_bool(f[5]);
    if (!cultural) {
      t.rejects.add("malformed is_cultural");
      continue;
    }
    auto created = parse_iso8601(f[6]);
    if (!created) {
      t.rejects.add("malformed created_at");
      continue;
    }
    auto users = parse_int(f[7]);
    if (!users || *users < 0) {
      t.rejects.add("malformed user_count");
      continue;
    }
    if (t.by_id.count(f[0])) {
      t.rejects.add("duplicate id");
      continue;
    }
    Venue v;
    v.id = f[0];
    v.lat = *lat;
    v.lon = *lon;
    v.category = f[3];
    v.parent_category = f[4];
    v.is_cultural = *cultural;
    v.created_at = *created;
    v.user_count = *users;
    t.by_id.emplace(v.id, static_cast<std::uint32_t>(t.venues.size()));
    t.venues.push_back(std::move(v));
  }
  return t;
}

/// transitions.csv: origin_venue,dest_venue,t_origin,t_dest
/// Retained transitions always reference known venues and satisfy
/// t_dest >= t_origin; everything else is counted and dropped.
inline TransitionLog parse_transitions(const std::string& path, const VenueTable& venues) {
  CsvReader rd = CsvReader::from_file(path);
  std::vector<std::string> f;
  if (!rd.next(f)) throw data_error("empty file: " + path);
  detail::require_header(f, {"origin_venue", "dest_venue", "t_origin", "t_dest"}, path);

  TransitionLog log;
  while (rd.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    ++log.input_rows;
    if (f.size() != 4) {
      log.rejects.add("wrong field count");
      continue;
    }
    auto o = venues.by_id.find(f[0]);
    auto d = venues.by_id.find(f[1]);
    if (o == venues.by_id.end() || d == venues.by_id.end()) {
      log.rejects.add("unknown venue");
      continue;
    }
    auto t0 = parse_iso8601(f[2]);
    auto t1 = parse_iso8601(f[3]);
    if (!t0 || !t1) {
      log.rejects.add("malformed timestamp");
      continue;
    }
    if (*t1 < *t0) {
      log.rejects.add("t_dest before t_origin");
      continue;
    }
    log.transitions.push_back({o->second, d->second, *t0, *t1});
  }
  return log;
}

/// wards.geojson: FeatureCollection of Polygon/MultiPolygon features with
/// properties ward_code, borough_code, sub_region, area_km2, population.
/// Feature-level problems are counted and the feature skipped.
inline WardTable load_wards_geojson(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("invalid GeoJSON in " + path + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw data_error("not a FeatureCollection: " + path);

  auto read_ring = [](const nlohmann::json& ring) -> std::optional<std::vector<LatLon>> {
    if (!ring.is_array() || ring.size() < 4) return std::nullopt;
    std::vector<LatLon> out;
    out.reserve(ring.size());
    for (const auto& pos : ring) {
      if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
        return std::nullopt;
      // GeoJSON positions are [lon, lat].
      out.push_back({pos[1].get<double>(), pos[0].get<double>()});
    }
    if (out.front().lat != out.back().lat || out.front().lon != out.back().lon)
      return std::nullopt;  // rings must be closed
    return out;
  };

  WardTable t;
  for (const auto& feat : doc["features"]) {
    ++t.input_features;
    if (!feat.is_object() || !feat.contains("properties") || !feat.contains("geometry")) {
      t.rejects.add("malformed feature");
      continue;
    }
    const auto& props = feat["properties"];
    const auto& geom = feat["geometry"];
    Ward w;
    if (!props.contains("ward_code") || !props["ward_code"].is_string()) {
      t.rejects.add("missing ward_code");
      continue;
    }
    w.ward_code = props["ward_code"].get<std::string>();
    w.borough_code = props.value("borough_code", "");
    w.sub_region = props.value("sub_region", "");
    if (!props.contains("area_km2") || !props["area_km2"].is_number()) {
      t.rejects.add("missing area_km2");
      continue;
    }
    w.area_km2 = props["area_km2"].get<double>();
    if (!(w.area_km2 > 0.0)) {
      t.rejects.add("nonpositive area_km2");
      continue;
    }
    if (props.contains("population") && props["population"].is_number()) {
      auto p = props["population"].get<double>();
      if (p > 0.0) w.population = static_cast<std::int64_t>(p);
    }
    std::string gtype = geom.value("type", "");
    bool bad = false;
    if (gtype == "Polygon") {
      for (const auto& ring : geom["coordinates"]) {
        auto r = read_ring(ring);
        if (!r) {
          bad = true;
          break;
        }
        w.rings.push_back(std::move(*r));
      }
    } else if (gtype == "MultiPolygon") {
      // Flattened rings keep even-odd containment correct.
      for (const auto& poly : geom["coordinates"])
        for (const auto& ring : poly) {
          auto r = read_ring(ring);
          if (!r) {
            bad = true;
            break;
          }
          w.rings.push_back(std::move(*r));
        }
    } else {
      t.rejects.add("unsupported geometry type");
      continue;
    }
    if (bad || w.rings.empty()) {
      t.rejects.add("malformed ring");
      continue;
    }
    if (t.by_code.count(w.ward_code)) {
      t.rejects.add("duplicate ward_code");
      continue;
    }
    t.by_code.emplace(w.ward_code, static_cast<std::uint32_t>(t.wards.size()));
    t.wards.push_back(std::move(w));
  }
  return t;
}

/// expenditure.csv: borough_code,fiscal_year,category,amount
inline ExpenditureTable parse_expenditure(const std::string& path) {
  CsvReader rd = CsvReader::from_file(path);
  std::vector<std::string> f;
  if (!rd.next(f)) throw data_error("empty file: " + path);
  detail::require_header(f, {"borough_code", "fiscal_year", "category", "amount"}, path);

  ExpenditureTable t;
  while (rd.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    ++t.input_rows;
    if (f.size() != 4) {
      t.rejects.add("wrong field count");
      continue;
    }
    auto cat = parse_expenditure_category(f[2]);
    if (!cat) {
      t.rejects.add("unknown category");
      continue;
    }
    auto amount = parse_double(f[3]);
    if (!amount || !(*amount >= 0.0)) {
      t.rejects.add("malformed amount");
      continue;
    }
    t.records.push_back({f[0], f[1], *cat, *amount});
  }
  return t;
}

/// imd.csv: ward_code,edition,score,rank. After row-level screening the
/// ranks of each edition must form a permutation of 1..N.
inline ImdTable parse_imd(const std::string& path) {
  CsvReader rd = CsvReader::from_file(path);
  std::vector<std::string> f;
  if (!rd.next(f)) throw data_error("empty file: " + path);
  detail::require_header(f, {"ward_code", "edition", "score", "rank"}, path);

  ImdTable t;
  while (rd.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    ++t.input_rows;
    if (f.size() != 4) {
      t.rejects.add("wrong field count");
      continue;
    }
    auto edition = parse_int(f[1]);
    if (!edition || (*edition != 2010 && *edition != 2015)) {
      t.rejects.add("unknown edition");
      continue;
    }
    auto score = parse_double(f[2]);
    auto rank = parse_int(f[3]);
    if (!score || !rank || *rank < 1) {
      t.rejects.add("malformed score/rank");
      continue;
    }
    auto& ed = t.by_edition[static_cast<int>(*edition)];
    if (ed.count(f[0])) {
      t.rejects.add("duplicate ward in edition");
      continue;
    }
    ed.emplace(f[0], t.records.size());
    t.records.push_back({f[0], static_cast<int>(*edition), *score, static_cast<int>(*rank)});
  }
  for (const auto& [edition, wards] : t.by_edition) {
    std::vector<char> seen(wards.size() + 1, 0);
    for (const auto& [code, idx] : wards) {
      int r = t.records[idx].rank;
      if (r < 1 || r > static_cast<int>(wards.size()) || seen[r])
        throw data_error("imd edition " + std::to_string(edition) +
                         ": ranks are not a permutation of 1..N");
      seen[r] = 1;
    }
  }
  return t;
}

/// Venue -> ward assignment by even-odd containment. On overlap the
/// lexicographically smallest ward_code wins, so the result is independent
/// of both venue and ward input order.
struct VenueWardIndex {
  std::vector<std::int32_t> ward_of;  // venue index -> ward index, -1 = unassigned
  std::size_t assigned = 0;
  std::size_t unassigned = 0;

  bool in_ward(std::uint32_t venue, std::uint32_t ward) const {
    return ward_of[venue] == static_cast<std::int32_t>(ward);
  }
};

inline VenueWardIndex assign_venues_to_wards(const VenueTable& venues, const WardTable& wards) {
  struct Bbox {
    double lat_lo, lat_hi, lon_lo, lon_hi;
  };
  std::vector<std::uint32_t> order(wards.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return wards[a].ward_code < wards[b].ward_code;
  });
  std::vector<Bbox> boxes(wards.size());
  for (std::uint32_t i = 0; i < wards.size(); ++i) {
    Bbox b{1e9, -1e9, 1e9, -1e9};
    for (const auto& ring : wards[i].rings)
      for (const auto& p : ring) {
        b.lat_lo = std::min(b.lat_lo, p.lat);
        b.lat_hi = std::max(b.lat_hi, p.lat);
        b.lon_lo = std::min(b.lon_lo, p.lon);
        b.lon_hi = std::max(b.lon_hi, p.lon);
      }
    boxes[i] = b;
  }

  VenueWardIndex idx;
  idx.ward_of.assign(venues.size(), -1);
  for (std::uint32_t v = 0; v < venues.size(); ++v) {
    LatLon p{venues[v].lat, venues[v].lon};
    for (std::uint32_t wi : order) {
      const Bbox& b = boxes[wi];
      if (p.lat < b.lat_lo || p.lat > b.lat_hi || p.lon < b.lon_lo || p.lon > b.lon_hi)
        continue;
      if (point_in_rings(p, wards[wi].rings)) {
        idx.ward_of[v] = static_cast<std::int32_t>(wi);
        break;
      }
    }
    if (idx.ward_of[v] >= 0) ++idx.assigned;
    else ++idx.unassigned;
  }
  return idx;
}

/// Per-ward apportioned expenditure for one fiscal year.
struct WardExpenditure {
  double ce = 0.0;  // cultural total (five cultural categories)
  double te = 0.0;  // total services
  double category_amount[kExpenditureCategoryCount] = {0, 0, 0, 0, 0, 0};
  // Per-capita cultural fields; missing when the borough population is unknown.
  std::optional<double> ceop, cech, cels, cers, cet;
};

struct ApportionedExpenditure {
  std::vector<std::string> fiscal_years;                 // sorted ascending
  std::vector<std::vector<WardExpenditure>> by_year;     // [year][ward index]

  std::optional<std::size_t> year_index(const std::string& fiscal) const {
    for (std::size_t i = 0; i < fiscal_years.size(); ++i)
      if (fiscal_years[i] == fiscal) return i;
    return std::nullopt;
  }
};

/// Splits borough amounts evenly across the borough's wards. Per-capita
/// fields divide the ward amount by borough population / wards-in-borough,
/// i.e. they equal borough amount / borough population. Borough population
/// is the sum of ward populations and is missing if any ward lacks one.
inline ApportionedExpenditure apportion_expenditure(const ExpenditureTable& records,
                                                    const WardTable& wards) {
  std::map<std::string, std::vector<std::uint32_t>> borough_wards;
  for (std::uint32_t i = 0; i < wards.size(); ++i)
    borough_wards[wards[i].borough_code].push_back(i);

  for (const auto& r : records.records)
    if (!borough_wards.count(r.borough_code))
      throw data_error("expenditure references borough with zero wards: " + r.borough_code);

  std::map<std::string, std::optional<double>> borough_pop;
  for (const auto& [b, ws] : borough_wards) {
    double total = 0.0;
    bool complete = true;
    for (auto wi : ws) {
      if (!wards[wi].population) {
        complete = false;
        break;
      }
      total += static_cast<double>(*wards[wi].population);
    }
    borough_pop[b] = complete ? std::optional<double>(total) : std::nullopt;
  }

  std::vector<std::string> years;
  for (const auto& r : records.records)
    if (std::find(years.begin(), years.end(), r.fiscal_year) == years.end())
      years.push_back(r.fiscal_year);
  std::sort(years.begin(), years.end());

  ApportionedExpenditure out;
  out.fiscal_years = years;
  out.by_year.assign(years.size(), std::vector<WardExpenditure>(wards.size()));

  for (const auto& r : records.records) {
    std::size_t yi =
        static_cast<std::size_t>(std::find(years.begin(), years.end(), r.fiscal_year) -
                                 years.begin());
    const auto& ws = borough_wards[r.borough_code];
    double share = r.amount / static_cast<double>(ws.size());
    for (auto wi : ws)
      out.by_year[yi][wi].category_amount[static_cast<int>(r.category)] += share;
  }

  for (std::size_t yi = 0; yi < years.size(); ++yi) {
    for (const auto& [b, ws] : borough_wards) {
      auto pop = borough_pop[b];
      double pc_denom = 0.0;
      if (pop && *pop > 0.0) pc_denom = *pop / static_cast<double>(ws.size());
      for (auto wi : ws) {
        WardExpenditure& we = out.by_year[yi][wi];
        const double* a = we.category_amount;
        we.ce = a[static_cast<int>(ExpenditureCategory::culture_heritage)] +
                a[static_cast<int>(ExpenditureCategory::recreation_sport)] +
                a[static_cast<int>(ExpenditureCategory::open_spaces)] +
                a[static_cast<int>(ExpenditureCategory::tourism)] +
                a[static_cast<int>(ExpenditureCategory::library_service)];
        we.te = a[static_cast<int>(ExpenditureCategory::total_services)];
        if (pc_denom > 0.0) {
          we.ceop = a[static_cast<int>(ExpenditureCategory::open_spaces)] / pc_denom;
          we.cech = a[static_cast<int>(ExpenditureCategory::culture_heritage)] / pc_denom;
          we.cels = a[static_cast<int>(ExpenditureCategory::library_service)] / pc_denom;
          we.cers = a[static_cast<int>(ExpenditureCategory::recreation_sport)] / pc_denom;
          we.cet = a[static_cast<int>(ExpenditureCategory::tourism)] / pc_denom;
        }
      }
    }
  }
  return out;
}

/// Fiscal "YYYY/YY" -> calendar YYYY+offset. Fiscal years must be
/// consecutive; the default offset of 1 maps 2010/11 -> 2011.
inline PeriodMap align_periods(const std::vector<std::string>& fiscal_years, int offset = 1) {
  std::vector<std::pair<int, std::string>> parsed;
  for (const auto& fy : fiscal_years) {
    if (fy.size() != 7 || fy[4] != '/') throw config_error("bad fiscal year label: " + fy);
    auto start = parse_int(fy.substr(0, 4));
    auto tail = parse_int(fy.substr(5, 2));
    if (!start || !tail || (*start + 1) % 100 != *tail)
      throw config_error("bad fiscal year label: " + fy);
    parsed.emplace_back(static_cast<int>(*start), fy);
  }
  std::sort(parsed.begin(), parsed.end());
  for (std::size_t i = 1; i < parsed.size(); ++i)
    if (parsed[i].first != parsed[i - 1].first + 1)
      throw config_error("fiscal years are not contiguous: " + parsed[i - 1].second + " -> " +
                         parsed[i].second);
  PeriodMap pm;
  for (const auto& [start, label] : parsed) pm.entries.emplace_back(label, start + offset);
  return pm;
}

}  // namespace wardflow
