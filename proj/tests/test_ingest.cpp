#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "wardflow/ingest.hpp"

using namespace wardflow;
using testutil::write_temp;

namespace {
const char* kVenueHeader = "id,lat,lon,category,parent_category,is_cultural,created_at,user_count\n";
}

TEST_CASE("parse_venues keeps valid rows and counts rejects by reason") {
  std::string csv = std::string(kVenueHeader) +
                    "v1,51.5,-0.1,Cafe,Food,false,2010-01-02T03:04:05Z,10\n"
                    "v2,91,-0.1,Cafe,Food,false,2010-01-02T03:04:05Z,10\n"
                    "v1,51.4,-0.2,Bar,Nightlife Spot,true,2010-01-02T03:04:05Z,3\n"
                    "v3,51.4,-0.2,Bar,Nightlife Spot,maybe,2010-01-02T03:04:05Z,3\n"
                    "v4,51.4,-0.2,Bar,Nightlife Spot,true,yesterday,3\n"
                    "v5,51.4,-0.2,Bar,Nightlife Spot,true,2010-01-02T03:04:05Z,-1\n";
  auto t = parse_venues(write_temp("venues_mixed.csv", csv));
  CHECK(t.venues.size() == 1);
  CHECK(t.input_rows == 6);
  CHECK(t.rejects.rejected == 5);
  CHECK(t.rejects.by_reason.at("lat out of range") == 1);
  CHECK(t.rejects.by_reason.at("duplicate id") == 1);
  CHECK(t.rejects.by_reason.at("malformed is_cultural") == 1);
  CHECK(t.rejects.by_reason.at("malformed created_at") == 1);
  CHECK(t.rejects.by_reason.at("malformed user_count") == 1);
  CHECK(t.venues.size() + t.rejects.rejected == t.input_rows);
}

TEST_CASE("parse_venues fails fast on structural problems") {
  CHECK_THROWS_AS(parse_venues("/nonexistent/file.csv"), data_error);
  CHECK_THROWS_AS(parse_venues(write_temp("badheader.csv", "id,lat\nx,1\n")), data_error);
}

TEST_CASE("parse_transitions enforces referencing and time order") {
  auto venues = parse_venues(write_temp(
      "venues_two.csv",
      std::string(kVenueHeader) +
          "a,51.5,-0.1,Cafe,Food,false,2010-01-02T03:04:05Z,10\n"
          "b,51.6,-0.2,Bar,Nightlife Spot,true,2010-01-02T03:04:05Z,5\n"));
  std::string csv =
      "origin_venue,dest_venue,t_origin,t_dest\n"
      "a,b,2011-05-01T10:00:00Z,2011-05-01T11:00:00Z\n"
      "a,zzz,2011-05-01T10:00:00Z,2011-05-01T11:00:00Z\n"
      "b,a,2011-05-01T10:00:00Z,2011-05-01T09:00:00Z\n";
  auto log = parse_transitions(write_temp("transitions_mixed.csv", csv), venues);
  CHECK(log.transitions.size() == 1);
  CHECK(log.input_rows == 3);
  CHECK(log.rejects.by_reason.at("unknown venue") == 1);
  CHECK(log.rejects.by_reason.at("t_dest before t_origin") == 1);

  auto empty = parse_transitions(
      write_temp("transitions_empty.csv", "origin_venue,dest_venue,t_origin,t_dest\n"),
      venues);
  CHECK(empty.transitions.empty());
  CHECK(empty.input_rows == 0);
}

TEST_CASE("ward assignment: containment, outside, boundary tie rule") {
  auto wards = testutil::ward_table(
      {testutil::square_ward("WB", 0, 0, 1), testutil::square_ward("WA", 0, 1, 1)});
  // shared boundary at lon=1; point exactly on it is inside both squares.
  auto venues = testutil::venue_table({{"in_b", 0.5, 0.5},
                                       {"outside", 5.0, 5.0},
                                       {"boundary", 0.5, 1.0}});
  auto idx = assign_venues_to_wards(venues, wards);
  CHECK(idx.ward_of[0] == static_cast<std::int32_t>(wards.by_code.at("WB")));
  CHECK(idx.ward_of[1] == -1);
  CHECK(idx.unassigned == 1);
  // lexicographically smaller ward_code wins the overlap
  CHECK(wards[static_cast<std::uint32_t>(idx.ward_of[2])].ward_code == "WA");
}

TEST_CASE("ward assignment is independent of input order") {
  std::mt19937_64 eng(3);
  std::vector<wardflow::Ward> ws;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      ws.push_back(testutil::square_ward("W" + std::to_string(r * 3 + c), r, c, 1.0));
  std::vector<std::tuple<std::string, double, double>> vs;
  std::uniform_real_distribution<double> u(0.01, 2.99);
  for (int i = 0; i < 100; ++i)
    vs.push_back({"v" + std::to_string(i), u(eng), u(eng)});

  auto baseline_wards = testutil::ward_table(ws);
  auto baseline = assign_venues_to_wards(testutil::venue_table(vs), baseline_wards);

  std::shuffle(ws.begin(), ws.end(), eng);
  auto shuffled_wards = testutil::ward_table(ws);
  auto shuffled = assign_venues_to_wards(testutil::venue_table(vs), shuffled_wards);
  for (std::size_t v = 0; v < vs.size(); ++v) {
    std::string got_a = baseline.ward_of[v] < 0
                            ? "-"
                            : baseline_wards[baseline.ward_of[v]].ward_code;
    std::string got_b = shuffled.ward_of[v] < 0
                            ? "-"
                            : shuffled_wards[shuffled.ward_of[v]].ward_code;
    CHECK(got_a == got_b);
  }
}

TEST_CASE("expenditure apportionment divides evenly and conserves totals") {
  auto wards = testutil::ward_table({testutil::square_ward("W1", 0, 0, 1, "B1"),
                                     testutil::square_ward("W2", 0, 1, 1, "B1"),
                                     testutil::square_ward("W3", 0, 2, 1, "B1"),
                                     testutil::square_ward("W4", 0, 3, 1, "B1")});
  ExpenditureTable recs;
  recs.records.push_back({"B1", "2010/11", ExpenditureCategory::culture_heritage, 100.0});
  recs.records.push_back({"B1", "2010/11", ExpenditureCategory::total_services, 400.0});
  auto ap = apportion_expenditure(recs, wards);
  REQUIRE(ap.fiscal_years == std::vector<std::string>{"2010/11"});
  for (int w = 0; w < 4; ++w)
    CHECK(ap.by_year[0][w].category_amount[0] == Catch::Approx(25.0));

  // conservation holds at citywide magnitudes too
  ExpenditureTable big;
  big.records.push_back({"B1", "2010/11", ExpenditureCategory::culture_heritage, 220.5e6});
  auto ap2 = apportion_expenditure(big, wards);
  double sum = 0.0;
  for (int w = 0; w < 4; ++w) sum += ap2.by_year[0][w].ce;
  CHECK(sum == Catch::Approx(220.5e6).epsilon(1e-9));
}

TEST_CASE("per-capita fields use borough population over wards, missing when unknown") {
  auto w1 = testutil::square_ward("W1", 0, 0, 1, "B1");
  auto w2 = testutil::square_ward("W2", 0, 1, 1, "B1");
  w1.population = 1000;
  w2.population = 3000;
  auto wards = testutil::ward_table({w1, w2});
  ExpenditureTable recs;
  recs.records.push_back({"B1", "2010/11", ExpenditureCategory::open_spaces, 8000.0});
  recs.records.push_back({"B1", "2010/11", ExpenditureCategory::total_services, 9000.0});
  auto ap = apportion_expenditure(recs, wards);
  // ward share 4000, pc denominator 4000/2 = 2000 -> 2.0 per head
  CHECK(ap.by_year[0][0].ceop.value() == Catch::Approx(2.0));
  CHECK(ap.by_year[0][1].ceop.value() == Catch::Approx(2.0));

  auto w3 = testutil::square_ward("W3", 0, 0, 1, "B2");  // no population
  auto wards2 = testutil::ward_table({w3});
  ExpenditureTable recs2;
  recs2.records.push_back({"B2", "2010/11", ExpenditureCategory::open_spaces, 10.0});
  auto ap2 = apportion_expenditure(recs2, wards2);
  CHECK_FALSE(ap2.by_year[0][0].ceop.has_value());
}

TEST_CASE("apportionment rejects boroughs without wards") {
  auto wards = testutil::ward_table({testutil::square_ward("W1", 0, 0, 1, "B1")});
  ExpenditureTable recs;
  recs.records.push_back({"B9", "2010/11", ExpenditureCategory::tourism, 5.0});
  CHECK_THROWS_AS(apportion_expenditure(recs, wards), data_error);
}

TEST_CASE("fiscal-calendar alignment") {
  auto pm = align_periods({"2010/11", "2011/12", "2012/13"});
  CHECK(pm.calendar_year("2010/11").value() == 2011);
  CHECK(pm.calendar_year("2012/13").value() == 2013);
  CHECK(pm.fiscal_year(2012).value() == "2011/12");

  auto shifted = align_periods({"2010/11"}, 2);
  CHECK(shifted.calendar_year("2010/11").value() == 2012);

  CHECK_THROWS_AS(align_periods({"2010/11", "2012/13"}), config_error);
  CHECK_THROWS_AS(align_periods({"2010/12"}), config_error);
  CHECK_THROWS_AS(align_periods({"201011"}), config_error);
}

TEST_CASE("imd parser validates rank permutations per edition") {
  std::string good =
      "ward_code,edition,score,rank\n"
      "W1,2010,30.5,1\nW2,2010,20.1,2\nW1,2015,28.0,2\nW2,2015,29.0,1\n";
  auto t = parse_imd(write_temp("imd_good.csv", good));
  CHECK(t.find(2010, "W1")->rank == 1);
  CHECK(t.find(2015, "W1")->rank == 2);
  CHECK(t.find(2012, "W1") == nullptr);

  std::string dup_rank =
      "ward_code,edition,score,rank\n"
      "W1,2010,30.5,1\nW2,2010,20.1,1\n";
  CHECK_THROWS_AS(parse_imd(write_temp("imd_dup.csv", dup_rank)), data_error);
}

TEST_CASE("geojson ward loading accepts polygons and skips malformed features") {
  std::string geo = R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"ward_code":"W1","borough_code":"B1","sub_region":"East","area_km2":2.5,"population":9000},
     "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type":"Feature","properties":{"ward_code":"W2","borough_code":"B1","sub_region":"East","area_km2":-1},
     "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type":"Feature","properties":{"ward_code":"W3","borough_code":"B1","sub_region":"East","area_km2":1},
     "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}},
    {"type":"Feature","properties":{"ward_code":"W4","borough_code":"B1","sub_region":"East","area_km2":1},
     "geometry":{"type":"MultiPolygon","coordinates":[[[[5,5],[6,5],[6,6],[5,6],[5,5]]]]}}
  ]})";
  auto t = load_wards_geojson(write_temp("wards.geojson", geo));
  CHECK(t.wards.size() == 2);
  CHECK(t.rejects.by_reason.at("nonpositive area_km2") == 1);
  CHECK(t.rejects.by_reason.at("malformed ring") == 1);
  CHECK(t[t.by_code.at("W1")].population.value() == 9000);
  // GeoJSON order is [lon, lat]
  CHECK(t[t.by_code.at("W1")].rings[0][1].lon == Catch::Approx(1.0));
  CHECK(t[t.by_code.at("W1")].rings[0][1].lat == Catch::Approx(0.0));
}
