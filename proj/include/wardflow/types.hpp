#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace wardflow {

// Exit-code mapping: config_error -> 1, data_error -> 2, anything else -> 3.
class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class data_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Row-level rejection bookkeeping. Retained + rejected must equal the
/// number of input rows; every rejection carries a reason.
struct RejectionLog {
  std::map<std::string, std::size_t> by_reason;
  std::size_t rejected = 0;

  void add(const std::string& reason) {
    ++by_reason[reason];
    ++rejected;
  }
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct Venue {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::string category;
  std::string parent_category;
  bool is_cultural = false;
  std::int64_t created_at = 0;  // UTC epoch seconds
  std::int64_t user_count = 0;
};

struct VenueTable {
  std::vector<Venue> venues;
  std::unordered_map<std::string, std::uint32_t> by_id;
  std::size_t input_rows = 0;
  RejectionLog rejects;

  std::size_t size() const { return venues.size(); }
  const Venue& operator[](std::uint32_t i) const { return venues[i]; }
};

/// One directed trip between two known venues, endpoints stored as indexes
/// into the VenueTable the log was parsed against.
struct Transition {
  std::uint32_t origin = 0;
  std::uint32_t dest = 0;
  std::int64_t t_origin = 0;  // UTC epoch seconds
  std::int64_t t_dest = 0;
};

struct TransitionLog {
  std::vector<Transition> transitions;
  std::size_t input_rows = 0;
  RejectionLog rejects;
};

struct Ward {
  std::string ward_code;
  std::string borough_code;
  std::string sub_region;
  // First ring is the outer boundary, any further rings are holes.
  // Rings are closed: first vertex equals the last.
  std::vector<std::vector<LatLon>> rings;
  double area_km2 = 0.0;
  std::optional<std::int64_t> population;
};

struct WardTable {
  std::vector<Ward> wards;
  std::unordered_map<std::string, std::uint32_t> by_code;
  std::size_t input_features = 0;
  RejectionLog rejects;

  std::size_t size() const { return wards.size(); }
  const Ward& operator[](std::uint32_t i) const { return wards[i]; }
};

enum class ExpenditureCategory {
  culture_heritage,
  recreation_sport,
  open_spaces,
  tourism,
  library_service,
  total_services,
};

inline constexpr int kExpenditureCategoryCount = 6;

inline const char* to_string(ExpenditureCategory c) {
  switch (c) {
    case ExpenditureCategory::culture_heritage: return "culture_heritage";
    case ExpenditureCategory::recreation_sport: return "recreation_sport";
    case ExpenditureCategory::open_spaces: return "open_spaces";
    case ExpenditureCategory::tourism: return "tourism";
    case ExpenditureCategory::library_service: return "library_service";
    case ExpenditureCategory::total_services: return "total_services";
  }
  return "?";
}

inline std::optional<ExpenditureCategory> parse_expenditure_category(const std::string& s) {
  for (int i = 0; i < kExpenditureCategoryCount; ++i) {
    auto c = static_cast<ExpenditureCategory>(i);
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

struct ExpenditureRecord {
  std::string borough_code;
  std::string fiscal_year;  // e.g. "2010/11"
  ExpenditureCategory category = ExpenditureCategory::total_services;
  double amount = 0.0;
};

struct ExpenditureTable {
  std::vector<ExpenditureRecord> records;
  std::size_t input_rows = 0;
  RejectionLog rejects;
};

struct DeprivationRecord {
  std::string ward_code;
  int edition = 0;  // 2010 or 2015
  double score = 0.0;
  int rank = 0;  // 1 = most deprived
};

struct ImdTable {
  std::vector<DeprivationRecord> records;
  // edition -> ward_code -> record index
  std::map<int, std::unordered_map<std::string, std::size_t>> by_edition;
  std::size_t input_rows = 0;
  RejectionLog rejects;

  const DeprivationRecord* find(int edition, const std::string& ward_code) const {
    auto eit = by_edition.find(edition);
    if (eit == by_edition.end()) return nullptr;
    auto wit = eit->second.find(ward_code);
    if (wit == eit->second.end()) return nullptr;
    return &records[wit->second];
  }
};

/// Bijective fiscal-year -> calendar-year alignment.
struct PeriodMap {
  std::vector<std::pair<std::string, int>> entries;  // ordered by fiscal year

  std::optional<int> calendar_year(const std::string& fiscal) const {
    for (const auto& [f, y] : entries)
      if (f == fiscal) return y;
    return std::nullopt;
  }
  std::optional<std::string> fiscal_year(int calendar) const {
    for (const auto& [f, y] : entries)
      if (y == calendar) return f;
    return std::nullopt;
  }
};

}  // namespace wardflow
