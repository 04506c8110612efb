#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "hail/schema.h"

namespace hail {

// sourceIP, destURL, visitDate, adRevenue, userAgent, countryCode,
// languageCode, searchWord, duration.
Schema UserVisitsSchema();
// a1..a19, all INT32.
Schema SyntheticSchema();

inline constexpr char kSpecialIp[] = "172.101.11.46";
inline constexpr char kSpecialDate[] = "1992-12-22";
inline constexpr int32_t kSyntheticMax = 1000000000;  // values in [0, kSyntheticMax)

// Deterministic per seed. Visit dates are uniform over 1990-2012, ad revenue
// uniform over [0, 500) in cents, durations uniform over [1, 10000]. Every
// 9973rd row (offset 17) carries kSpecialIp, every other one of those with
// kSpecialDate; elsewhere kSpecialIp appears with probability 2e-5.
void GenerateUserVisits(std::ostream& out, uint64_t rows, uint64_t seed);
void GenerateSynthetic(std::ostream& out, uint64_t rows, uint64_t seed);
void GenerateToFile(const std::string& dataset, const std::filesystem::path& path, uint64_t rows, uint64_t seed);

struct NamedQuery {
  std::string name;
  std::string annotation;
};

std::vector<NamedQuery> BobQueries();
std::vector<NamedQuery> SyntheticQueries();

}  // namespace hail
